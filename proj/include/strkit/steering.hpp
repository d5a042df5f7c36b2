#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <vector>

#include "strkit/tokenizer.hpp"

namespace strkit {

/// One attention head: layer index in [0, L), head index in [0, N).
struct HeadId {
  int layer = 0;
  int head = 0;

  friend bool operator==(const HeadId&, const HeadId&) = default;
  friend auto operator<=>(const HeadId&, const HeadId&) = default;
};

/// Which heads to steer, the downweight factor, and the emphasized token
/// segment. alpha in [0, 1) per the method; alpha == 1 is additionally
/// accepted as an exact no-op for identity tests.
struct SteeringConfig {
  std::set<HeadId> heads;
  float alpha = 1e-3f;
  TokenSpan segment;
};

/// Downweights the entries of a post-softmax attention row that fall outside
/// the segment by alpha, then renormalizes the row to sum to 1. Entries that
/// are already zero stay zero. Writes the result into `out` (which may alias
/// `row`).
///
/// Exact no-ops: alpha == 1, and rows whose nonzero mass lies entirely
/// inside the segment, are returned bit-unchanged.
///
/// Returns true for the degenerate case (post-scale sum is zero, possible
/// only with alpha == 0 and no mass inside the segment); the row is then
/// left unscaled and the caller may count the event.
bool steer_attention_row(std::span<const float> row,
                         std::span<const std::uint8_t> segment_mask,
                         float alpha, std::span<float> out);

/// Convenience overload returning a fresh row; degenerate flag is written
/// through `degenerate` when non-null.
std::vector<float> steer_attention_row(const std::vector<float>& row,
                                       const std::vector<std::uint8_t>& mask,
                                       float alpha,
                                       bool* degenerate = nullptr);

/// Mean over every (layer, head, query row) of the attention mass landing in
/// the span's columns, divided by the span length (per-token average).
/// `attentions` is the L*N*T*T post-softmax tensor from a forward pass.
/// Returns 0 for an empty span.
double segment_attention_mass(const std::vector<float>& attentions,
                              int n_layers, int n_heads, int seq_len,
                              TokenSpan span);

/// Raw variant: total span mass summed over all rows without the per-token
/// division or row averaging.
double segment_attention_mass_raw(const std::vector<float>& attentions,
                                  int n_layers, int n_heads, int seq_len,
                                  TokenSpan span);

}  // namespace strkit
