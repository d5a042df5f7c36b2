#include "strkit/steering.hpp"

#include <algorithm>

#include "strkit/error.hpp"

namespace strkit {

bool steer_attention_row(std::span<const float> row,
                         std::span<const std::uint8_t> segment_mask,
                         float alpha, std::span<float> out) {
  if (row.size() != segment_mask.size() || row.size() != out.size())
    throw Error(ErrorKind::ShapeMismatch,
                "row, mask, and out must have equal length");
  if (!(alpha >= 0.0f && alpha <= 1.0f))
    throw Error(ErrorKind::InvalidConfig, "alpha must lie in [0, 1]");

  const std::size_t n = row.size();

  // Exact no-op cases: copy the input bits through untouched so steering
  // with alpha == 1 or a full-coverage segment is indistinguishable from no
  // steering at all.
  bool outside_mass = false;
  if (alpha != 1.0f) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!segment_mask[i] && row[i] != 0.0f) {
        outside_mass = true;
        break;
      }
    }
  }
  if (!outside_mass) {
    if (out.data() != row.data()) std::copy(row.begin(), row.end(), out.begin());
    return false;
  }

  float sum = 0.0f;  // ascending-index accumulation
  for (std::size_t i = 0; i < n; ++i)
    sum += segment_mask[i] ? row[i] : alpha * row[i];

  if (sum == 0.0f) {
    // Only reachable with alpha == 0 and all mass outside the segment.
    if (out.data() != row.data()) std::copy(row.begin(), row.end(), out.begin());
    return true;
  }

  for (std::size_t i = 0; i < n; ++i)
    out[i] = (segment_mask[i] ? row[i] : alpha * row[i]) / sum;
  return false;
}

std::vector<float> steer_attention_row(const std::vector<float>& row,
                                       const std::vector<std::uint8_t>& mask,
                                       float alpha, bool* degenerate) {
  std::vector<float> out(row.size());
  const bool flag = steer_attention_row(std::span<const float>(row),
                                        std::span<const std::uint8_t>(mask),
                                        alpha, std::span<float>(out));
  if (degenerate) *degenerate = flag;
  return out;
}

namespace {

double span_mass_sum(const std::vector<float>& attentions, int n_layers,
                     int n_heads, int seq_len, TokenSpan span) {
  const std::size_t t = static_cast<std::size_t>(seq_len);
  const std::size_t expect = static_cast<std::size_t>(n_layers) * n_heads * t * t;
  if (attentions.size() != expect)
    throw Error(ErrorKind::ShapeMismatch, "attention tensor is not L*N*T*T");
  if (span.end > t)
    throw Error(ErrorKind::SpanOutOfRange, "span exceeds sequence length");

  double total = 0.0;
  const std::size_t rows = static_cast<std::size_t>(n_layers) * n_heads * t;
  for (std::size_t r = 0; r < rows; ++r) {
    const float* row = attentions.data() + r * t;
    for (std::size_t j = span.start; j < span.end; ++j) total += row[j];
  }
  return total;
}

}  // namespace

double segment_attention_mass(const std::vector<float>& attentions,
                              int n_layers, int n_heads, int seq_len,
                              TokenSpan span) {
  if (span.empty()) return 0.0;
  const double total = span_mass_sum(attentions, n_layers, n_heads, seq_len, span);
  const double rows = static_cast<double>(n_layers) * n_heads * seq_len;
  return total / rows / static_cast<double>(span.length());
}

double segment_attention_mass_raw(const std::vector<float>& attentions,
                                  int n_layers, int n_heads, int seq_len,
                                  TokenSpan span) {
  if (span.empty()) return 0.0;
  return span_mass_sum(attentions, n_layers, n_heads, seq_len, span);
}

}  // namespace strkit
