#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "strkit/steering.hpp"

namespace strkit {

/// Architecture of the decoder-only transformer: L pre-norm blocks of
/// N-head causal self-attention plus a GELU MLP of width 4*d_model, learned
/// absolute positions, all math in 32-bit floats.
struct ModelConfig {
  int n_layers = 2;
  int n_heads = 2;
  int d_model = 32;
  int vocab_size = 256;
  int max_seq_len = 512;
  std::uint64_t seed = 0;

  int head_dim() const { return d_model / n_heads; }
};

struct LayerWeights {
  std::vector<float> ln1_weight, ln1_bias;      // [d]
  std::vector<float> qkv_weight, qkv_bias;      // [d x 3d], [3d]
  std::vector<float> proj_weight, proj_bias;    // [d x d], [d]
  std::vector<float> ln2_weight, ln2_bias;      // [d]
  std::vector<float> fc_weight, fc_bias;        // [d x 4d], [4d]
  std::vector<float> mlp_proj_weight, mlp_proj_bias;  // [4d x d], [d]
};

/// Weights plus config. Immutable after construction/load; shareable across
/// parallel evaluation workers (forward calls own all scratch).
struct Model {
  ModelConfig config;
  std::vector<float> wte;  // [V x d]
  std::vector<float> wpe;  // [max_seq_len x d]
  std::vector<LayerWeights> layers;
  std::vector<float> ln_f_weight, ln_f_bias;  // [d]
  std::vector<float> lm_head;                 // [d x V], bias-free
  std::vector<std::pair<int, int>> merges;    // optional tokenizer merge table
};

/// logits: T x V row-major (pre-softmax next-token scores per position).
/// attentions (when captured): L x N x T x T row-major, post-softmax and
/// post-steering rows; entries at future positions are zero.
struct ForwardOutput {
  int seq_len = 0;
  int vocab_size = 0;
  std::vector<float> logits;
  std::optional<std::vector<float>> attentions;
  int n_layers = 0;
  int n_heads = 0;
  /// Rows that hit the all-mass-outside-segment fallback during steering.
  int degenerate_rows = 0;
};

struct DecodeConfig {
  int max_new = 32;
  bool stop_on_newline = true;
};

/// Deterministic random init: mt19937_64 seeded from config.seed feeding a
/// Box-Muller gaussian (scale 0.02) in a fixed draw order; norm weights are
/// 1, all biases 0.
Model init_random(const ModelConfig& config);

/// Weight file: magic "STRKIT01", a little-endian u64 JSON header length,
/// the UTF-8 JSON header (config, tensor records, optional merge table),
/// then raw little-endian float32 tensor data, row-major.
void save_weights(const Model& model, const std::string& path);
Model load_weights(const std::string& path);

/// Full causal forward pass. When steering is given, every listed head
/// rescales each of its post-softmax rows toward the segment.
ForwardOutput forward(const Model& model, std::span<const int> tokens,
                      const SteeringConfig* steering = nullptr,
                      bool capture_attn = false);

/// Greedy argmax decoding (ties toward the lowest token id). Stops after
/// max_new tokens, at max_seq_len, or once a generated token's text contains
/// a newline when stop_on_newline is set (that token is kept).
std::vector<int> generate_greedy(const Model& model,
                                 std::span<const int> prompt_tokens,
                                 const DecodeConfig& decode,
                                 const SteeringConfig* steering = nullptr);

/// Natural-log probability of tokens[i] under the softmax of the logits at
/// position i-1, for i = 1..T-1; the first token is not scored.
std::vector<double> sequence_logprobs(const Model& model,
                                      std::span<const int> tokens);

}  // namespace strkit
