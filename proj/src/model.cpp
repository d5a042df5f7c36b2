#include "strkit/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>

#include <json.hpp>

#include "strkit/error.hpp"

namespace strkit {

namespace {

void validate_config(const ModelConfig& c) {
  if (c.n_layers < 1 || c.n_heads < 1 || c.d_model < 1 || c.vocab_size < 1 ||
      c.max_seq_len < 1)
    throw Error(ErrorKind::InvalidConfig, "model dimensions must be positive");
  if (c.d_model % c.n_heads != 0)
    throw Error(ErrorKind::InvalidConfig,
                "d_model must be divisible by n_heads");
}

float gelu_tanh(float x) {
  constexpr float kSqrt2OverPi = 0.7978845608028654f;
  const float inner = kSqrt2OverPi * (x + 0.044715f * x * x * x);
  return 0.5f * x * (1.0f + std::tanh(inner));
}

constexpr float kLnEps = 1e-5f;

void layer_norm(const float* x, const float* w, const float* b, int d,
                float* out) {
  float mean = 0.0f;
  for (int i = 0; i < d; ++i) mean += x[i];
  mean /= static_cast<float>(d);
  float var = 0.0f;
  for (int i = 0; i < d; ++i) {
    const float c = x[i] - mean;
    var += c * c;
  }
  var /= static_cast<float>(d);
  const float inv = 1.0f / std::sqrt(var + kLnEps);
  for (int i = 0; i < d; ++i) out[i] = (x[i] - mean) * inv * w[i] + b[i];
}

// out[o] = bias[o] + sum_i x[i] * w[i*n_out + o]; i ascends so repeated runs
// and the incremental decode path add in the same order.
void matvec(const float* x, const float* w, const float* bias, int n_in,
            int n_out, float* out) {
  if (bias)
    std::copy(bias, bias + n_out, out);
  else
    std::fill(out, out + n_out, 0.0f);
  for (int i = 0; i < n_in; ++i) {
    const float xi = x[i];
    const float* row = w + static_cast<std::size_t>(i) * n_out;
    for (int o = 0; o < n_out; ++o) out[o] += xi * row[o];
  }
}

/// Incremental decoder state. step() runs one position through every layer
/// against the cached keys/values, so a prompt pass followed by decode steps
/// computes bit-identical values to one monolithic pass over the whole
/// sequence (each position's activations depend only on earlier positions,
/// and every accumulation ascends).
class Engine {
 public:
  Engine(const Model& model, const SteeringConfig* steering, int capture_len)
      : model_(model), steering_(steering), capture_len_(capture_len) {
    validate_config(model.config);
    const ModelConfig& c = model.config;
    if (steering_) {
      if (!(steering_->alpha >= 0.0f && steering_->alpha <= 1.0f))
        throw Error(ErrorKind::InvalidConfig, "alpha must lie in [0, 1]");
      for (const HeadId& h : steering_->heads)
        if (h.layer < 0 || h.layer >= c.n_layers || h.head < 0 ||
            h.head >= c.n_heads)
          throw Error(ErrorKind::InvalidConfig,
                      "steered head outside the layer/head grid");
    }
    const std::size_t d = static_cast<std::size_t>(c.d_model);
    k_cache_.assign(c.n_layers, std::vector<float>(c.max_seq_len * d));
    v_cache_.assign(c.n_layers, std::vector<float>(c.max_seq_len * d));
    x_.resize(d);
    h_.resize(d);
    qkv_.resize(3 * d);
    attn_out_.resize(d);
    y_.resize(d);
    u_.resize(4 * d);
    probs_.resize(c.max_seq_len);
    logits_.resize(c.vocab_size);
    if (capture_len_ > 0)
      attentions_.assign(static_cast<std::size_t>(c.n_layers) * c.n_heads *
                             capture_len_ * capture_len_,
                         0.0f);
  }

  // Feeds one token and returns the logits row for its position.
  const std::vector<float>& step(int token) {
    const ModelConfig& c = model_.config;
    if (t_ >= c.max_seq_len)
      throw Error(ErrorKind::SequenceTooLong,
                  "sequence exceeds max_seq_len " +
                      std::to_string(c.max_seq_len));
    if (token < 0 || token >= c.vocab_size)
      throw Error(ErrorKind::UnknownTokenId,
                  "token id " + std::to_string(token) + " out of range");

    const int d = c.d_model;
    const int hd = c.head_dim();
    const float scale = 1.0f / std::sqrt(static_cast<float>(hd));
    const int pos = t_;

    const float* wte_row = model_.wte.data() + static_cast<std::size_t>(token) * d;
    const float* wpe_row = model_.wpe.data() + static_cast<std::size_t>(pos) * d;
    for (int i = 0; i < d; ++i) x_[i] = wte_row[i] + wpe_row[i];

    for (int l = 0; l < c.n_layers; ++l) {
      const LayerWeights& w = model_.layers[l];
      layer_norm(x_.data(), w.ln1_weight.data(), w.ln1_bias.data(), d, h_.data());
      matvec(h_.data(), w.qkv_weight.data(), w.qkv_bias.data(), d, 3 * d,
             qkv_.data());

      float* k_row = k_cache_[l].data() + static_cast<std::size_t>(pos) * d;
      float* v_row = v_cache_[l].data() + static_cast<std::size_t>(pos) * d;
      std::copy(qkv_.begin() + d, qkv_.begin() + 2 * d, k_row);
      std::copy(qkv_.begin() + 2 * d, qkv_.begin() + 3 * d, v_row);

      std::fill(attn_out_.begin(), attn_out_.end(), 0.0f);
      for (int n = 0; n < c.n_heads; ++n) {
        const float* q = qkv_.data() + n * hd;
        const int rows = pos + 1;

        float max_score = -std::numeric_limits<float>::infinity();
        for (int j = 0; j < rows; ++j) {
          const float* kj = k_cache_[l].data() +
                            static_cast<std::size_t>(j) * d + n * hd;
          float dot = 0.0f;
          for (int k = 0; k < hd; ++k) dot += q[k] * kj[k];
          probs_[j] = dot * scale;
          max_score = std::max(max_score, probs_[j]);
        }
        float denom = 0.0f;
        for (int j = 0; j < rows; ++j) {
          probs_[j] = std::exp(probs_[j] - max_score);
          denom += probs_[j];
        }
        for (int j = 0; j < rows; ++j) probs_[j] /= denom;

        if (steering_ && steering_->heads.contains({l, n})) {
          mask_.resize(rows);
          for (int j = 0; j < rows; ++j)
            mask_[j] = static_cast<std::size_t>(j) >= steering_->segment.start &&
                       static_cast<std::size_t>(j) < steering_->segment.end;
          std::span<float> row(probs_.data(), static_cast<std::size_t>(rows));
          degenerate_rows_ += steer_attention_row(row, mask_, steering_->alpha,
                                                  row);
        }

        if (capture_len_ > 0) {
          float* dst = attentions_.data() +
                       ((static_cast<std::size_t>(l) * c.n_heads + n) *
                            capture_len_ +
                        pos) *
                           capture_len_;
          std::copy(probs_.begin(), probs_.begin() + rows, dst);
        }

        float* out_head = attn_out_.data() + n * hd;
        for (int j = 0; j < rows; ++j) {
          const float p = probs_[j];
          const float* vj = v_cache_[l].data() +
                            static_cast<std::size_t>(j) * d + n * hd;
          for (int k = 0; k < hd; ++k) out_head[k] += p * vj[k];
        }
      }

      matvec(attn_out_.data(), w.proj_weight.data(), w.proj_bias.data(), d, d,
             y_.data());
      for (int i = 0; i < d; ++i) x_[i] += y_[i];

      layer_norm(x_.data(), w.ln2_weight.data(), w.ln2_bias.data(), d, h_.data());
      matvec(h_.data(), w.fc_weight.data(), w.fc_bias.data(), d, 4 * d,
             u_.data());
      for (float& v : u_) v = gelu_tanh(v);
      matvec(u_.data(), w.mlp_proj_weight.data(), w.mlp_proj_bias.data(), 4 * d,
             d, y_.data());
      for (int i = 0; i < d; ++i) x_[i] += y_[i];
    }

    layer_norm(x_.data(), model_.ln_f_weight.data(), model_.ln_f_bias.data(), d,
               h_.data());
    matvec(h_.data(), model_.lm_head.data(), nullptr, d, c.vocab_size,
           logits_.data());
    ++t_;
    return logits_;
  }

  int positions() const { return t_; }
  int degenerate_rows() const { return degenerate_rows_; }
  std::vector<float> take_attentions() { return std::move(attentions_); }

 private:
  const Model& model_;
  const SteeringConfig* steering_;
  int capture_len_;
  int t_ = 0;
  int degenerate_rows_ = 0;
  std::vector<std::vector<float>> k_cache_, v_cache_;
  std::vector<float> x_, h_, qkv_, attn_out_, y_, u_, probs_, logits_;
  std::vector<std::uint8_t> mask_;
  std::vector<float> attentions_;
};

// Byte strings per token id: 256 single bytes plus one merged entry per
// merge-table row. Ids past the table (vocab padding) have no text.
std::vector<std::string> token_texts(const std::vector<std::pair<int, int>>& merges) {
  std::vector<std::string> texts(256);
  for (int b = 0; b < 256; ++b) texts[b] = std::string(1, static_cast<char>(b));
  texts.reserve(256 + merges.size());
  for (std::size_t i = 0; i < merges.size(); ++i) {
    const auto [a, b] = merges[i];
    const int limit = static_cast<int>(256 + i);
    if (a < 0 || a >= limit || b < 0 || b >= limit)
      throw Error(ErrorKind::FormatError,
                  "merge " + std::to_string(i) + " references a later id");
    texts.push_back(texts[a] + texts[b]);
  }
  return texts;
}

int argmax_lowest(const std::vector<float>& logits) {
  int best = 0;
  for (int o = 1; o < static_cast<int>(logits.size()); ++o)
    if (logits[o] > logits[best]) best = o;
  return best;
}

struct TensorRef {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<float>* data;
};

std::vector<TensorRef> tensor_table(Model& m) {
  const std::size_t d = static_cast<std::size_t>(m.config.d_model);
  const std::size_t v = static_cast<std::size_t>(m.config.vocab_size);
  const std::size_t s = static_cast<std::size_t>(m.config.max_seq_len);
  std::vector<TensorRef> t;
  t.push_back({"wte", {v, d}, &m.wte});
  t.push_back({"wpe", {s, d}, &m.wpe});
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    LayerWeights& w = m.layers[l];
    const std::string p = "h." + std::to_string(l) + ".";
    t.push_back({p + "ln1.weight", {d}, &w.ln1_weight});
    t.push_back({p + "ln1.bias", {d}, &w.ln1_bias});
    t.push_back({p + "attn.qkv.weight", {d, 3 * d}, &w.qkv_weight});
    t.push_back({p + "attn.qkv.bias", {3 * d}, &w.qkv_bias});
    t.push_back({p + "attn.proj.weight", {d, d}, &w.proj_weight});
    t.push_back({p + "attn.proj.bias", {d}, &w.proj_bias});
    t.push_back({p + "ln2.weight", {d}, &w.ln2_weight});
    t.push_back({p + "ln2.bias", {d}, &w.ln2_bias});
    t.push_back({p + "mlp.fc.weight", {d, 4 * d}, &w.fc_weight});
    t.push_back({p + "mlp.fc.bias", {4 * d}, &w.fc_bias});
    t.push_back({p + "mlp.proj.weight", {4 * d, d}, &w.mlp_proj_weight});
    t.push_back({p + "mlp.proj.bias", {d}, &w.mlp_proj_bias});
  }
  t.push_back({"ln_f.weight", {d}, &m.ln_f_weight});
  t.push_back({"ln_f.bias", {d}, &m.ln_f_bias});
  t.push_back({"lm_head", {d, v}, &m.lm_head});
  return t;
}

std::size_t numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t s : shape) n *= s;
  return n;
}

/// mt19937_64 through Box-Muller; the draw scheme is spelled out (two raw
/// 64-bit draws per sample, cosine branch only) so files regenerate
/// identically everywhere.
class GaussianSource {
 public:
  explicit GaussianSource(std::uint64_t seed) : gen_(seed) {}

  float next() {
    const double u1 = (static_cast<double>(gen_() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    const double z = std::sqrt(-2.0 * std::log(u1)) *
                     std::cos(2.0 * std::numbers::pi * u2);
    return static_cast<float>(z * 0.02);
  }

  void fill(std::vector<float>& v, std::size_t n) {
    v.resize(n);
    for (float& f : v) f = next();
  }

 private:
  std::mt19937_64 gen_;
};

constexpr char kMagic[8] = {'S', 'T', 'R', 'K', 'I', 'T', '0', '1'};

}  // namespace

Model init_random(const ModelConfig& config) {
  validate_config(config);
  Model m;
  m.config = config;
  const std::size_t d = static_cast<std::size_t>(config.d_model);
  GaussianSource rng(config.seed);
  rng.fill(m.wte, static_cast<std::size_t>(config.vocab_size) * d);
  rng.fill(m.wpe, static_cast<std::size_t>(config.max_seq_len) * d);
  m.layers.resize(config.n_layers);
  for (LayerWeights& w : m.layers) {
    w.ln1_weight.assign(d, 1.0f);
    w.ln1_bias.assign(d, 0.0f);
    rng.fill(w.qkv_weight, d * 3 * d);
    w.qkv_bias.assign(3 * d, 0.0f);
    rng.fill(w.proj_weight, d * d);
    w.proj_bias.assign(d, 0.0f);
    w.ln2_weight.assign(d, 1.0f);
    w.ln2_bias.assign(d, 0.0f);
    rng.fill(w.fc_weight, d * 4 * d);
    w.fc_bias.assign(4 * d, 0.0f);
    rng.fill(w.mlp_proj_weight, 4 * d * d);
    w.mlp_proj_bias.assign(d, 0.0f);
  }
  m.ln_f_weight.assign(d, 1.0f);
  m.ln_f_bias.assign(d, 0.0f);
  rng.fill(m.lm_head, d * static_cast<std::size_t>(config.vocab_size));
  return m;
}

void save_weights(const Model& model, const std::string& path) {
  validate_config(model.config);
  auto table = tensor_table(const_cast<Model&>(model));
  nlohmann::ordered_json header;
  header["config"] = {{"n_layers", model.config.n_layers},
                      {"n_heads", model.config.n_heads},
                      {"d_model", model.config.d_model},
                      {"vocab_size", model.config.vocab_size},
                      {"max_seq_len", model.config.max_seq_len},
                      {"seed", model.config.seed}};
  nlohmann::ordered_json tensors = nlohmann::ordered_json::array();
  std::uint64_t offset = 0;
  for (const TensorRef& t : table) {
    if (t.data->size() != numel(t.shape))
      throw Error(ErrorKind::ShapeMismatch,
                  "tensor " + t.name + " has " + std::to_string(t.data->size()) +
                      " values, expected " + std::to_string(numel(t.shape)));
    tensors.push_back({{"name", t.name}, {"shape", t.shape}, {"offset", offset}});
    offset += t.data->size() * sizeof(float);
  }
  header["tensors"] = std::move(tensors);
  if (!model.merges.empty()) header["merges"] = model.merges;

  const std::string header_str = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot open " + path + " for writing");
  out.write(kMagic, 8);
  const std::uint64_t hlen = header_str.size();
  char lenbuf[8];
  for (int i = 0; i < 8; ++i)
    lenbuf[i] = static_cast<char>((hlen >> (8 * i)) & 0xff);
  out.write(lenbuf, 8);
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  for (const TensorRef& t : table)
    out.write(reinterpret_cast<const char*>(t.data->data()),
              static_cast<std::streamsize>(t.data->size() * sizeof(float)));
  if (!out) throw Error(ErrorKind::IoError, "short write to " + path);
}

Model load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0)
    throw Error(ErrorKind::FormatError, path + ": bad magic");
  std::uint64_t hlen = 0;
  for (int i = 0; i < 8; ++i)
    hlen |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[8 + i]))
            << (8 * i);
  if (16 + hlen > bytes.size())
    throw Error(ErrorKind::FormatError, path + ": truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(16, hlen));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::FormatError, path + ": header is not JSON: " + e.what());
  }

  Model m;
  try {
    const auto& c = header.at("config");
    m.config.n_layers = c.at("n_layers").get<int>();
    m.config.n_heads = c.at("n_heads").get<int>();
    m.config.d_model = c.at("d_model").get<int>();
    m.config.vocab_size = c.at("vocab_size").get<int>();
    m.config.max_seq_len = c.at("max_seq_len").get<int>();
    m.config.seed = c.value("seed", std::uint64_t{0});
    if (header.contains("merges"))
      m.merges = header.at("merges").get<std::vector<std::pair<int, int>>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::FormatError, path + ": bad header field: " + e.what());
  }
  validate_config(m.config);

  m.layers.resize(m.config.n_layers);
  auto table = tensor_table(m);
  const char* data = bytes.data() + 16 + hlen;
  const std::size_t data_size = bytes.size() - 16 - hlen;

  std::size_t found = 0;
  if (!header.contains("tensors") || !header["tensors"].is_array())
    throw Error(ErrorKind::FormatError, path + ": missing tensor list");
  for (const auto& rec : header["tensors"]) {
    std::string name;
    std::vector<std::size_t> shape;
    std::uint64_t offset = 0;
    try {
      name = rec.at("name").get<std::string>();
      shape = rec.at("shape").get<std::vector<std::size_t>>();
      offset = rec.at("offset").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::FormatError, path + ": bad tensor record: " + e.what());
    }
    auto it = std::find_if(table.begin(), table.end(),
                           [&](const TensorRef& t) { return t.name == name; });
    if (it == table.end())
      throw Error(ErrorKind::FormatError, path + ": unknown tensor " + name);
    if (shape != it->shape)
      throw Error(ErrorKind::ShapeMismatch, path + ": tensor " + name +
                                                " has unexpected shape");
    const std::size_t n = numel(shape);
    if (offset + n * sizeof(float) > data_size)
      throw Error(ErrorKind::FormatError, path + ": tensor " + name +
                                              " runs past end of file");
    it->data->resize(n);
    std::memcpy(it->data->data(), data + offset, n * sizeof(float));
    ++found;
  }
  if (found != table.size())
    throw Error(ErrorKind::FormatError,
                path + ": expected " + std::to_string(table.size()) +
                    " tensors, found " + std::to_string(found));
  return m;
}

ForwardOutput forward(const Model& model, std::span<const int> tokens,
                      const SteeringConfig* steering, bool capture_attn) {
  if (tokens.empty()) throw Error(ErrorKind::EmptyInput, "empty token sequence");
  const int t = static_cast<int>(tokens.size());
  Engine engine(model, steering, capture_attn ? t : 0);

  ForwardOutput out;
  out.seq_len = t;
  out.vocab_size = model.config.vocab_size;
  out.n_layers = model.config.n_layers;
  out.n_heads = model.config.n_heads;
  out.logits.resize(static_cast<std::size_t>(t) * model.config.vocab_size);
  for (int i = 0; i < t; ++i) {
    const std::vector<float>& row = engine.step(tokens[i]);
    std::copy(row.begin(), row.end(),
              out.logits.begin() + static_cast<std::size_t>(i) * row.size());
  }
  out.degenerate_rows = engine.degenerate_rows();
  if (capture_attn) out.attentions = engine.take_attentions();
  return out;
}

std::vector<int> generate_greedy(const Model& model,
                                 std::span<const int> prompt_tokens,
                                 const DecodeConfig& decode,
                                 const SteeringConfig* steering) {
  if (prompt_tokens.empty())
    throw Error(ErrorKind::EmptyInput, "empty prompt");
  Engine engine(model, steering, 0);
  const std::vector<float>* logits = nullptr;
  for (int tok : prompt_tokens) logits = &engine.step(tok);

  std::vector<std::string> texts;
  if (decode.stop_on_newline) texts = token_texts(model.merges);

  std::vector<int> generated;
  for (int i = 0; i < decode.max_new; ++i) {
    if (engine.positions() >= model.config.max_seq_len) break;
    const int next = argmax_lowest(*logits);
    generated.push_back(next);
    if (decode.stop_on_newline && next < static_cast<int>(texts.size()) &&
        texts[next].find('\n') != std::string::npos)
      break;
    if (i + 1 < decode.max_new && engine.positions() < model.config.max_seq_len)
      logits = &engine.step(next);
  }
  return generated;
}

std::vector<double> sequence_logprobs(const Model& model,
                                      std::span<const int> tokens) {
  if (tokens.empty()) throw Error(ErrorKind::EmptyInput, "empty token sequence");
  std::vector<double> out;
  if (tokens.size() < 2) return out;
  Engine engine(model, nullptr, 0);
  out.reserve(tokens.size() - 1);
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
    const std::vector<float>& logits = engine.step(tokens[i]);
    const int next = tokens[i + 1];
    if (next < 0 || next >= model.config.vocab_size)
      throw Error(ErrorKind::UnknownTokenId,
                  "token id " + std::to_string(next) + " out of range");
    const float mx = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    for (float v : logits) denom += std::exp(static_cast<double>(v - mx));
    out.push_back(static_cast<double>(logits[next] - mx) - std::log(denom));
  }
  return out;
}

}  // namespace strkit
