#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>

#include "strkit/corpus.hpp"
#include "strkit/model.hpp"

namespace testutil {

/// Fresh directory under the system temp root, unique per call.
inline std::filesystem::path temp_dir() {
  static std::atomic<int> counter{0};
  const auto dir = std::filesystem::temp_directory_path() /
                   ("strkit_test_" + std::to_string(::getpid()) + "_" +
                    std::to_string(counter.fetch_add(1)));
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::filesystem::path write_text(const std::filesystem::path& path,
                                        const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  return path;
}

/// Every weight zero except unit norm scales: the hidden state stays zero,
/// logits come out all equal, and the softmax is exactly uniform.
inline strkit::Model zero_model(int vocab_size, int d_model = 8,
                                int n_layers = 1, int n_heads = 1,
                                int max_seq_len = 64) {
  strkit::Model m;
  m.config = {n_layers, n_heads, d_model, vocab_size, max_seq_len, 0};
  const std::size_t d = static_cast<std::size_t>(d_model);
  m.wte.assign(static_cast<std::size_t>(vocab_size) * d, 0.0f);
  m.wpe.assign(static_cast<std::size_t>(max_seq_len) * d, 0.0f);
  m.layers.resize(n_layers);
  for (strkit::LayerWeights& w : m.layers) {
    w.ln1_weight.assign(d, 1.0f);
    w.ln1_bias.assign(d, 0.0f);
    w.qkv_weight.assign(d * 3 * d, 0.0f);
    w.qkv_bias.assign(3 * d, 0.0f);
    w.proj_weight.assign(d * d, 0.0f);
    w.proj_bias.assign(d, 0.0f);
    w.ln2_weight.assign(d, 1.0f);
    w.ln2_bias.assign(d, 0.0f);
    w.fc_weight.assign(d * 4 * d, 0.0f);
    w.fc_bias.assign(4 * d, 0.0f);
    w.mlp_proj_weight.assign(4 * d * d, 0.0f);
    w.mlp_proj_bias.assign(d, 0.0f);
  }
  m.ln_f_weight.assign(d, 1.0f);
  m.ln_f_bias.assign(d, 0.0f);
  m.lm_head.assign(d * static_cast<std::size_t>(vocab_size), 0.0f);
  return m;
}

/// zero_model variant that always predicts `token`: the final norm bias
/// selects lm_head's first row, which is one-hot at that column.
inline strkit::Model const_token_model(int vocab_size, int token) {
  strkit::Model m = zero_model(vocab_size);
  m.ln_f_weight.assign(m.ln_f_weight.size(), 0.0f);
  m.ln_f_bias[0] = 1.0f;
  m.lm_head[static_cast<std::size_t>(token)] = 1.0f;
  return m;
}

inline strkit::Corpus toy_corpus(int n) {
  strkit::Corpus corpus;
  corpus.name = "toy";
  const char* animals[] = {"fox",  "owl",  "elk",  "bee", "ant",
                           "carp", "lynx", "dove", "eel", "yak"};
  for (int i = 0; i < n; ++i) {
    strkit::RcExample ex;
    ex.id = "t" + std::to_string(i);
    const std::string animal = animals[i % 10];
    ex.question = "What animal number " + std::to_string(i) + " appears?";
    ex.context = "Record " + std::to_string(i) + " mentions the " + animal + ".";
    ex.gold_answers = {animal};
    corpus.examples.push_back(std::move(ex));
  }
  return corpus;
}

inline std::string corpus_jsonl(const strkit::Corpus& corpus) {
  std::string out;
  for (const strkit::RcExample& ex : corpus.examples) {
    out += "{\"id\": \"" + ex.id + "\", \"question\": \"" + ex.question +
           "\", \"context\": \"" + ex.context + "\", \"answers\": [";
    for (std::size_t i = 0; i < ex.gold_answers.size(); ++i) {
      if (i) out += ", ";
      out += "\"" + ex.gold_answers[i] + "\"";
    }
    out += "]}\n";
  }
  return out;
}

}  // namespace testutil
