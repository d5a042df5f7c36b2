#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace strkit {

class Tokenizer;

/// One reading-comprehension item: a question about a context passage plus
/// the accepted gold answers.
struct RcExample {
  std::string id;
  std::string question;
  std::string context;
  std::vector<std::string> gold_answers;
};

/// Ordered, immutable-after-load collection of examples. Iteration order is
/// the file order at load time.
struct Corpus {
  std::string name;
  std::vector<RcExample> examples;

  std::size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }
};

/// Halves a corpus into (valid, test). Fractions are fixed at 0.5/0.5; only
/// the shuffle seed varies.
struct SplitSpec {
  std::uint64_t seed = 0;
};

/// Parses a JSONL file (one record per line, UTF-8) into a Corpus.
/// Schema: {"id": ..., "question": ..., "context": ..., "answers": [...]}.
/// Unknown extra fields are ignored.
Corpus load_jsonl(const std::string& path);

/// Deterministic seeded halving. The first output takes the extra element
/// when the count is odd; both outputs keep the input's relative order.
std::pair<Corpus, Corpus> split_validation(const Corpus& corpus,
                                           const SplitSpec& spec);

/// Keeps the examples whose longer no-emphasis rendering (max token count
/// over the question-first and context-first forms) fits in max_len tokens.
Corpus filter_by_length(const Corpus& corpus, const Tokenizer& tokenizer,
                        std::size_t max_len = 512);

/// Uniform sample without replacement, deterministic given seed; output keeps
/// the original corpus order.
Corpus sample_profiling_subset(const Corpus& corpus, std::size_t n,
                               std::uint64_t seed);

}  // namespace strkit
