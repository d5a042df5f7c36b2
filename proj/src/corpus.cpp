#include "strkit/corpus.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <string_view>
#include <unordered_set>

#include <json.hpp>

#include "strkit/error.hpp"
#include "strkit/prompting.hpp"
#include "strkit/tokenizer.hpp"

namespace strkit {

namespace {

bool blank_after_trim(std::string_view s) {
  auto is_ws = [](char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' ||
           c == '\v';
  };
  return std::all_of(s.begin(), s.end(), is_ws);
}

[[noreturn]] void malformed(std::size_t line_no, const std::string& what) {
  throw Error(ErrorKind::MalformedRecord,
              "line " + std::to_string(line_no) + ": " + what);
}

/// Seeded Fisher-Yates. std::shuffle is not pinned by the standard, so the
/// draw scheme is spelled out here: j = next() % (i + 1), descending i.
std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::mt19937_64 gen(seed);
  for (std::size_t i = n; i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(gen() % i);
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

Corpus take_indices(const Corpus& corpus, std::vector<std::size_t> indices,
                    const std::string& name) {
  std::sort(indices.begin(), indices.end());
  Corpus out;
  out.name = name;
  out.examples.reserve(indices.size());
  for (std::size_t i : indices) out.examples.push_back(corpus.examples[i]);
  return out;
}

}  // namespace

Corpus load_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);

  Corpus corpus;
  corpus.name = std::filesystem::path(path).stem().string();

  std::unordered_set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (blank_after_trim(line)) continue;

    nlohmann::json record = nlohmann::json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.is_object())
      malformed(line_no, "not a JSON object");

    RcExample ex;
    for (const char* field : {"id", "question", "context"}) {
      if (!record.contains(field) || !record[field].is_string())
        malformed(line_no, std::string("missing string field \"") + field +
                               "\"");
    }
    ex.id = record["id"].get<std::string>();
    ex.question = record["question"].get<std::string>();
    ex.context = record["context"].get<std::string>();
    if (ex.id.empty()) malformed(line_no, "empty \"id\"");
    if (blank_after_trim(ex.question)) malformed(line_no, "empty \"question\"");
    if (blank_after_trim(ex.context)) malformed(line_no, "empty \"context\"");

    if (!record.contains("answers") || !record["answers"].is_array())
      malformed(line_no, "missing list field \"answers\"");
    for (const auto& a : record["answers"]) {
      if (!a.is_string() || a.get<std::string>().empty())
        malformed(line_no, "\"answers\" entries must be non-empty strings");
      ex.gold_answers.push_back(a.get<std::string>());
    }
    if (ex.gold_answers.empty()) malformed(line_no, "\"answers\" is empty");

    if (!seen_ids.insert(ex.id).second)
      throw Error(ErrorKind::DuplicateId, ex.id);
    corpus.examples.push_back(std::move(ex));
  }
  return corpus;
}

std::pair<Corpus, Corpus> split_validation(const Corpus& corpus,
                                           const SplitSpec& spec) {
  if (corpus.empty()) throw Error(ErrorKind::EmptyCorpus, corpus.name);

  const std::size_t n = corpus.size();
  const std::size_t first_size = (n + 1) / 2;  // odd count: first half larger
  std::vector<std::size_t> idx = shuffled_indices(n, spec.seed);

  std::vector<std::size_t> first(idx.begin(), idx.begin() + first_size);
  std::vector<std::size_t> second(idx.begin() + first_size, idx.end());
  return {take_indices(corpus, std::move(first), corpus.name + ".valid"),
          take_indices(corpus, std::move(second), corpus.name + ".test")};
}

Corpus filter_by_length(const Corpus& corpus, const Tokenizer& tokenizer,
                        std::size_t max_len) {
  Corpus out;
  out.name = corpus.name;
  for (const RcExample& ex : corpus.examples) {
    std::size_t longest = 0;
    for (PromptOrder order :
         {PromptOrder::QuestionFirst, PromptOrder::ContextFirst}) {
      RenderedPrompt rp = render(ex, order);
      longest = std::max(longest, tokenizer.tokenize(rp.text).size());
    }
    if (longest <= max_len) out.examples.push_back(ex);
  }
  return out;
}

Corpus sample_profiling_subset(const Corpus& corpus, std::size_t n,
                               std::uint64_t seed) {
  if (n > corpus.size())
    throw Error(ErrorKind::SubsetTooLarge,
                std::to_string(n) + " > " + std::to_string(corpus.size()));
  std::vector<std::size_t> idx = shuffled_indices(corpus.size(), seed);
  idx.resize(n);
  return take_indices(corpus, std::move(idx), corpus.name);
}

}  // namespace strkit
