#pragma once

#include <set>
#include <string>
#include <vector>

#include "strkit/corpus.hpp"
#include "strkit/model.hpp"
#include "strkit/prompting.hpp"

namespace strkit {

/// Case-folds, collapses whitespace runs to single spaces, and trims.
/// Folding uses the per-codepoint full Unicode case-fold mapping.
std::string normalize_for_match(const std::string& text);

/// True iff any gold answer is a substring of the generated text, both
/// normalized (normalization can be disabled, leaving a raw substring check).
bool contains_accuracy(const std::vector<std::string>& gold_answers,
                       const std::string& generated, bool normalize = true);

/// exp(-mean(logprobs)). Input entries are natural-log probabilities.
double perplexity(const std::vector<double>& logprobs);

/// How one evaluation cell emphasizes the input: nothing, marker wrapping,
/// or attention steering with a fixed head set.
struct MethodSpec {
  enum class Kind { NoEmphasis, MarkedPrompting, AttentionSteering };

  Kind kind = Kind::NoEmphasis;
  MarkerPair marker;          // MarkedPrompting only
  std::set<HeadId> heads;     // AttentionSteering only
  float alpha = 1e-3f;        // AttentionSteering only

  static MethodSpec ne();
  static MethodSpec mp(MarkerPair marker);
  static MethodSpec as(std::set<HeadId> heads, float alpha);

  /// "NE", "MP-<name>", or "AS".
  std::string label() const;
};

struct ExampleResult {
  std::string id;
  bool correct = false;
  std::string generated;
};

/// One (order x method x target) evaluation over a corpus.
struct CellResult {
  PromptOrder order = PromptOrder::QuestionFirst;
  std::string method;
  EmphasisTarget target = EmphasisTarget::None;
  double accuracy = 0.0;
  double mean_ppl = 0.0;
  std::size_t n = 0;
  std::size_t n_skipped = 0;  // too-long prompts, excluded from accuracy
  std::size_t n_marker_collisions = 0;  // payload already contained the marker
  std::vector<ExampleResult> per_example;
};

struct EvalOptions {
  DecodeConfig decode;
  bool normalize = true;
  bool include_marker_tokens = true;  // marker bytes count toward segments
  int threads = 1;
};

/// Renders, emphasizes, generates, and scores every example; mean_ppl is the
/// per-example perplexity of the prompt token sequence, averaged over scored
/// examples. Per-example order follows the corpus.
CellResult evaluate_cell(const Model& model, const Corpus& corpus,
                         PromptOrder order, const MethodSpec& method,
                         EmphasisTarget target,
                         const EvalOptions& options = {});

struct KnowledgePartition {
  std::set<std::string> known_ids;
  std::set<std::string> unknown_ids;
};

/// Closed-book pass: an example is "known" when the model answers it
/// correctly from the question alone.
KnowledgePartition partition_knowledge(const Model& model,
                                       const Corpus& corpus,
                                       const EvalOptions& options = {});

/// One dataset row of the known/unknown split report. Cells with n == 0 keep
/// accuracy 0 and are flagged by their count.
struct KnowledgeSplitRow {
  std::string model;
  std::string dataset;
  double knowledge_amount = 0.0;
  std::size_t n_total = 0;
  std::size_t n_known = 0;
  std::size_t n_unknown = 0;
  double known_no_emphasis = 0.0;
  double known_emphasis = 0.0;
  double unknown_no_emphasis = 0.0;
  double unknown_emphasis = 0.0;
};

/// Renders rows as an aligned text table ("n=0" for empty splits).
std::string knowledge_split_report(const std::vector<KnowledgeSplitRow>& rows);

}  // namespace strkit
