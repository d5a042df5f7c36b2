#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "strkit/error.hpp"
#include "strkit/metrics.hpp"

using namespace strkit;

namespace {

strkit::Corpus easy_corpus() {
  Corpus corpus;
  corpus.name = "easy";
  for (int i = 0; i < 3; ++i) {
    RcExample ex;
    ex.id = "s" + std::to_string(i);
    ex.question = "Q" + std::to_string(i) + "?";
    ex.context = "a b";
    ex.gold_answers = {"a"};
    corpus.examples.push_back(std::move(ex));
  }
  return corpus;
}

}  // namespace

TEST_CASE("normalize_for_match folds case and collapses whitespace") {
  CHECK(normalize_for_match("  Hello   WORLD ") == "hello world");
  CHECK(normalize_for_match("a\t\n b") == "a b");
  CHECK(normalize_for_match("") == "");
  CHECK(normalize_for_match(" \t\r\n ") == "");
  CHECK(normalize_for_match("already clean") == "already clean");
}

TEST_CASE("normalize_for_match applies full Unicode case folding") {
  // ß -> ss, and the capital ẞ folds the same way.
  CHECK(normalize_for_match("Stra\xc3\x9f" "e") == "strasse");
  CHECK(normalize_for_match("STRA\xe1\xba\x9e" "E") == "strasse");
  // İ (U+0130) folds to i + combining dot above.
  CHECK(normalize_for_match("\xc4\xb0") == "i\xcc\x87");
  // Σ and final ς both fold to σ.
  CHECK(normalize_for_match("\xce\xa3") == "\xcf\x83");
  CHECK(normalize_for_match("\xcf\x82") == "\xcf\x83");
  // Fullwidth A folds to fullwidth a.
  CHECK(normalize_for_match("\xef\xbc\xa1") == "\xef\xbd\x81");
}

TEST_CASE("normalize_for_match treats Unicode spaces as separators") {
  CHECK(normalize_for_match("a\xc2\xa0\xc2\xa0" "b") == "a b");       // NBSP
  CHECK(normalize_for_match("a\xe3\x80\x80" "b") == "a b");           // U+3000
  CHECK(normalize_for_match("a\xe2\x80\xa8" "b") == "a b");           // U+2028
  CHECK(normalize_for_match("\xe2\x80\x89" "x\xe2\x80\x89") == "x");  // U+2009
}

TEST_CASE("normalize_for_match passes malformed bytes through") {
  CHECK(normalize_for_match("\xff") == "\xff");
  CHECK(normalize_for_match("ok \xff ok") == "ok \xff ok");
}

TEST_CASE("contains_accuracy is a normalized substring test") {
  CHECK(contains_accuracy({"Paris"}, "The answer is PARIS!"));
  CHECK(contains_accuracy({"New  York"}, "in new\nyork today"));
  CHECK(contains_accuracy({"cat"}, "concatenate"));
  CHECK_FALSE(contains_accuracy({"dog"}, "cat"));
  CHECK(contains_accuracy({"zzz", "cat"}, "a cat"));
  CHECK_FALSE(contains_accuracy({}, "anything"));
  // Raw mode keeps case and spacing.
  CHECK_FALSE(contains_accuracy({"Paris"}, "paris", false));
  CHECK(contains_accuracy({"paris"}, "in paris", false));
  // An empty needle matches anything; corpus loading rejects empty golds.
  CHECK(contains_accuracy({""}, "whatever"));
}

TEST_CASE("perplexity matches hand arithmetic") {
  CHECK(perplexity({std::log(0.5), std::log(0.125)}) ==
        doctest::Approx(4.0).epsilon(1e-12));
  CHECK(perplexity({std::log(0.25), std::log(0.125)}) ==
        doctest::Approx(std::sqrt(32.0)).epsilon(1e-12));
  CHECK(perplexity({std::log(0.2)}) == doctest::Approx(5.0).epsilon(1e-12));
  try {
    perplexity({});
    FAIL("expected an Error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyInput);
  }
}

TEST_CASE("evaluate_cell on the uniform model scores zero with ppl V") {
  const Model m = testutil::zero_model(256, 8, 1, 1, 128);
  const Corpus corpus = testutil::toy_corpus(6);
  EvalOptions opts;
  opts.decode.max_new = 4;

  const CellResult cell = evaluate_cell(m, corpus, PromptOrder::QuestionFirst,
                                        MethodSpec::ne(), EmphasisTarget::None,
                                        opts);
  CHECK(cell.method == "NE");
  CHECK(cell.n == 6);
  CHECK(cell.n_skipped == 0);
  CHECK(cell.accuracy == 0.0);
  CHECK(cell.mean_ppl == doctest::Approx(256.0).epsilon(1e-9));
  REQUIRE(cell.per_example.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(cell.per_example[i].id == corpus.examples[i].id);
    CHECK(cell.per_example[i].generated == std::string(4, '\0'));
    CHECK_FALSE(cell.per_example[i].correct);
  }
}

TEST_CASE("evaluate_cell handles marker and steering methods") {
  const Model m = testutil::zero_model(256, 8, 1, 1, 128);
  const Corpus corpus = testutil::toy_corpus(4);
  EvalOptions opts;
  opts.decode.max_new = 2;

  const CellResult mp = evaluate_cell(
      m, corpus, PromptOrder::ContextFirst,
      MethodSpec::mp(*find_builtin_marker("star")), EmphasisTarget::Context,
      opts);
  CHECK(mp.method == "MP-star");
  CHECK(mp.n == 4);
  CHECK(mp.mean_ppl == doctest::Approx(256.0).epsilon(1e-9));

  const CellResult as = evaluate_cell(
      m, corpus, PromptOrder::QuestionFirst,
      MethodSpec::as({{0, 0}}, 1e-3f), EmphasisTarget::Context, opts);
  CHECK(as.method == "AS");
  CHECK(as.n == 4);
  CHECK(as.n_skipped == 0);

  CHECK(mp.n_marker_collisions == 0);
  Corpus starred = corpus;
  starred.examples[1].question = "What *animal* appears?";
  const CellResult collide = evaluate_cell(
      m, starred, PromptOrder::ContextFirst,
      MethodSpec::mp(*find_builtin_marker("star")), EmphasisTarget::Question,
      opts);
  CHECK(collide.n_marker_collisions == 1);
  CHECK(collide.n == 4);
}

TEST_CASE("evaluate_cell scores a model that emits the gold answer") {
  const Model m = testutil::const_token_model(256, 'a');
  const Corpus corpus = easy_corpus();
  EvalOptions opts;
  opts.decode.max_new = 5;
  const CellResult cell = evaluate_cell(m, corpus, PromptOrder::QuestionFirst,
                                        MethodSpec::ne(), EmphasisTarget::None,
                                        opts);
  CHECK(cell.accuracy == 1.0);
  CHECK(cell.n == 3);
  CHECK(cell.mean_ppl > 0.0);
  CHECK(cell.per_example[0].generated == "aaaaa");
}

TEST_CASE("evaluate_cell output does not depend on the thread count") {
  const Model m = testutil::const_token_model(256, 'a');
  const Corpus corpus = easy_corpus();
  EvalOptions one;
  one.decode.max_new = 5;
  EvalOptions four = one;
  four.threads = 4;

  const CellResult a = evaluate_cell(m, corpus, PromptOrder::ContextFirst,
                                     MethodSpec::ne(), EmphasisTarget::None,
                                     one);
  const CellResult b = evaluate_cell(m, corpus, PromptOrder::ContextFirst,
                                     MethodSpec::ne(), EmphasisTarget::None,
                                     four);
  CHECK(a.accuracy == b.accuracy);
  CHECK(a.mean_ppl == b.mean_ppl);
  REQUIRE(a.per_example.size() == b.per_example.size());
  for (std::size_t i = 0; i < a.per_example.size(); ++i) {
    CHECK(a.per_example[i].id == b.per_example[i].id);
    CHECK(a.per_example[i].generated == b.per_example[i].generated);
  }
}

TEST_CASE("evaluate_cell skips prompts beyond the sequence cap") {
  // Prompts for three-letter animals are exactly 75 bytes; "carp" is 76.
  const Model m = testutil::zero_model(256, 8, 1, 1, 75);
  const Corpus corpus = testutil::toy_corpus(6);
  EvalOptions opts;
  opts.decode.max_new = 2;
  const CellResult cell = evaluate_cell(m, corpus, PromptOrder::QuestionFirst,
                                        MethodSpec::ne(), EmphasisTarget::None,
                                        opts);
  CHECK(cell.n == 5);
  CHECK(cell.n_skipped == 1);
  REQUIRE(cell.per_example.size() == 5);
  CHECK(cell.per_example.back().id == "t4");

  const Model tiny = testutil::zero_model(256, 8, 1, 1, 16);
  const CellResult none = evaluate_cell(tiny, corpus,
                                        PromptOrder::QuestionFirst,
                                        MethodSpec::ne(), EmphasisTarget::None,
                                        opts);
  CHECK(none.n == 0);
  CHECK(none.n_skipped == 6);
  CHECK(none.accuracy == 0.0);
  CHECK(none.mean_ppl == 0.0);
}

TEST_CASE("evaluate_cell rejects invalid method and target pairs") {
  const Model m = testutil::zero_model(256, 8, 1, 1, 128);
  const Corpus corpus = testutil::toy_corpus(2);
  const MarkerPair star = *find_builtin_marker("star");
  struct Case {
    MethodSpec method;
    EmphasisTarget target;
  };
  const Case cases[] = {
      {MethodSpec::ne(), EmphasisTarget::Question},
      {MethodSpec::mp(star), EmphasisTarget::None},
      {MethodSpec::as({{0, 0}}, 1e-3f), EmphasisTarget::None},
      {MethodSpec::as({{0, 0}}, 1e-3f), EmphasisTarget::QuestionAndContext},
  };
  for (const Case& c : cases) {
    try {
      evaluate_cell(m, corpus, PromptOrder::QuestionFirst, c.method, c.target);
      FAIL("expected an Error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::InvalidCombination);
    }
  }
}

TEST_CASE("partition_knowledge splits by closed-book correctness") {
  const Corpus corpus = easy_corpus();

  const KnowledgePartition all_known =
      partition_knowledge(testutil::const_token_model(256, 'a'), corpus);
  CHECK(all_known.known_ids.size() == 3);
  CHECK(all_known.unknown_ids.empty());

  const KnowledgePartition none =
      partition_knowledge(testutil::zero_model(256), corpus);
  CHECK(none.known_ids.empty());
  CHECK(none.unknown_ids.size() == 3);

  // Disjoint and complete over the corpus ids.
  for (const RcExample& ex : corpus.examples) {
    const bool in_known = all_known.known_ids.contains(ex.id);
    const bool in_unknown = all_known.unknown_ids.contains(ex.id);
    CHECK(in_known != in_unknown);
  }
}

TEST_CASE("too-long closed-book prompts stay unknown") {
  Model m = testutil::zero_model(256, 8, 1, 1, 16);
  m.ln_f_weight.assign(8, 0.0f);
  m.ln_f_bias[0] = 1.0f;
  m.lm_head['a'] = 1.0f;
  // The model would answer correctly, but the prompt does not fit.
  const Corpus corpus = testutil::toy_corpus(3);
  const KnowledgePartition part = partition_knowledge(m, corpus);
  CHECK(part.known_ids.empty());
  CHECK(part.unknown_ids.size() == 3);
}

TEST_CASE("knowledge_split_report renders aligned rows with n=0 markers") {
  std::vector<KnowledgeSplitRow> rows(2);
  rows[0] = {"m", "d1", 0.5, 10, 5, 5, 0.2, 0.4, 0.1, 0.3};
  rows[1] = {"m", "d2", 0.0, 4, 0, 4, 0.0, 0.0, 0.25, 0.5};
  const std::string report = knowledge_split_report(rows);
  CHECK(report.find("model") != std::string::npos);
  CHECK(report.find("unknown_em") != std::string::npos);
  CHECK(report.find("0.5000") != std::string::npos);
  CHECK(report.find("0.2500") != std::string::npos);
  CHECK(report.find("n=0") != std::string::npos);
  // No trailing spaces on any line.
  std::size_t pos = 0;
  while (pos < report.size()) {
    const std::size_t nl = report.find('\n', pos);
    REQUIRE(nl != std::string::npos);
    CHECK(report[nl - 1] != ' ');
    pos = nl + 1;
  }
}
