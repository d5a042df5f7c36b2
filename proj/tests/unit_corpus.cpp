#include <doctest.h>

#include <algorithm>
#include <functional>
#include <set>
#include <string>

#include "helpers.hpp"
#include "strkit/corpus.hpp"
#include "strkit/error.hpp"
#include "strkit/tokenizer.hpp"

using namespace strkit;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::IoError;
}

}  // namespace

TEST_CASE("load_jsonl reads records and ignores unknown fields") {
  const auto dir = testutil::temp_dir();
  const auto path = testutil::write_text(
      dir / "data.jsonl",
      "{\"id\": \"a\", \"question\": \"Q1?\", \"context\": \"C1.\", "
      "\"answers\": [\"x\"], \"extra\": 42}\n"
      "\r\n"
      "{\"id\": \"b\", \"answers\": [\"y\", \"z\"], \"question\": \"Q2?\", "
      "\"context\": \"C2.\"}\r\n");
  const Corpus corpus = load_jsonl(path.string());
  CHECK(corpus.name == "data");
  REQUIRE(corpus.size() == 2);
  CHECK(corpus.examples[0].id == "a");
  CHECK(corpus.examples[0].question == "Q1?");
  CHECK(corpus.examples[0].context == "C1.");
  CHECK(corpus.examples[1].gold_answers == std::vector<std::string>{"y", "z"});
}

TEST_CASE("load_jsonl rejects malformed lines with the line number") {
  const auto dir = testutil::temp_dir();
  const auto path = testutil::write_text(
      dir / "bad.jsonl",
      "{\"id\": \"a\", \"question\": \"Q?\", \"context\": \"C.\", "
      "\"answers\": [\"x\"]}\n"
      "not json\n");
  try {
    load_jsonl(path.string());
    FAIL("expected an Error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MalformedRecord);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("load_jsonl field validation") {
  const auto dir = testutil::temp_dir();
  auto check = [&](const std::string& line, ErrorKind want) {
    const auto path = testutil::write_text(dir / "case.jsonl", line);
    CHECK(kind_of([&] { load_jsonl(path.string()); }) == want);
  };
  check("{\"question\": \"Q?\", \"context\": \"C.\", \"answers\": [\"x\"]}\n",
        ErrorKind::MalformedRecord);  // missing id
  check("{\"id\": \"a\", \"question\": \"  \", \"context\": \"C.\", "
        "\"answers\": [\"x\"]}\n",
        ErrorKind::MalformedRecord);  // blank question
  check("{\"id\": \"a\", \"question\": \"Q?\", \"context\": \"C.\", "
        "\"answers\": []}\n",
        ErrorKind::MalformedRecord);  // no answers
  check("{\"id\": \"a\", \"question\": \"Q?\", \"context\": \"C.\", "
        "\"answers\": [3]}\n",
        ErrorKind::MalformedRecord);  // non-string answer
  check("{\"id\": \"a\", \"question\": \"Q?\", \"context\": \"C.\", "
        "\"answers\": [\"x\"]}\n"
        "{\"id\": \"a\", \"question\": \"Q?\", \"context\": \"C.\", "
        "\"answers\": [\"x\"]}\n",
        ErrorKind::DuplicateId);
}

TEST_CASE("split_validation halves deterministically and keeps order") {
  const Corpus corpus = testutil::toy_corpus(9);
  const auto [valid, test] = split_validation(corpus, {7});
  CHECK(valid.size() == 5);  // odd count: first half takes the extra
  CHECK(test.size() == 4);
  CHECK(valid.name == "toy.valid");
  CHECK(test.name == "toy.test");

  // Disjoint and complete.
  std::set<std::string> seen;
  for (const auto& ex : valid.examples) seen.insert(ex.id);
  for (const auto& ex : test.examples) seen.insert(ex.id);
  CHECK(seen.size() == 9);

  // Both halves preserve the corpus's relative order.
  auto index_of = [&](const std::string& id) {
    for (std::size_t i = 0; i < corpus.size(); ++i)
      if (corpus.examples[i].id == id) return i;
    return std::size_t(-1);
  };
  for (const Corpus* half : {&valid, &test})
    for (std::size_t i = 1; i < half->size(); ++i)
      CHECK(index_of(half->examples[i - 1].id) <
            index_of(half->examples[i].id));

  // Same seed reproduces; another seed picks a different half.
  const auto [valid2, test2] = split_validation(corpus, {7});
  REQUIRE(valid2.size() == valid.size());
  for (std::size_t i = 0; i < valid.size(); ++i)
    CHECK(valid2.examples[i].id == valid.examples[i].id);
  const auto [valid3, _] = split_validation(corpus, {8});
  bool same = valid3.size() == valid.size();
  if (same)
    for (std::size_t i = 0; i < valid.size(); ++i)
      same = same && valid3.examples[i].id == valid.examples[i].id;
  CHECK_FALSE(same);
}

TEST_CASE("split_validation rejects an empty corpus") {
  CHECK(kind_of([] { split_validation(Corpus{}, {0}); }) ==
        ErrorKind::EmptyCorpus);
}

TEST_CASE("filter_by_length drops examples whose prompts run long") {
  Corpus corpus = testutil::toy_corpus(3);
  corpus.examples[1].context = std::string(400, 'x');
  const Tokenizer tok;
  const Corpus kept = filter_by_length(corpus, tok, 80);
  REQUIRE(kept.size() == 2);
  CHECK(kept.examples[0].id == "t0");
  CHECK(kept.examples[1].id == "t2");
  CHECK(filter_by_length(corpus, tok, 1024).size() == 3);
}

TEST_CASE("sample_profiling_subset is deterministic and order-preserving") {
  const Corpus corpus = testutil::toy_corpus(10);
  const Corpus sub = sample_profiling_subset(corpus, 4, 11);
  REQUIRE(sub.size() == 4);
  auto index_of = [&](const std::string& id) {
    for (std::size_t i = 0; i < corpus.size(); ++i)
      if (corpus.examples[i].id == id) return i;
    return std::size_t(-1);
  };
  for (std::size_t i = 1; i < sub.size(); ++i)
    CHECK(index_of(sub.examples[i - 1].id) < index_of(sub.examples[i].id));

  const Corpus again = sample_profiling_subset(corpus, 4, 11);
  for (std::size_t i = 0; i < sub.size(); ++i)
    CHECK(again.examples[i].id == sub.examples[i].id);

  const Corpus all = sample_profiling_subset(corpus, 10, 11);
  CHECK(all.size() == 10);
  CHECK(kind_of([&] { sample_profiling_subset(corpus, 11, 0); }) ==
        ErrorKind::SubsetTooLarge);
}
