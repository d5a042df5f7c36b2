#include "strkit/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <mutex>
#include <thread>

#include "strkit/error.hpp"
#include "strkit/tokenizer.hpp"

namespace strkit {

namespace {

struct FoldEntry {
  std::uint32_t cp;
  const char* folded;  // UTF-8 of the full case-fold
};

constexpr FoldEntry kFoldTable[] = {
#include "casefold_table.inc"
};

const char* lookup_fold(std::uint32_t cp) {
  const FoldEntry* end = kFoldTable + std::size(kFoldTable);
  const FoldEntry* it = std::lower_bound(
      kFoldTable, end, cp,
      [](const FoldEntry& e, std::uint32_t c) { return e.cp < c; });
  return (it != end && it->cp == cp) ? it->folded : nullptr;
}

bool is_space_cp(std::uint32_t cp) {
  return (cp >= 0x09 && cp <= 0x0d) || (cp >= 0x1c && cp <= 0x1f) ||
         cp == 0x20 || cp == 0x85 || cp == 0xa0 || cp == 0x1680 ||
         (cp >= 0x2000 && cp <= 0x200a) || cp == 0x2028 || cp == 0x2029 ||
         cp == 0x202f || cp == 0x205f || cp == 0x3000;
}

// Decodes one UTF-8 codepoint at i; on malformed input consumes a single
// byte and reports it as-is (cp = byte value, malformed = true).
std::uint32_t decode_utf8(const std::string& s, std::size_t& i, bool& malformed) {
  malformed = false;
  const unsigned char b0 = static_cast<unsigned char>(s[i]);
  int len;
  std::uint32_t cp;
  if (b0 < 0x80) {
    ++i;
    return b0;
  } else if ((b0 >> 5) == 0x6) {
    len = 2;
    cp = b0 & 0x1f;
  } else if ((b0 >> 4) == 0xe) {
    len = 3;
    cp = b0 & 0x0f;
  } else if ((b0 >> 3) == 0x1e) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    malformed = true;
    ++i;
    return b0;
  }
  if (i + len > s.size()) {
    malformed = true;
    ++i;
    return b0;
  }
  for (int k = 1; k < len; ++k) {
    const unsigned char bk = static_cast<unsigned char>(s[i + k]);
    if ((bk >> 6) != 0x2) {
      malformed = true;
      ++i;
      return b0;
    }
    cp = (cp << 6) | (bk & 0x3f);
  }
  i += len;
  return cp;
}

void encode_utf8(std::uint32_t cp, std::string& out) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xc0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3f));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xe0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3f));
    out += static_cast<char>(0x80 | (cp & 0x3f));
  } else {
    out += static_cast<char>(0xf0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3f));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3f));
    out += static_cast<char>(0x80 | (cp & 0x3f));
  }
}

// Work-stealing by index; slot writes keep results independent of the
// worker count and interleaving.
void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t)>& body) {
  threads = std::max(1, threads);
  if (threads == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr err;
  std::mutex err_mu;
  auto work = [&] {
    while (!failed.load(std::memory_order_relaxed)) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) break;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!err) err = std::current_exception();
        failed = true;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads - 1);
  for (int t = 0; t < threads - 1; ++t) pool.emplace_back(work);
  work();
  for (std::thread& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace

std::string normalize_for_match(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  std::size_t i = 0;
  while (i < text.size()) {
    bool malformed = false;
    const std::uint32_t cp = decode_utf8(text, i, malformed);
    if (malformed) {
      if (pending_space && !out.empty()) out += ' ';
      pending_space = false;
      out += static_cast<char>(cp);
      continue;
    }
    if (is_space_cp(cp)) {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out += ' ';
    pending_space = false;
    if (const char* folded = lookup_fold(cp))
      out += folded;
    else
      encode_utf8(cp, out);
  }
  return out;
}

bool contains_accuracy(const std::vector<std::string>& gold_answers,
                       const std::string& generated, bool normalize) {
  const std::string hay = normalize ? normalize_for_match(generated) : generated;
  for (const std::string& gold : gold_answers) {
    const std::string needle = normalize ? normalize_for_match(gold) : gold;
    if (hay.find(needle) != std::string::npos) return true;
  }
  return false;
}

double perplexity(const std::vector<double>& logprobs) {
  if (logprobs.empty())
    throw Error(ErrorKind::EmptyInput, "perplexity of an empty sequence");
  double sum = 0.0;
  for (double lp : logprobs) sum += lp;
  return std::exp(-sum / static_cast<double>(logprobs.size()));
}

MethodSpec MethodSpec::ne() { return {}; }

MethodSpec MethodSpec::mp(MarkerPair marker) {
  MethodSpec m;
  m.kind = Kind::MarkedPrompting;
  m.marker = std::move(marker);
  return m;
}

MethodSpec MethodSpec::as(std::set<HeadId> heads, float alpha) {
  MethodSpec m;
  m.kind = Kind::AttentionSteering;
  m.heads = std::move(heads);
  m.alpha = alpha;
  return m;
}

std::string MethodSpec::label() const {
  switch (kind) {
    case Kind::NoEmphasis:
      return "NE";
    case Kind::MarkedPrompting:
      return "MP-" + marker.name;
    case Kind::AttentionSteering:
      return "AS";
  }
  return "?";
}

namespace {

void check_combination(const MethodSpec& method, EmphasisTarget target) {
  switch (method.kind) {
    case MethodSpec::Kind::NoEmphasis:
      if (target != EmphasisTarget::None)
        throw Error(ErrorKind::InvalidCombination,
                    "no-emphasis cells take no target");
      break;
    case MethodSpec::Kind::MarkedPrompting:
      if (target == EmphasisTarget::None)
        throw Error(ErrorKind::InvalidCombination,
                    "marked prompting needs a target");
      break;
    case MethodSpec::Kind::AttentionSteering:
      if (target != EmphasisTarget::Question && target != EmphasisTarget::Context)
        throw Error(ErrorKind::InvalidCombination,
                    "attention steering targets a single span (q or c)");
      break;
  }
}

struct Slot {
  bool skipped = false;
  bool correct = false;
  bool marker_collision = false;
  std::string generated;
  double ppl = 0.0;
  bool has_ppl = false;
};

}  // namespace

CellResult evaluate_cell(const Model& model, const Corpus& corpus,
                         PromptOrder order, const MethodSpec& method,
                         EmphasisTarget target, const EvalOptions& options) {
  check_combination(method, target);
  const Tokenizer tokenizer(model.merges);

  std::vector<Slot> slots(corpus.examples.size());
  parallel_for(corpus.examples.size(), options.threads, [&](std::size_t i) {
    const RcExample& ex = corpus.examples[i];
    Slot& slot = slots[i];

    RenderedPrompt rp = render(ex, order);
    if (method.kind == MethodSpec::Kind::MarkedPrompting) {
      rp = apply_markers(rp, target, method.marker);
      slot.marker_collision = rp.marker_collision;
    }

    const TokenizedText tt = tokenizer.tokenize(rp.text);
    if (static_cast<int>(tt.token_ids.size()) > model.config.max_seq_len) {
      slot.skipped = true;
      return;
    }

    SteeringConfig steer;
    const SteeringConfig* steer_ptr = nullptr;
    if (method.kind == MethodSpec::Kind::AttentionSteering) {
      steer.heads = method.heads;
      steer.alpha = method.alpha;
      steer.segment = emphasized_token_span(
          rp, tt,
          target == EmphasisTarget::Question ? SpanKind::Question
                                             : SpanKind::Context,
          tokenizer, options.include_marker_tokens);
      steer_ptr = &steer;
    }

    const std::vector<int> generated =
        generate_greedy(model, tt.token_ids, options.decode, steer_ptr);
    slot.generated = tokenizer.detokenize(generated);
    slot.correct =
        contains_accuracy(ex.gold_answers, slot.generated, options.normalize);

    const std::vector<double> lps = sequence_logprobs(model, tt.token_ids);
    if (!lps.empty()) {
      slot.ppl = perplexity(lps);
      slot.has_ppl = true;
    }
  });

  CellResult cell;
  cell.order = order;
  cell.method = method.label();
  cell.target = target;
  std::size_t correct = 0, with_ppl = 0;
  double ppl_sum = 0.0;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].marker_collision) ++cell.n_marker_collisions;
    if (slots[i].skipped) {
      ++cell.n_skipped;
      continue;
    }
    ++cell.n;
    if (slots[i].correct) ++correct;
    if (slots[i].has_ppl) {
      ppl_sum += slots[i].ppl;
      ++with_ppl;
    }
    cell.per_example.push_back(
        {corpus.examples[i].id, slots[i].correct, std::move(slots[i].generated)});
  }
  if (cell.n > 0) cell.accuracy = static_cast<double>(correct) / cell.n;
  if (with_ppl > 0) cell.mean_ppl = ppl_sum / with_ppl;
  return cell;
}

KnowledgePartition partition_knowledge(const Model& model, const Corpus& corpus,
                                       const EvalOptions& options) {
  const Tokenizer tokenizer(model.merges);
  std::vector<std::uint8_t> known(corpus.examples.size(), 0);
  parallel_for(corpus.examples.size(), options.threads, [&](std::size_t i) {
    const RcExample& ex = corpus.examples[i];
    const RenderedPrompt rp = closed_book_render(ex);
    const TokenizedText tt = tokenizer.tokenize(rp.text);
    if (static_cast<int>(tt.token_ids.size()) > model.config.max_seq_len)
      return;  // cannot demonstrate knowledge, stays unknown
    const std::vector<int> generated =
        generate_greedy(model, tt.token_ids, options.decode, nullptr);
    known[i] = contains_accuracy(ex.gold_answers, tokenizer.detokenize(generated),
                                 options.normalize);
  });

  KnowledgePartition part;
  for (std::size_t i = 0; i < corpus.examples.size(); ++i) {
    if (known[i])
      part.known_ids.insert(corpus.examples[i].id);
    else
      part.unknown_ids.insert(corpus.examples[i].id);
  }
  return part;
}

std::string knowledge_split_report(const std::vector<KnowledgeSplitRow>& rows) {
  const std::vector<std::string> headers = {
      "model",    "dataset",  "knowledge", "n_known",    "n_unknown",
      "known_ne", "known_em", "unknown_ne", "unknown_em"};

  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return std::string(buf);
  };

  std::vector<std::vector<std::string>> cells;
  for (const KnowledgeSplitRow& r : rows) {
    const bool has_known = r.n_known > 0;
    const bool has_unknown = r.n_unknown > 0;
    cells.push_back({r.model, r.dataset, fmt(r.knowledge_amount),
                     std::to_string(r.n_known), std::to_string(r.n_unknown),
                     has_known ? fmt(r.known_no_emphasis) : "n=0",
                     has_known ? fmt(r.known_emphasis) : "n=0",
                     has_unknown ? fmt(r.unknown_no_emphasis) : "n=0",
                     has_unknown ? fmt(r.unknown_emphasis) : "n=0"});
  }

  std::vector<std::size_t> width(headers.size());
  for (std::size_t c = 0; c < headers.size(); ++c) {
    width[c] = headers[c].size();
    for (const auto& row : cells) width[c] = std::max(width[c], row[c].size());
  }

  std::string out;
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += "  ";
      out += row[c];
      out.append(width[c] - row[c].size(), ' ');
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    out += '\n';
  };
  emit(headers);
  for (const auto& row : cells) emit(row);
  return out;
}

}  // namespace strkit
