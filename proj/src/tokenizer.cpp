#include "strkit/tokenizer.hpp"

#include <limits>
#include <map>

#include "strkit/error.hpp"

namespace strkit {

Tokenizer::Tokenizer(std::vector<std::pair<int, int>> merges)
    : merges_(std::move(merges)) {
  build_vocab();
}

void Tokenizer::build_vocab() {
  vocab_.clear();
  vocab_.reserve(256 + merges_.size());
  for (int b = 0; b < 256; ++b)
    vocab_.emplace_back(1, static_cast<char>(b));
  for (std::size_t i = 0; i < merges_.size(); ++i) {
    auto [left, right] = merges_[i];
    int next_id = static_cast<int>(256 + i);
    if (left < 0 || right < 0 || left >= next_id || right >= next_id)
      throw Error(ErrorKind::FormatError,
                  "merge " + std::to_string(i) + " references id out of range");
    vocab_.push_back(vocab_[left] + vocab_[right]);
  }
}

TokenizedText Tokenizer::tokenize(const std::string& text) const {
  struct Piece {
    int id;
    std::size_t start, end;
  };
  std::vector<Piece> pieces;
  pieces.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i)
    pieces.push_back({static_cast<int>(static_cast<unsigned char>(text[i])),
                      i, i + 1});

  if (!merges_.empty() && pieces.size() > 1) {
    std::map<std::pair<int, int>, int> rank;
    for (std::size_t i = 0; i < merges_.size(); ++i)
      rank.emplace(merges_[i], static_cast<int>(i));

    // Classic BPE: fuse the lowest-ranked adjacent pair until none applies.
    for (;;) {
      int best = std::numeric_limits<int>::max();
      for (std::size_t i = 0; i + 1 < pieces.size(); ++i) {
        auto it = rank.find({pieces[i].id, pieces[i + 1].id});
        if (it != rank.end() && it->second < best) best = it->second;
      }
      if (best == std::numeric_limits<int>::max()) break;

      const auto [left, right] = merges_[best];
      const int merged_id = 256 + best;
      std::vector<Piece> next;
      next.reserve(pieces.size());
      for (std::size_t i = 0; i < pieces.size();) {
        if (i + 1 < pieces.size() && pieces[i].id == left &&
            pieces[i + 1].id == right) {
          next.push_back({merged_id, pieces[i].start, pieces[i + 1].end});
          i += 2;
        } else {
          next.push_back(pieces[i]);
          ++i;
        }
      }
      pieces.swap(next);
    }
  }

  TokenizedText tt;
  tt.text = text;
  tt.token_ids.reserve(pieces.size());
  tt.offsets.reserve(pieces.size());
  for (const Piece& p : pieces) {
    tt.token_ids.push_back(p.id);
    tt.offsets.push_back({p.start, p.end});
  }
  return tt;
}

std::string Tokenizer::detokenize(const std::vector<int>& token_ids) const {
  std::string out;
  for (int id : token_ids) {
    if (id < 0 || id >= vocab_size())
      throw Error(ErrorKind::UnknownTokenId, std::to_string(id));
    out += vocab_[static_cast<std::size_t>(id)];
  }
  return out;
}

TokenSpan Tokenizer::align_span(const TokenizedText& tt,
                                CharSpan char_span) const {
  const std::size_t text_len = tt.text.size();
  if (char_span.start > char_span.end || char_span.end > text_len)
    throw Error(ErrorKind::SpanOutOfRange,
                "[" + std::to_string(char_span.start) + ", " +
                    std::to_string(char_span.end) + ") in text of length " +
                    std::to_string(text_len));

  const std::size_t n = tt.size();
  if (char_span.empty()) {
    // (s, s) -> (k, k): k is the token holding byte s, or the sequence end.
    std::size_t k = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (tt.offsets[i].end > char_span.start) {
        k = i;
        break;
      }
    }
    return {k, k};
  }

  std::size_t first = n, last = n;
  for (std::size_t i = 0; i < n; ++i) {
    const CharSpan& off = tt.offsets[i];
    if (off.end > char_span.start && off.start < char_span.end) {
      if (first == n) first = i;
      last = i;
    }
  }
  if (first == n) return {n, n};  // unreachable for in-bounds non-empty spans
  return {first, last + 1};
}

}  // namespace strkit
