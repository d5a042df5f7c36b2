#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace strkit {

/// Half-open byte range [start, end) into the UTF-8 text. All "character"
/// offsets in this toolkit are byte offsets into the UTF-8 encoding.
struct CharSpan {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - start; }
  bool empty() const { return start == end; }
  friend bool operator==(const CharSpan&, const CharSpan&) = default;
};

/// Half-open token-index range [start, end).
struct TokenSpan {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - start; }
  bool empty() const { return start == end; }
  friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
};

/// A tokenization together with one byte range per token. Ranges are
/// contiguous and strictly increasing; concatenating them reconstructs the
/// text exactly.
struct TokenizedText {
  std::string text;
  std::vector<int> token_ids;
  std::vector<CharSpan> offsets;

  std::size_t size() const { return token_ids.size(); }
};

/// Byte-level tokenizer: a fixed 256-entry base vocabulary (one id per byte)
/// plus an optional ordered merge table. Merge i fuses an adjacent id pair
/// into id 256 + i. With no merges, tokenization is one token per byte.
///
/// Lossless by construction: detokenize(tokenize(s)) == s for any s.
class Tokenizer {
 public:
  Tokenizer() { build_vocab(); }
  explicit Tokenizer(std::vector<std::pair<int, int>> merges);

  TokenizedText tokenize(const std::string& text) const;
  std::string detokenize(const std::vector<int>& token_ids) const;

  /// Minimal token span covering every token whose byte range intersects
  /// char_span (cover semantics: may expand to token boundaries, never
  /// truncates). An empty char span (s, s) maps to the empty token span
  /// (k, k) where k is the token containing byte s, or the sequence end.
  TokenSpan align_span(const TokenizedText& tt, CharSpan char_span) const;

  int vocab_size() const { return static_cast<int>(vocab_.size()); }
  const std::vector<std::pair<int, int>>& merges() const { return merges_; }

 private:
  void build_vocab();

  std::vector<std::pair<int, int>> merges_;
  std::vector<std::string> vocab_;  // id -> byte string
};

}  // namespace strkit
