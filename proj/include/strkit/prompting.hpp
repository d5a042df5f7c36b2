#pragma once

#include <optional>
#include <string>
#include <vector>

#include "strkit/corpus.hpp"
#include "strkit/tokenizer.hpp"

namespace strkit {

enum class PromptOrder { QuestionFirst, ContextFirst };

enum class EmphasisTarget { None, Question, Context, QuestionAndContext };

const char* to_string(PromptOrder order);
const char* to_string(EmphasisTarget target);

/// Open/close strings wrapped around an emphasized substring.
struct MarkerPair {
  std::string name;
  std::string open;
  std::string close;
};

/// The four built-in marker pairs: star (*...*), quote (curly double
/// quotes), emphasize (<emphasize>...<\emphasize>), mark (<mark>...<\mark>).
const std::vector<MarkerPair>& builtin_markers();

/// Looks up a built-in marker pair by name; returns nullopt when unknown.
std::optional<MarkerPair> find_builtin_marker(const std::string& name);

/// A fully rendered prompt with byte spans for the question and context
/// substrings. After emphasis, the question/context spans include the
/// wrapping markers and emphasized_char_spans lists each wrapped region.
/// context_char_span is absent for closed-book prompts.
struct RenderedPrompt {
  std::string text;
  CharSpan question_char_span;
  std::optional<CharSpan> context_char_span;
  std::vector<CharSpan> emphasized_char_spans;
  PromptOrder order = PromptOrder::QuestionFirst;
  EmphasisTarget target = EmphasisTarget::None;
  std::optional<MarkerPair> marker;
  // The wrapped text already contained the marker strings; spans stay exact
  // but the model-facing emphasis boundary is ambiguous. Not an error.
  bool marker_collision = false;
};

/// "Question: <q> Context: <c>" or "Context: <c> Question: <q>", one ASCII
/// space between segments, labels excluded from the recorded spans.
RenderedPrompt render(const RcExample& example, PromptOrder order);

/// Wraps the question, the context, or both with the marker pair, no
/// whitespace inserted between markers and the wrapped text. All spans are
/// recomputed; each emphasized span includes its markers.
RenderedPrompt apply_markers(const RenderedPrompt& rp, EmphasisTarget target,
                             const MarkerPair& marker);

/// "Question: <q>" with no context segment.
RenderedPrompt closed_book_render(const RcExample& example);

enum class SpanKind { Question, Context };

/// Token span of the question or context substring of rp under tt
/// (markers included when present unless include_markers is false).
/// Cover semantics via Tokenizer::align_span. The combined Q+C region is
/// intentionally not addressable here; callers steer one substring.
TokenSpan emphasized_token_span(const RenderedPrompt& rp,
                                const TokenizedText& tt, SpanKind which,
                                const Tokenizer& tokenizer,
                                bool include_markers = true);

}  // namespace strkit
