#include "strkit/prompting.hpp"

#include <string_view>

#include "strkit/error.hpp"

namespace strkit {

namespace {

constexpr std::string_view kQuestionLabel = "Question: ";
constexpr std::string_view kContextLabel = "Context: ";

/// Appends "<label><open?><payload><close?>" and returns the span of
/// open+payload+close (labels are never part of the recorded span).
CharSpan append_segment(std::string& text, std::string_view label,
                        std::string_view payload, const MarkerPair* marker) {
  text.append(label);
  const std::size_t start = text.size();
  if (marker) text.append(marker->open);
  text.append(payload);
  if (marker) text.append(marker->close);
  return {start, text.size()};
}

RenderedPrompt render_open_book(std::string_view question,
                                std::string_view context, PromptOrder order,
                                EmphasisTarget target,
                                const std::optional<MarkerPair>& marker) {
  const bool wrap_q = target == EmphasisTarget::Question ||
                      target == EmphasisTarget::QuestionAndContext;
  const bool wrap_c = target == EmphasisTarget::Context ||
                      target == EmphasisTarget::QuestionAndContext;
  const MarkerPair* mq = wrap_q ? &*marker : nullptr;
  const MarkerPair* mc = wrap_c ? &*marker : nullptr;

  RenderedPrompt rp;
  rp.order = order;
  rp.target = target;
  rp.marker = marker;

  if (order == PromptOrder::QuestionFirst) {
    rp.question_char_span = append_segment(rp.text, kQuestionLabel, question, mq);
    rp.text += ' ';
    rp.context_char_span = append_segment(rp.text, kContextLabel, context, mc);
  } else {
    rp.context_char_span = append_segment(rp.text, kContextLabel, context, mc);
    rp.text += ' ';
    rp.question_char_span = append_segment(rp.text, kQuestionLabel, question, mq);
  }

  if (wrap_q && wrap_c) {
    // In text order, disjoint by construction.
    if (order == PromptOrder::QuestionFirst)
      rp.emphasized_char_spans = {rp.question_char_span, *rp.context_char_span};
    else
      rp.emphasized_char_spans = {*rp.context_char_span, rp.question_char_span};
  } else if (wrap_q) {
    rp.emphasized_char_spans = {rp.question_char_span};
  } else if (wrap_c) {
    rp.emphasized_char_spans = {*rp.context_char_span};
  }
  return rp;
}

}  // namespace

const char* to_string(PromptOrder order) {
  return order == PromptOrder::QuestionFirst ? "question_first"
                                             : "context_first";
}

const char* to_string(EmphasisTarget target) {
  switch (target) {
    case EmphasisTarget::None:
      return "none";
    case EmphasisTarget::Question:
      return "q";
    case EmphasisTarget::Context:
      return "c";
    case EmphasisTarget::QuestionAndContext:
      return "q+c";
  }
  return "?";
}

const std::vector<MarkerPair>& builtin_markers() {
  static const std::vector<MarkerPair> markers = {
      {"star", "*", "*"},
      {"quote", "\xe2\x80\x9c", "\xe2\x80\x9d"},  // curly double quotes
      {"emphasize", "<emphasize>", "<\\emphasize>"},
      {"mark", "<mark>", "<\\mark>"},
  };
  return markers;
}

std::optional<MarkerPair> find_builtin_marker(const std::string& name) {
  for (const MarkerPair& m : builtin_markers())
    if (m.name == name) return m;
  return std::nullopt;
}

RenderedPrompt render(const RcExample& example, PromptOrder order) {
  return render_open_book(example.question, example.context, order,
                          EmphasisTarget::None, std::nullopt);
}

RenderedPrompt apply_markers(const RenderedPrompt& rp, EmphasisTarget target,
                             const MarkerPair& marker) {
  if (rp.target != EmphasisTarget::None)
    throw Error(ErrorKind::AlreadyEmphasized,
                "prompt already emphasizes " + std::string(to_string(rp.target)));
  if (target == EmphasisTarget::None)
    throw Error(ErrorKind::InvalidTarget, "target must name a substring");
  if (marker.open.empty() || marker.close.empty())
    throw Error(ErrorKind::InvalidTarget,
                "marker \"" + marker.name + "\" has an empty open/close string");

  const std::string question(rp.text.substr(rp.question_char_span.start,
                                            rp.question_char_span.length()));

  const auto contains_marker = [&](const std::string& payload) {
    return payload.find(marker.open) != std::string::npos ||
           payload.find(marker.close) != std::string::npos;
  };
  const bool wrap_q = target != EmphasisTarget::Context;
  const bool wrap_c = target != EmphasisTarget::Question;

  if (!rp.context_char_span) {
    // Closed-book prompt: only the question exists to wrap.
    if (target != EmphasisTarget::Question)
      throw Error(ErrorKind::SpanMissing, "closed-book prompt has no context");
    RenderedPrompt out;
    out.order = rp.order;
    out.target = target;
    out.marker = marker;
    out.question_char_span =
        append_segment(out.text, kQuestionLabel, question, &marker);
    out.emphasized_char_spans = {out.question_char_span};
    out.marker_collision = contains_marker(question);
    return out;
  }

  const std::string context(rp.text.substr(rp.context_char_span->start,
                                           rp.context_char_span->length()));
  RenderedPrompt out = render_open_book(question, context, rp.order, target, marker);
  out.marker_collision = (wrap_q && contains_marker(question)) ||
                         (wrap_c && contains_marker(context));
  return out;
}

RenderedPrompt closed_book_render(const RcExample& example) {
  RenderedPrompt rp;
  rp.question_char_span =
      append_segment(rp.text, kQuestionLabel, example.question, nullptr);
  return rp;
}

TokenSpan emphasized_token_span(const RenderedPrompt& rp,
                                const TokenizedText& tt, SpanKind which,
                                const Tokenizer& tokenizer,
                                bool include_markers) {
  if (tt.text != rp.text)
    throw Error(ErrorKind::SpanOutOfRange,
                "tokenization does not cover this prompt text");

  CharSpan span;
  bool wrapped = false;
  if (which == SpanKind::Question) {
    span = rp.question_char_span;
    wrapped = rp.target == EmphasisTarget::Question ||
              rp.target == EmphasisTarget::QuestionAndContext;
  } else {
    if (!rp.context_char_span)
      throw Error(ErrorKind::SpanMissing, "prompt has no context span");
    span = *rp.context_char_span;
    wrapped = rp.target == EmphasisTarget::Context ||
              rp.target == EmphasisTarget::QuestionAndContext;
  }

  if (wrapped && !include_markers && rp.marker) {
    span.start += rp.marker->open.size();
    span.end -= rp.marker->close.size();
  }
  return tokenizer.align_span(tt, span);
}

}  // namespace strkit
