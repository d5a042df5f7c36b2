#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "strkit/corpus.hpp"
#include "strkit/error.hpp"
#include "strkit/metrics.hpp"
#include "strkit/model.hpp"
#include "strkit/profiling.hpp"
#include "strkit/prompting.hpp"
#include "strkit/steering.hpp"
#include "strkit/tokenizer.hpp"

namespace py = pybind11;
using namespace strkit;

namespace {

std::set<HeadId> to_heads(const std::vector<std::pair<int, int>>& pairs) {
  std::set<HeadId> heads;
  for (const auto& [l, h] : pairs) heads.insert({l, h});
  return heads;
}

SteeringConfig make_steering(const std::vector<std::pair<int, int>>& heads,
                             float alpha, std::pair<std::size_t, std::size_t> segment) {
  SteeringConfig cfg;
  cfg.heads = to_heads(heads);
  cfg.alpha = alpha;
  cfg.segment = {segment.first, segment.second};
  return cfg;
}

py::array_t<float> logits_array(const ForwardOutput& out) {
  py::array_t<float> arr({out.seq_len, out.vocab_size});
  std::copy(out.logits.begin(), out.logits.end(), arr.mutable_data());
  return arr;
}

}  // namespace

PYBIND11_MODULE(_strkit, m) {
  m.doc() = "prompt ordering and emphasis toolkit";

  py::register_exception<Error>(m, "StrkitError");

  py::class_<CharSpan>(m, "CharSpan")
      .def(py::init<std::size_t, std::size_t>(), py::arg("start"), py::arg("end"))
      .def_readwrite("start", &CharSpan::start)
      .def_readwrite("end", &CharSpan::end)
      .def("__len__", &CharSpan::length)
      .def("__eq__", [](const CharSpan& a, const CharSpan& b) { return a == b; })
      .def("__repr__", [](const CharSpan& s) {
        return "CharSpan(" + std::to_string(s.start) + ", " +
               std::to_string(s.end) + ")";
      });

  py::class_<TokenSpan>(m, "TokenSpan")
      .def(py::init<std::size_t, std::size_t>(), py::arg("start"), py::arg("end"))
      .def_readwrite("start", &TokenSpan::start)
      .def_readwrite("end", &TokenSpan::end)
      .def("__len__", &TokenSpan::length)
      .def("__eq__", [](const TokenSpan& a, const TokenSpan& b) { return a == b; })
      .def("__repr__", [](const TokenSpan& s) {
        return "TokenSpan(" + std::to_string(s.start) + ", " +
               std::to_string(s.end) + ")";
      });

  py::class_<TokenizedText>(m, "TokenizedText")
      .def_readonly("text", &TokenizedText::text)
      .def_readonly("token_ids", &TokenizedText::token_ids)
      .def_readonly("offsets", &TokenizedText::offsets)
      .def("__len__", &TokenizedText::size);

  py::class_<Tokenizer>(m, "Tokenizer")
      .def(py::init<>())
      .def(py::init<std::vector<std::pair<int, int>>>(), py::arg("merges"))
      .def("tokenize", &Tokenizer::tokenize, py::arg("text"))
      .def("detokenize",
           [](const Tokenizer& t, const std::vector<int>& ids) {
             return py::bytes(t.detokenize(ids));
           },
           py::arg("token_ids"))
      .def("detokenize_text", &Tokenizer::detokenize, py::arg("token_ids"))
      .def("align_span", &Tokenizer::align_span, py::arg("tokenized"),
           py::arg("char_span"))
      .def_property_readonly("vocab_size", &Tokenizer::vocab_size)
      .def_property_readonly("merges", &Tokenizer::merges);

  py::enum_<PromptOrder>(m, "PromptOrder")
      .value("QUESTION_FIRST", PromptOrder::QuestionFirst)
      .value("CONTEXT_FIRST", PromptOrder::ContextFirst);

  py::enum_<EmphasisTarget>(m, "EmphasisTarget")
      .value("NONE", EmphasisTarget::None)
      .value("QUESTION", EmphasisTarget::Question)
      .value("CONTEXT", EmphasisTarget::Context)
      .value("QUESTION_AND_CONTEXT", EmphasisTarget::QuestionAndContext);

  py::enum_<SpanKind>(m, "SpanKind")
      .value("QUESTION", SpanKind::Question)
      .value("CONTEXT", SpanKind::Context);

  py::class_<MarkerPair>(m, "MarkerPair")
      .def(py::init([](std::string name, std::string open, std::string close) {
             return MarkerPair{std::move(name), std::move(open),
                               std::move(close)};
           }),
           py::arg("name"), py::arg("open"), py::arg("close"))
      .def_readonly("name", &MarkerPair::name)
      .def_readonly("open", &MarkerPair::open)
      .def_readonly("close", &MarkerPair::close);

  m.def("builtin_markers", &builtin_markers);
  m.def("find_builtin_marker", &find_builtin_marker, py::arg("name"));

  py::class_<RcExample>(m, "RcExample")
      .def(py::init([](std::string id, std::string question, std::string context,
                       std::vector<std::string> answers) {
             return RcExample{std::move(id), std::move(question),
                              std::move(context), std::move(answers)};
           }),
           py::arg("id"), py::arg("question"), py::arg("context"),
           py::arg("answers"))
      .def_readonly("id", &RcExample::id)
      .def_readonly("question", &RcExample::question)
      .def_readonly("context", &RcExample::context)
      .def_readonly("answers", &RcExample::gold_answers);

  py::class_<Corpus>(m, "Corpus")
      .def_readonly("name", &Corpus::name)
      .def_readonly("examples", &Corpus::examples)
      .def("__len__", &Corpus::size);

  m.def("load_jsonl", &load_jsonl, py::arg("path"));

  py::class_<RenderedPrompt>(m, "RenderedPrompt")
      .def_readonly("text", &RenderedPrompt::text)
      .def_readonly("question_char_span", &RenderedPrompt::question_char_span)
      .def_readonly("context_char_span", &RenderedPrompt::context_char_span)
      .def_readonly("emphasized_char_spans",
                    &RenderedPrompt::emphasized_char_spans)
      .def_readonly("order", &RenderedPrompt::order)
      .def_readonly("target", &RenderedPrompt::target)
      .def_readonly("marker_collision", &RenderedPrompt::marker_collision);

  m.def("render", &render, py::arg("example"), py::arg("order"));
  m.def("apply_markers", &apply_markers, py::arg("prompt"), py::arg("target"),
        py::arg("marker"));
  m.def("closed_book_render", &closed_book_render, py::arg("example"));
  m.def("emphasized_token_span", &emphasized_token_span, py::arg("prompt"),
        py::arg("tokenized"), py::arg("which"), py::arg("tokenizer"),
        py::arg("include_markers") = true);

  m.def(
      "steer_attention_row",
      [](const std::vector<float>& row, const std::vector<bool>& mask,
         float alpha) {
        std::vector<std::uint8_t> m8(mask.begin(), mask.end());
        bool degenerate = false;
        std::vector<float> out = steer_attention_row(row, m8, alpha, &degenerate);
        return py::make_tuple(out, degenerate);
      },
      py::arg("row"), py::arg("segment_mask"), py::arg("alpha"),
      "Returns (steered_row, degenerate).");

  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("n_layers", &ModelConfig::n_layers)
      .def_readwrite("n_heads", &ModelConfig::n_heads)
      .def_readwrite("d_model", &ModelConfig::d_model)
      .def_readwrite("vocab_size", &ModelConfig::vocab_size)
      .def_readwrite("max_seq_len", &ModelConfig::max_seq_len)
      .def_readwrite("seed", &ModelConfig::seed);

  py::class_<Model>(m, "Model")
      .def_property_readonly("config",
                             [](const Model& m_) { return m_.config; })
      .def_property_readonly("merges",
                             [](const Model& m_) { return m_.merges; });

  m.def("init_random", &init_random, py::arg("config"));
  m.def("save_weights", &save_weights, py::arg("model"), py::arg("path"));
  m.def("load_weights", &load_weights, py::arg("path"));

  m.def(
      "forward",
      [](const Model& model, const std::vector<int>& tokens,
         const std::vector<std::pair<int, int>>& heads, float alpha,
         std::pair<std::size_t, std::size_t> segment, bool capture_attn) {
        SteeringConfig cfg = make_steering(heads, alpha, segment);
        const ForwardOutput out = forward(
            model, tokens, heads.empty() ? nullptr : &cfg, capture_attn);
        py::dict d;
        d["logits"] = logits_array(out);
        if (out.attentions) {
          py::array_t<float> attn(
              {out.n_layers, out.n_heads, out.seq_len, out.seq_len});
          std::copy(out.attentions->begin(), out.attentions->end(),
                    attn.mutable_data());
          d["attentions"] = attn;
        } else {
          d["attentions"] = py::none();
        }
        d["degenerate_rows"] = out.degenerate_rows;
        return d;
      },
      py::arg("model"), py::arg("tokens"),
      py::arg("heads") = std::vector<std::pair<int, int>>{},
      py::arg("alpha") = 1e-3f,
      py::arg("segment") = std::pair<std::size_t, std::size_t>{0, 0},
      py::arg("capture_attn") = false);

  m.def(
      "generate_greedy",
      [](const Model& model, const std::vector<int>& prompt, int max_new,
         bool stop_on_newline, const std::vector<std::pair<int, int>>& heads,
         float alpha, std::pair<std::size_t, std::size_t> segment) {
        SteeringConfig cfg = make_steering(heads, alpha, segment);
        return generate_greedy(model, prompt, {max_new, stop_on_newline},
                               heads.empty() ? nullptr : &cfg);
      },
      py::arg("model"), py::arg("prompt_tokens"), py::arg("max_new") = 32,
      py::arg("stop_on_newline") = true,
      py::arg("heads") = std::vector<std::pair<int, int>>{},
      py::arg("alpha") = 1e-3f,
      py::arg("segment") = std::pair<std::size_t, std::size_t>{0, 0});

  m.def("sequence_logprobs",
        [](const Model& model, const std::vector<int>& tokens) {
          return sequence_logprobs(model, tokens);
        },
        py::arg("model"), py::arg("tokens"));

  m.def("normalize_for_match", &normalize_for_match, py::arg("text"));
  m.def("contains_accuracy", &contains_accuracy, py::arg("gold_answers"),
        py::arg("generated"), py::arg("normalize") = true);
  m.def("perplexity", &perplexity, py::arg("logprobs"));

  m.def(
      "topk_intersection",
      [](const std::vector<std::map<std::pair<int, int>, double>>& maps, int k,
         int n_layers, int n_heads) {
        std::vector<HeadScoreMap> score_maps;
        for (std::size_t i = 0; i < maps.size(); ++i) {
          HeadScoreMap sm;
          sm.dataset_name = "d" + std::to_string(i);
          for (const auto& [head, acc] : maps[i])
            sm.scores[{head.first, head.second}] = acc;
          score_maps.push_back(std::move(sm));
        }
        const std::set<HeadId> heads =
            topk_intersection(score_maps, k, n_layers, n_heads);
        std::vector<std::pair<int, int>> out;
        for (const HeadId& h : heads) out.emplace_back(h.layer, h.head);
        return out;
      },
      py::arg("score_maps"), py::arg("k"), py::arg("n_layers"),
      py::arg("n_heads"));

  m.def("segment_attention_mass", &segment_attention_mass, py::arg("attentions"),
        py::arg("n_layers"), py::arg("n_heads"), py::arg("seq_len"),
        py::arg("span"));
}
