#include "strkit/harness.hpp"

#include <algorithm>
#include <cctype>
#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string_view>

#include <json.hpp>

#include "strkit/error.hpp"
#include "strkit/tokenizer.hpp"

namespace fs = std::filesystem;

namespace strkit {

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
  return buf;
}

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

struct ParseCtx {
  const std::string& path;
  int line = 0;
};

[[noreturn]] void fail(const ParseCtx& ctx, const std::string& msg) {
  throw Error(ErrorKind::InvalidConfig,
              ctx.path + ":" + std::to_string(ctx.line) + ": " + msg);
}

[[noreturn]] void fail_global(const std::string& path, const std::string& msg) {
  throw Error(ErrorKind::InvalidConfig, path + ": " + msg);
}

long long parse_int(const ParseCtx& ctx, const std::string& v) {
  std::size_t pos = 0;
  long long out = 0;
  try {
    out = std::stoll(v, &pos);
  } catch (const std::exception&) {
    fail(ctx, "expected an integer, got \"" + v + "\"");
  }
  if (pos != v.size()) fail(ctx, "trailing characters after integer \"" + v + "\"");
  return out;
}

std::uint64_t parse_u64(const ParseCtx& ctx, const std::string& v) {
  std::size_t pos = 0;
  std::uint64_t out = 0;
  try {
    out = std::stoull(v, &pos);
  } catch (const std::exception&) {
    fail(ctx, "expected an unsigned integer, got \"" + v + "\"");
  }
  if (pos != v.size())
    fail(ctx, "trailing characters after integer \"" + v + "\"");
  return out;
}

double parse_double(const ParseCtx& ctx, const std::string& v) {
  std::size_t pos = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    fail(ctx, "expected a number, got \"" + v + "\"");
  }
  if (pos != v.size()) fail(ctx, "trailing characters after number \"" + v + "\"");
  return out;
}

bool parse_bool(const ParseCtx& ctx, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail(ctx, "expected true/false, got \"" + v + "\"");
}

PromptOrder parse_order(const ParseCtx& ctx, const std::string& v) {
  if (v == "question_first") return PromptOrder::QuestionFirst;
  if (v == "context_first") return PromptOrder::ContextFirst;
  fail(ctx, "unknown order \"" + v + "\" (question_first or context_first)");
}

EmphasisTarget parse_target(const ParseCtx& ctx, const std::string& v,
                            bool allow_qc) {
  if (v == "q") return EmphasisTarget::Question;
  if (v == "c") return EmphasisTarget::Context;
  if (v == "q+c") {
    if (!allow_qc)
      fail(ctx, "target q+c is not valid here (attention steering is "
                "undefined for the combined span)");
    return EmphasisTarget::QuestionAndContext;
  }
  fail(ctx, "unknown target \"" + v + "\" (q, c, or q+c)");
}

[[noreturn]] void bad_head(const std::string& where, const std::string& tok) {
  throw Error(ErrorKind::FormatError,
              where + ": expected \"(layer,head)\", got \"" + tok + "\"");
}

HeadId parse_head_token(const std::string& tok, const std::string& where) {
  if (tok.size() < 5 || tok.front() != '(' || tok.back() != ')')
    bad_head(where, tok);
  const std::size_t comma = tok.find(',');
  if (comma == std::string::npos) bad_head(where, tok);
  try {
    std::size_t p1 = 0, p2 = 0;
    const std::string a = tok.substr(1, comma - 1);
    const std::string b = tok.substr(comma + 1, tok.size() - comma - 2);
    const int layer = std::stoi(a, &p1);
    const int head = std::stoi(b, &p2);
    if (p1 != a.size() || p2 != b.size() || layer < 0 || head < 0)
      bad_head(where, tok);
    return {layer, head};
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    bad_head(where, tok);
  }
}

void check_name(const ParseCtx& ctx, const std::string& name) {
  if (name.empty()) fail(ctx, "empty name");
  for (char c : name)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-' &&
        c != '.')
      fail(ctx, "name \"" + name + "\" may only use [A-Za-z0-9._-]");
}

void check_file_exists(const ParseCtx& ctx, const std::string& path) {
  if (!fs::exists(path)) fail(ctx, "referenced file does not exist: " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  return bytes;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorKind::IoError, "short write to " + path.string());
}

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string fmt_f4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

ExperimentConfig load_experiment_config(const std::string& path) {
  const std::string text = read_file(path);

  ExperimentConfig cfg;
  cfg.source_text = text;
  cfg.orders.clear();
  cfg.mp_targets.clear();

  bool saw_orders = false, saw_methods = false, saw_targets = false;
  bool saw_as_targets = false, saw_random = false;
  std::vector<std::string> method_tokens;

  ParseCtx ctx{path, 0};
  std::istringstream in(text);
  std::string raw;
  while (std::getline(in, raw)) {
    ++ctx.line;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) fail(ctx, "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail(ctx, "empty key");
    if (value.empty()) fail(ctx, "empty value for key \"" + key + "\"");

    auto find_dataset = [&](const std::string& name) -> DatasetSpec& {
      for (DatasetSpec& d : cfg.datasets)
        if (d.name == name) return d;
      fail(ctx, "unknown dataset \"" + name + "\" (declare it first)");
    };

    if (key == "dataset") {
      const std::size_t sp = value.find_first_of(" \t");
      if (sp == std::string::npos)
        fail(ctx, "dataset takes \"<name> <path>\"");
      DatasetSpec spec;
      spec.name = trim(value.substr(0, sp));
      spec.path = trim(value.substr(sp + 1));
      check_name(ctx, spec.name);
      if (spec.path.empty()) fail(ctx, "dataset path is empty");
      check_file_exists(ctx, spec.path);
      for (const DatasetSpec& d : cfg.datasets)
        if (d.name == spec.name) fail(ctx, "duplicate dataset \"" + spec.name + "\"");
      cfg.datasets.push_back(std::move(spec));
    } else if (key.starts_with("dataset.")) {
      const std::size_t dot = key.rfind('.');
      const std::string name = key.substr(8, dot - 8);
      const std::string field = key.substr(dot + 1);
      if (name.empty() || dot <= 8) fail(ctx, "malformed dataset key");
      DatasetSpec& spec = find_dataset(name);
      if (field == "train") {
        check_file_exists(ctx, value);
        spec.train_path = value;
      } else if (field == "validation") {
        check_file_exists(ctx, value);
        spec.validation_path = value;
      } else if (field == "split") {
        if (value == "none")
          spec.split = SplitUse::None;
        else if (value == "valid")
          spec.split = SplitUse::Valid;
        else if (value == "test")
          spec.split = SplitUse::Test;
        else
          fail(ctx, "split must be none, valid, or test");
      } else {
        fail(ctx, "unknown dataset field \"" + field + "\"");
      }
    } else if (key == "model.weights") {
      check_file_exists(ctx, value);
      cfg.weights_path = value;
    } else if (key == "model.name") {
      check_name(ctx, value);
      cfg.model_name = value;
    } else if (key.starts_with("model.random.")) {
      if (!cfg.random_model) cfg.random_model.emplace();
      saw_random = true;
      ModelConfig& mc = cfg.random_model->config;
      const std::string field = key.substr(13);
      if (field == "n_layers")
        mc.n_layers = static_cast<int>(parse_int(ctx, value));
      else if (field == "n_heads")
        mc.n_heads = static_cast<int>(parse_int(ctx, value));
      else if (field == "d_model")
        mc.d_model = static_cast<int>(parse_int(ctx, value));
      else if (field == "vocab_size")
        mc.vocab_size = static_cast<int>(parse_int(ctx, value));
      else if (field == "max_seq_len")
        mc.max_seq_len = static_cast<int>(parse_int(ctx, value));
      else if (field == "seed")
        mc.seed = parse_u64(ctx, value);
      else
        fail(ctx, "unknown model.random field \"" + field + "\"");
    } else if (key == "orders") {
      saw_orders = true;
      for (const std::string& tok : split_ws(value)) {
        const PromptOrder o = parse_order(ctx, tok);
        if (std::find(cfg.orders.begin(), cfg.orders.end(), o) != cfg.orders.end())
          fail(ctx, "duplicate order \"" + tok + "\"");
        cfg.orders.push_back(o);
      }
      if (cfg.orders.empty()) fail(ctx, "orders is empty");
    } else if (key == "methods") {
      saw_methods = true;
      method_tokens = split_ws(value);
      for (const std::string& tok : method_tokens) {
        if (tok == "ne") {
          cfg.method_ne = true;
        } else if (tok == "as") {
          cfg.method_as = true;
        } else if (tok.starts_with("mp:")) {
          const std::string name = tok.substr(3);
          const auto marker = find_builtin_marker(name);
          if (!marker) {
            std::string known;
            for (const MarkerPair& m : builtin_markers())
              known += (known.empty() ? "" : ", ") + m.name;
            fail(ctx, "unknown marker \"" + name + "\" (builtins: " + known + ")");
          }
          for (const MarkerPair& m : cfg.mp_markers)
            if (m.name == name) fail(ctx, "duplicate method \"" + tok + "\"");
          cfg.mp_markers.push_back(*marker);
        } else {
          fail(ctx, "unknown method \"" + tok + "\" (ne, mp:<marker>, as)");
        }
      }
    } else if (key == "targets") {
      saw_targets = true;
      for (const std::string& tok : split_ws(value)) {
        const EmphasisTarget t = parse_target(ctx, tok, true);
        if (std::find(cfg.mp_targets.begin(), cfg.mp_targets.end(), t) !=
            cfg.mp_targets.end())
          fail(ctx, "duplicate target \"" + tok + "\"");
        cfg.mp_targets.push_back(t);
      }
    } else if (key == "as.targets") {
      saw_as_targets = true;
      for (const std::string& tok : split_ws(value)) {
        const EmphasisTarget t = parse_target(ctx, tok, false);
        if (std::find(cfg.as_targets.begin(), cfg.as_targets.end(), t) !=
            cfg.as_targets.end())
          fail(ctx, "duplicate target \"" + tok + "\"");
        cfg.as_targets.push_back(t);
      }
    } else if (key == "alpha") {
      cfg.alpha = parse_double(ctx, value);
      if (!(cfg.alpha >= 0.0 && cfg.alpha <= 1.0))
        fail(ctx, "alpha must lie in [0, 1]");
    } else if (key == "as.heads") {
      for (const std::string& tok : split_ws(value)) {
        try {
          cfg.as_heads.insert(parse_head_token(tok, "as.heads"));
        } catch (const Error& e) {
          fail(ctx, e.what());
        }
      }
    } else if (key == "as.heads_file") {
      cfg.as_heads_file = value;
    } else if (key == "k_grid") {
      for (const std::string& tok : split_ws(value)) {
        const long long k = parse_int(ctx, tok);
        if (k < 1) fail(ctx, "k values must be >= 1");
        cfg.k_grid.push_back(static_cast<int>(k));
      }
    } else if (key == "profile.subset_size") {
      cfg.profile_subset_size = parse_u64(ctx, value);
      if (cfg.profile_subset_size == 0) fail(ctx, "subset size must be >= 1");
    } else if (key == "profile.order") {
      cfg.profile_order = parse_order(ctx, value);
    } else if (key == "profile.target") {
      cfg.profile_target = parse_target(ctx, value, false);
    } else if (key == "partition.order") {
      cfg.partition_order = parse_order(ctx, value);
    } else if (key == "partition.method") {
      if (value != "ne" && value != "as" && !value.starts_with("mp:"))
        fail(ctx, "partition.method must be ne, mp:<marker>, or as");
      if (value.starts_with("mp:") && !find_builtin_marker(value.substr(3)))
        fail(ctx, "unknown marker \"" + value.substr(3) + "\"");
      cfg.partition_method = value;
    } else if (key == "partition.target") {
      cfg.partition_target = parse_target(ctx, value, true);
    } else if (key == "decode.max_new") {
      const long long v = parse_int(ctx, value);
      if (v < 0) fail(ctx, "decode.max_new must be >= 0");
      cfg.decode.max_new = static_cast<int>(v);
    } else if (key == "decode.stop_on_newline") {
      cfg.decode.stop_on_newline = parse_bool(ctx, value);
    } else if (key == "filter.max_len") {
      cfg.filter_max_len = parse_u64(ctx, value);
    } else if (key == "normalize") {
      cfg.normalize = parse_bool(ctx, value);
    } else if (key == "seed.split") {
      cfg.seed_split = parse_u64(ctx, value);
    } else if (key == "seed.subset") {
      cfg.seed_subset = parse_u64(ctx, value);
    } else if (key == "output_dir") {
      cfg.output_dir = value;
    } else {
      fail(ctx, "unknown key \"" + key + "\"");
    }
  }

  // Cross-key validation; these have no single line to point at.
  if (cfg.datasets.empty()) fail_global(path, "no datasets configured");
  if (cfg.weights_path.empty() && !saw_random)
    fail_global(path, "configure model.weights or model.random.*");
  if (!cfg.weights_path.empty() && saw_random)
    fail_global(path, "model.weights and model.random.* are exclusive");
  if (!saw_orders)
    cfg.orders = {PromptOrder::QuestionFirst, PromptOrder::ContextFirst};
  if (!saw_methods) cfg.method_ne = true;
  if (!saw_targets)
    cfg.mp_targets = {EmphasisTarget::Question, EmphasisTarget::Context,
                      EmphasisTarget::QuestionAndContext};
  if (!saw_as_targets) {
    for (EmphasisTarget t : cfg.mp_targets)
      if (t == EmphasisTarget::Question || t == EmphasisTarget::Context)
        cfg.as_targets.push_back(t);
  }
  if (cfg.method_as && cfg.as_targets.empty())
    fail_global(path, "attention steering has no usable target; set as.targets");
  if (cfg.method_as && cfg.as_heads.empty() && cfg.as_heads_file.empty())
    fail_global(path, "attention steering needs as.heads or as.heads_file");
  if (cfg.partition_method == "as" &&
      cfg.partition_target == EmphasisTarget::QuestionAndContext)
    fail_global(path,
                "partition.method as cannot use target q+c (steering is "
                "undefined for the combined span)");
  return cfg;
}

namespace {

struct LoadedModel {
  Model model;
  std::string hash;
};

LoadedModel load_model(const ExperimentConfig& cfg) {
  if (!cfg.weights_path.empty()) {
    const std::string bytes = read_file(cfg.weights_path);
    return {load_weights(cfg.weights_path), fnv1a_hex(bytes)};
  }
  const ModelConfig& c = cfg.random_model->config;
  const std::string canonical =
      "random n_layers=" + std::to_string(c.n_layers) +
      " n_heads=" + std::to_string(c.n_heads) +
      " d_model=" + std::to_string(c.d_model) +
      " vocab_size=" + std::to_string(c.vocab_size) +
      " max_seq_len=" + std::to_string(c.max_seq_len) +
      " seed=" + std::to_string(c.seed);
  return {init_random(c), fnv1a_hex(canonical)};
}

Corpus resolve_entry(const DatasetSpec& spec, const ExperimentConfig& cfg,
                     const Tokenizer& tokenizer) {
  Corpus corpus = load_jsonl(spec.path);
  if (spec.split != SplitUse::None) {
    auto [valid, test] = split_validation(corpus, SplitSpec{cfg.seed_split});
    corpus = spec.split == SplitUse::Valid ? std::move(valid) : std::move(test);
  }
  if (cfg.filter_max_len > 0)
    corpus = filter_by_length(corpus, tokenizer, cfg.filter_max_len);
  return corpus;
}

fs::path resolve_outdir(const ExperimentConfig& cfg, const RunOptions& run) {
  const fs::path dir = run.out_override.empty() ? cfg.output_dir
                                                : run.out_override;
  fs::create_directories(dir);
  return dir;
}

std::set<HeadId> resolve_heads(const ExperimentConfig& cfg) {
  if (!cfg.as_heads.empty()) return cfg.as_heads;
  const std::string bytes = read_file(cfg.as_heads_file);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::FormatError,
                cfg.as_heads_file + ": not JSON: " + e.what());
  }
  if (!j.contains("head_set") || !j["head_set"].is_array())
    throw Error(ErrorKind::FormatError,
                cfg.as_heads_file + ": missing head_set array");
  std::set<HeadId> heads;
  for (const auto& entry : j["head_set"])
    heads.insert(parse_head_token(entry.get<std::string>(), cfg.as_heads_file));
  if (heads.empty())
    throw Error(ErrorKind::FormatError, cfg.as_heads_file + ": empty head_set");
  return heads;
}

std::string provenance_lines(const ExperimentConfig& cfg,
                             const LoadedModel& lm) {
  return "# config " + fnv1a_hex(cfg.source_text) + "\n# model " + lm.hash +
         "\n";
}

constexpr std::string_view kEvalHeader =
    "model,dataset,order,method,target,n,accuracy,mean_ppl";

}  // namespace

std::string cmd_eval(const ExperimentConfig& cfg, const RunOptions& run) {
  const fs::path outdir = resolve_outdir(cfg, run);
  const LoadedModel lm = load_model(cfg);
  const Tokenizer tokenizer(lm.model.merges);
  EvalOptions opts;
  opts.decode = cfg.decode;
  opts.normalize = cfg.normalize;
  opts.threads = run.threads;

  struct MethodTarget {
    MethodSpec method;
    EmphasisTarget target;
  };
  std::vector<MethodTarget> grid;
  if (cfg.method_ne) grid.push_back({MethodSpec::ne(), EmphasisTarget::None});
  for (const MarkerPair& marker : cfg.mp_markers)
    for (EmphasisTarget t : cfg.mp_targets)
      grid.push_back({MethodSpec::mp(marker), t});
  if (cfg.method_as) {
    const std::set<HeadId> heads = resolve_heads(cfg);
    for (EmphasisTarget t : cfg.as_targets)
      grid.push_back(
          {MethodSpec::as(heads, static_cast<float>(cfg.alpha)), t});
  }

  std::string csv = provenance_lines(cfg, lm);
  csv += kEvalHeader;
  csv += '\n';
  for (const DatasetSpec& spec : cfg.datasets) {
    const Corpus corpus = resolve_entry(spec, cfg, tokenizer);
    for (PromptOrder order : cfg.orders) {
      for (const MethodTarget& mt : grid) {
        const CellResult cell = evaluate_cell(lm.model, corpus, order,
                                              mt.method, mt.target, opts);
        if (cell.n_marker_collisions > 0)
          std::fprintf(stderr,
                       "warning: %s/%s/%s/%s: %zu prompts already contain the "
                       "marker text\n",
                       spec.name.c_str(), to_string(order), cell.method.c_str(),
                       to_string(mt.target), cell.n_marker_collisions);
        csv += cfg.model_name;
        csv += ',';
        csv += spec.name;
        csv += ',';
        csv += to_string(order);
        csv += ',';
        csv += cell.method;
        csv += ',';
        csv += to_string(mt.target);
        csv += ',';
        csv += std::to_string(cell.n);
        csv += ',';
        csv += fmt_g(cell.accuracy);
        csv += ',';
        csv += fmt_g(cell.mean_ppl);
        csv += '\n';
      }
    }
  }

  const fs::path csv_path = outdir / "eval.csv";
  write_file(csv_path, csv);
  write_file(outdir / "eval_table.txt", render_csv_as_table(csv));
  return csv_path.string();
}

std::string cmd_profile(const ExperimentConfig& cfg, const RunOptions& run) {
  const fs::path outdir = resolve_outdir(cfg, run);
  const LoadedModel lm = load_model(cfg);
  const Tokenizer tokenizer(lm.model.merges);
  EvalOptions opts;
  opts.decode = cfg.decode;
  opts.normalize = cfg.normalize;
  opts.threads = run.threads;

  auto load_aux = [&](const std::string& path) {
    Corpus c = load_jsonl(path);
    if (cfg.filter_max_len > 0)
      c = filter_by_length(c, tokenizer, cfg.filter_max_len);
    return c;
  };

  std::vector<std::pair<std::string, Corpus>> subsets, validations;
  for (const DatasetSpec& spec : cfg.datasets) {
    const Corpus base = resolve_entry(spec, cfg, tokenizer);
    const Corpus train =
        spec.train_path.empty() ? base : load_aux(spec.train_path);
    const std::size_t n = std::min(cfg.profile_subset_size, train.size());
    subsets.emplace_back(spec.name,
                         sample_profiling_subset(train, n, cfg.seed_subset));
    validations.emplace_back(spec.name, spec.validation_path.empty()
                                            ? base
                                            : load_aux(spec.validation_path));
  }

  const float alpha = static_cast<float>(cfg.alpha);
  const std::vector<HeadScoreMap> maps = profile_heads(
      lm.model, subsets, cfg.profile_order, cfg.profile_target, alpha, opts);

  std::vector<int> grid = cfg.k_grid;
  if (grid.empty()) {
    const int full = lm.model.config.n_layers * lm.model.config.n_heads;
    for (int k = 1; k <= full; ++k) grid.push_back(k);
  }
  const ProfilingResult result =
      select_k(lm.model, maps, validations, cfg.profile_order,
               cfg.profile_target, alpha, grid, opts);

  nlohmann::json j;
  j["config_hash"] = fnv1a_hex(cfg.source_text);
  j["model_hash"] = lm.hash;
  j["alpha"] = cfg.alpha;
  j["order"] = to_string(cfg.profile_order);
  j["target"] = to_string(cfg.profile_target);
  j["best_k"] = result.best_k;
  j["best_accuracy"] = result.k_curve.at(result.best_k);
  nlohmann::json heads = nlohmann::json::array();
  for (const HeadId& h : result.head_set) heads.push_back(head_to_string(h));
  j["head_set"] = std::move(heads);
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& [k, acc] : result.k_curve)
    curve.push_back({{"k", k}, {"accuracy", acc}});
  j["k_curve"] = std::move(curve);
  j["empty_intersection_ks"] = result.empty_intersection_ks;
  nlohmann::json scores;
  for (const HeadScoreMap& map : maps) {
    nlohmann::json m;
    for (const auto& [head, acc] : map.scores) m[head_to_string(head)] = acc;
    scores[map.dataset_name] = std::move(m);
  }
  j["scores"] = std::move(scores);

  const fs::path out_path = outdir / "profile.json";
  write_file(out_path, j.dump(2) + "\n");
  return out_path.string();
}

std::string cmd_partition(const ExperimentConfig& cfg, const RunOptions& run) {
  const fs::path outdir = resolve_outdir(cfg, run);
  const LoadedModel lm = load_model(cfg);
  const Tokenizer tokenizer(lm.model.merges);
  EvalOptions opts;
  opts.decode = cfg.decode;
  opts.normalize = cfg.normalize;
  opts.threads = run.threads;

  MethodSpec emphasis;
  EmphasisTarget emphasis_target = cfg.partition_target;
  if (cfg.partition_method == "ne") {
    emphasis = MethodSpec::ne();
    emphasis_target = EmphasisTarget::None;
  } else if (cfg.partition_method == "as") {
    emphasis =
        MethodSpec::as(resolve_heads(cfg), static_cast<float>(cfg.alpha));
  } else {
    emphasis = MethodSpec::mp(*find_builtin_marker(cfg.partition_method.substr(3)));
  }

  auto accuracy_of = [&](const Corpus& part, const MethodSpec& m,
                         EmphasisTarget t) {
    if (part.empty()) return 0.0;
    return evaluate_cell(lm.model, part, cfg.partition_order, m, t, opts)
        .accuracy;
  };

  std::vector<KnowledgeSplitRow> rows;
  nlohmann::json datasets_json;
  for (const DatasetSpec& spec : cfg.datasets) {
    const Corpus corpus = resolve_entry(spec, cfg, tokenizer);
    const KnowledgePartition part = partition_knowledge(lm.model, corpus, opts);

    Corpus known{spec.name + ".known", {}};
    Corpus unknown{spec.name + ".unknown", {}};
    for (const RcExample& ex : corpus.examples) {
      if (part.known_ids.contains(ex.id))
        known.examples.push_back(ex);
      else
        unknown.examples.push_back(ex);
    }

    KnowledgeSplitRow row;
    row.model = cfg.model_name;
    row.dataset = spec.name;
    row.n_total = corpus.size();
    row.n_known = known.size();
    row.n_unknown = unknown.size();
    row.knowledge_amount =
        row.n_total == 0
            ? 0.0
            : static_cast<double>(row.n_known) / static_cast<double>(row.n_total);
    row.known_no_emphasis =
        accuracy_of(known, MethodSpec::ne(), EmphasisTarget::None);
    row.known_emphasis = accuracy_of(known, emphasis, emphasis_target);
    row.unknown_no_emphasis =
        accuracy_of(unknown, MethodSpec::ne(), EmphasisTarget::None);
    row.unknown_emphasis = accuracy_of(unknown, emphasis, emphasis_target);
    rows.push_back(row);

    nlohmann::json d;
    d["known"] = part.known_ids;
    d["unknown"] = part.unknown_ids;
    d["knowledge_amount"] = row.knowledge_amount;
    d["n"] = row.n_total;
    datasets_json[spec.name] = std::move(d);
  }

  nlohmann::json j;
  j["config_hash"] = fnv1a_hex(cfg.source_text);
  j["model_hash"] = lm.hash;
  j["datasets"] = std::move(datasets_json);

  std::string csv = provenance_lines(cfg, lm);
  csv +=
      "model,dataset,knowledge,n_known,n_unknown,known_ne,known_em,"
      "unknown_ne,unknown_em\n";
  for (const KnowledgeSplitRow& r : rows) {
    csv += r.model;
    csv += ',';
    csv += r.dataset;
    csv += ',';
    csv += fmt_g(r.knowledge_amount);
    csv += ',';
    csv += std::to_string(r.n_known);
    csv += ',';
    csv += std::to_string(r.n_unknown);
    csv += ',';
    csv += fmt_g(r.known_no_emphasis);
    csv += ',';
    csv += fmt_g(r.known_emphasis);
    csv += ',';
    csv += fmt_g(r.unknown_no_emphasis);
    csv += ',';
    csv += fmt_g(r.unknown_emphasis);
    csv += '\n';
  }

  const fs::path out_path = outdir / "partition.json";
  write_file(out_path, j.dump(2) + "\n");
  write_file(outdir / "knowledge.csv", csv);
  write_file(outdir / "knowledge_table.txt", knowledge_split_report(rows));
  return out_path.string();
}

std::string render_csv_as_table(const std::string& csv_text) {
  std::istringstream in(csv_text);
  std::string line;
  bool header_seen = false;

  struct Row {
    std::string model, dataset, order, method, target, n, accuracy;
  };
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != kEvalHeader)
        throw Error(ErrorKind::FormatError,
                    "unexpected CSV header: \"" + line + "\"");
      header_seen = true;
      continue;
    }
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      fields.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (fields.size() != 8)
      throw Error(ErrorKind::FormatError, "CSV row with " +
                                              std::to_string(fields.size()) +
                                              " fields: \"" + line + "\"");
    rows.push_back({fields[0], fields[1], fields[2], fields[3], fields[4],
                    fields[5], fields[6]});
  }
  if (!header_seen)
    throw Error(ErrorKind::FormatError, "CSV has no header row");

  // Group rows by (model, dataset) in first-appearance order; within each
  // block, orders become columns and (method, target) pairs become rows.
  std::vector<std::pair<std::string, std::string>> blocks;
  for (const Row& r : rows) {
    const auto key = std::make_pair(r.model, r.dataset);
    if (std::find(blocks.begin(), blocks.end(), key) == blocks.end())
      blocks.push_back(key);
  }

  std::string out;
  for (const auto& [model, dataset] : blocks) {
    std::vector<std::string> orders;
    std::vector<std::string> labels;
    std::map<std::pair<std::string, std::string>, std::string> cells;
    for (const Row& r : rows) {
      if (r.model != model || r.dataset != dataset) continue;
      if (std::find(orders.begin(), orders.end(), r.order) == orders.end())
        orders.push_back(r.order);
      const std::string label =
          r.target == "none" ? r.method : r.method + " " + r.target;
      if (std::find(labels.begin(), labels.end(), label) == labels.end())
        labels.push_back(label);
      cells[{label, r.order}] = fmt_f4(std::strtod(r.accuracy.c_str(), nullptr));
    }

    std::size_t label_w = std::string("method").size();
    for (const std::string& l : labels) label_w = std::max(label_w, l.size());
    std::vector<std::size_t> col_w;
    for (const std::string& o : orders) {
      std::size_t w = o.size();
      for (const std::string& l : labels) {
        const auto it = cells.find({l, o});
        if (it != cells.end()) w = std::max(w, it->second.size());
      }
      col_w.push_back(w);
    }

    if (!out.empty()) out += '\n';
    out += model + " / " + dataset + '\n';
    auto pad = [](std::string s, std::size_t w) {
      s.append(w - s.size(), ' ');
      return s;
    };
    out += pad("method", label_w);
    for (std::size_t c = 0; c < orders.size(); ++c)
      out += "  " + pad(orders[c], col_w[c]);
    while (out.back() == ' ') out.pop_back();
    out += '\n';
    for (const std::string& l : labels) {
      out += pad(l, label_w);
      for (std::size_t c = 0; c < orders.size(); ++c) {
        const auto it = cells.find({l, orders[c]});
        out += "  " + pad(it == cells.end() ? "-" : it->second, col_w[c]);
      }
      while (out.back() == ' ') out.pop_back();
      out += '\n';
    }
  }
  return out;
}

}  // namespace strkit
