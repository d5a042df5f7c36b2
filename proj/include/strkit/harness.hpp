#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "strkit/metrics.hpp"
#include "strkit/profiling.hpp"

namespace strkit {

/// Which half of a seeded validation split a dataset entry should use.
enum class SplitUse { None, Valid, Test };

struct DatasetSpec {
  std::string name;
  std::string path;              // eval / partition corpus
  std::string train_path;        // profiling subset source (profile only)
  std::string validation_path;   // k-selection source (profile only)
  SplitUse split = SplitUse::None;
};

struct RandomModelSpec {
  ModelConfig config;
};

/// Parsed experiment configuration. Built from a flat key=value text file;
/// see the README for the full key grammar.
struct ExperimentConfig {
  std::vector<DatasetSpec> datasets;
  std::string weights_path;                       // exclusive with random_model
  std::optional<RandomModelSpec> random_model;
  std::string model_name = "model";

  std::vector<PromptOrder> orders;
  bool method_ne = false;
  std::vector<MarkerPair> mp_markers;             // one MP method per marker
  bool method_as = false;
  std::vector<EmphasisTarget> mp_targets;         // for MP methods
  std::vector<EmphasisTarget> as_targets;         // Question/Context only

  double alpha = 1e-3;
  std::set<HeadId> as_heads;
  std::string as_heads_file;                      // profile.json to reuse

  std::vector<int> k_grid;                        // empty -> full [1, L*N]
  std::size_t profile_subset_size = 1000;
  PromptOrder profile_order = PromptOrder::QuestionFirst;
  EmphasisTarget profile_target = EmphasisTarget::Question;

  PromptOrder partition_order = PromptOrder::ContextFirst;
  std::string partition_method = "mp:emphasize";
  EmphasisTarget partition_target = EmphasisTarget::QuestionAndContext;

  DecodeConfig decode;
  std::size_t filter_max_len = 512;               // 0 disables length filtering
  bool normalize = true;
  std::uint64_t seed_split = 1;
  std::uint64_t seed_subset = 2;
  std::string output_dir = "out";

  std::string source_text;  // raw config bytes, hashed into report headers
};

/// Parses and validates a config file. Throws Error(InvalidConfig) with
/// "<path>:<line>:" prefixed messages on bad input. Explicitly configured
/// (AS, Q+C) combinations are rejected here.
ExperimentConfig load_experiment_config(const std::string& path);

struct RunOptions {
  int threads = 1;
  std::string out_override;  // overrides config output_dir when non-empty
};

/// Full (dataset x order x method x target) grid; writes eval.csv and
/// eval_table.txt under the output directory. Returns the CSV path.
std::string cmd_eval(const ExperimentConfig& config, const RunOptions& run);

/// Head profiling and k selection; writes profile.json. Returns its path.
std::string cmd_profile(const ExperimentConfig& config, const RunOptions& run);

/// Known/unknown partition plus the split report; writes partition.json,
/// knowledge.csv and knowledge_table.txt. Returns the partition path.
std::string cmd_partition(const ExperimentConfig& config,
                          const RunOptions& run);

/// Re-renders an eval.csv produced by cmd_eval into the aligned table form.
std::string render_csv_as_table(const std::string& csv_text);

/// FNV-1a 64-bit over a byte string, hex-encoded; used for provenance lines.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace strkit
