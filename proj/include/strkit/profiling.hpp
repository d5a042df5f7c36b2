#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "strkit/metrics.hpp"

namespace strkit {

/// Per-dataset score for every one of the L*N heads (steering that head
/// alone and measuring accuracy on the dataset's profiling subset).
struct HeadScoreMap {
  std::string dataset_name;
  std::map<HeadId, double> scores;
};

/// Outcome of the k search: the chosen k, its head set, and the accuracy
/// curve over the whole grid. k values whose cross-dataset intersection was
/// empty are listed separately; they were scored as the no-steering baseline.
struct ProfilingResult {
  int best_k = 0;
  std::set<HeadId> head_set;
  std::map<int, double> k_curve;
  std::set<int> empty_intersection_ks;
};

/// Scores each head individually: for every (dataset, head) pair, evaluates
/// substring-containment accuracy with steering = ({head}, alpha, per-example
/// segment). target must be Question or Context.
std::vector<HeadScoreMap> profile_heads(
    const Model& model,
    const std::vector<std::pair<std::string, Corpus>>& subsets,
    PromptOrder order, EmphasisTarget target, float alpha,
    const EvalOptions& options = {});

/// Intersection across datasets of each dataset's k highest-scoring heads.
/// Ties are broken by ascending (layer, head): lower indices win a slot.
std::set<HeadId> topk_intersection(const std::vector<HeadScoreMap>& score_maps,
                                   int k, int n_layers, int n_heads);

/// Evaluates every k in k_grid on the validation sets (mean accuracy across
/// datasets) and returns the best k, ties toward smaller k. Empty
/// intersections evaluate as the no-steering baseline and are flagged.
ProfilingResult select_k(
    const Model& model, const std::vector<HeadScoreMap>& score_maps,
    const std::vector<std::pair<std::string, Corpus>>& validation_sets,
    PromptOrder order, EmphasisTarget target, float alpha,
    const std::vector<int>& k_grid, const EvalOptions& options = {});

/// "(layer,head)" form used in reports, e.g. "(0,1)".
std::string head_to_string(const HeadId& id);

}  // namespace strkit
