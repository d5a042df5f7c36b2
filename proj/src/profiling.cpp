#include "strkit/profiling.hpp"

#include <algorithm>

#include "strkit/error.hpp"

namespace strkit {

std::string head_to_string(const HeadId& id) {
  return "(" + std::to_string(id.layer) + "," + std::to_string(id.head) + ")";
}

std::vector<HeadScoreMap> profile_heads(
    const Model& model,
    const std::vector<std::pair<std::string, Corpus>>& subsets,
    PromptOrder order, EmphasisTarget target, float alpha,
    const EvalOptions& options) {
  if (target != EmphasisTarget::Question && target != EmphasisTarget::Context)
    throw Error(ErrorKind::InvalidTarget,
                "profiling steers a single span (q or c)");
  if (subsets.empty())
    throw Error(ErrorKind::EmptyInput, "no profiling subsets");

  std::vector<HeadScoreMap> maps;
  maps.reserve(subsets.size());
  for (const auto& [name, corpus] : subsets) {
    HeadScoreMap map;
    map.dataset_name = name;
    for (int l = 0; l < model.config.n_layers; ++l) {
      for (int h = 0; h < model.config.n_heads; ++h) {
        const MethodSpec method = MethodSpec::as({HeadId{l, h}}, alpha);
        const CellResult cell =
            evaluate_cell(model, corpus, order, method, target, options);
        map.scores[{l, h}] = cell.accuracy;
      }
    }
    maps.push_back(std::move(map));
  }
  return maps;
}

std::set<HeadId> topk_intersection(const std::vector<HeadScoreMap>& score_maps,
                                   int k, int n_layers, int n_heads) {
  const int grid = n_layers * n_heads;
  if (k <= 0 || k > grid)
    throw Error(ErrorKind::KOutOfRange,
                "k must lie in [1, " + std::to_string(grid) + "]");
  if (score_maps.empty())
    throw Error(ErrorKind::EmptyInput, "no score maps");

  std::set<HeadId> result;
  bool first = true;
  for (const HeadScoreMap& map : score_maps) {
    if (static_cast<int>(map.scores.size()) != grid)
      throw Error(ErrorKind::ShapeMismatch,
                  map.dataset_name + ": scores do not cover the head grid");
    // Stable sort by descending score; map order already ascends by
    // (layer, head), so equal scores keep the lower head first.
    std::vector<std::pair<HeadId, double>> ranked(map.scores.begin(),
                                                  map.scores.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) {
                       return a.second > b.second;
                     });
    std::set<HeadId> top;
    for (int i = 0; i < k; ++i) top.insert(ranked[i].first);

    if (first) {
      result = std::move(top);
      first = false;
    } else {
      std::set<HeadId> merged;
      std::set_intersection(result.begin(), result.end(), top.begin(),
                            top.end(), std::inserter(merged, merged.begin()));
      result = std::move(merged);
    }
  }
  return result;
}

ProfilingResult select_k(
    const Model& model, const std::vector<HeadScoreMap>& score_maps,
    const std::vector<std::pair<std::string, Corpus>>& validation_sets,
    PromptOrder order, EmphasisTarget target, float alpha,
    const std::vector<int>& k_grid, const EvalOptions& options) {
  if (k_grid.empty()) throw Error(ErrorKind::EmptyGrid, "empty k grid");
  if (validation_sets.empty())
    throw Error(ErrorKind::EmptyInput, "no validation sets");

  ProfilingResult result;
  bool have_best = false;
  double best_acc = 0.0;

  std::vector<int> grid = k_grid;
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  for (int k : grid) {
    const std::set<HeadId> heads = topk_intersection(
        score_maps, k, model.config.n_layers, model.config.n_heads);
    if (heads.empty()) result.empty_intersection_ks.insert(k);

    // An empty intersection degrades to the no-steering baseline rather
    // than disqualifying the k.
    const MethodSpec method = heads.empty()
                                  ? MethodSpec::ne()
                                  : MethodSpec::as(heads, alpha);
    const EmphasisTarget cell_target =
        heads.empty() ? EmphasisTarget::None : target;

    double acc_sum = 0.0;
    for (const auto& [name, corpus] : validation_sets) {
      const CellResult cell =
          evaluate_cell(model, corpus, order, method, cell_target, options);
      acc_sum += cell.accuracy;
    }
    const double acc = acc_sum / static_cast<double>(validation_sets.size());
    result.k_curve[k] = acc;

    // Strict > with ascending k keeps ties on the smaller k.
    if (!have_best || acc > best_acc) {
      have_best = true;
      best_acc = acc;
      result.best_k = k;
      result.head_set = heads;
    }
  }
  return result;
}

}  // namespace strkit
