#include "mashup/relevance.hpp"

#include "mashup/errors.hpp"
#include "mashup/parallel.hpp"
#include "mashup/rng.hpp"

#include <algorithm>
#include <cstdio>

namespace mashup {

std::string to_string(SelectionPolicy::Kind kind) {
  switch (kind) {
    case SelectionPolicy::Kind::by_loss: return "by_loss";
    case SelectionPolicy::Kind::by_accuracy: return "by_accuracy";
    case SelectionPolicy::Kind::random: return "random";
    case SelectionPolicy::Kind::oracle: return "oracle";
  }
  return "by_loss";
}

SelectionPolicy::Kind selection_kind_from_string(const std::string& s) {
  if (s == "by_loss" || s == "loss") return SelectionPolicy::Kind::by_loss;
  if (s == "by_accuracy" || s == "accuracy") return SelectionPolicy::Kind::by_accuracy;
  if (s == "random") return SelectionPolicy::Kind::random;
  if (s == "oracle") return SelectionPolicy::Kind::oracle;
  throw std::invalid_argument("unknown selection policy '" + s + "'");
}

std::vector<RelevanceScore> score_library(const std::vector<const CheckpointRecord*>& library,
                                          const ModelArch& arch, const NamedParamSet* base_params,
                                          const TaskData& task, Metric metric, int n_samples,
                                          std::uint64_t subset_seed, int workers) {
  if (library.empty()) throw std::invalid_argument("score_library: empty library");
  const Dataset subset = sample_eval_subset(task, n_samples, subset_seed);

  std::vector<RelevanceScore> scores(library.size());
  parallel_for(library.size(), workers, [&](std::size_t i) {
    const CheckpointRecord& record = *library[i];
    Model model;
    try {
      model = model_from_record(arch, record, base_params);
    } catch (const CompatibilityError& e) {
      throw CompatibilityError("checkpoint '" + record.id + "' is incompatible: " + e.what());
    }
    scores[i] = RelevanceScore{record.id, metric, evaluate(model, subset, metric), n_samples,
                               subset_seed};
  });
  return scores;
}

std::vector<std::string> rank_and_select(const std::vector<RelevanceScore>& scores,
                                         const SelectionPolicy& policy) {
  if (policy.kind == SelectionPolicy::Kind::oracle) {
    throw std::invalid_argument("oracle selection is delegated to oracle_select");
  }
  if (scores.empty()) throw std::invalid_argument("rank_and_select: no scores");
  if (policy.k < 1 || policy.k > static_cast<int>(scores.size())) {
    throw std::invalid_argument("rank_and_select: k " + std::to_string(policy.k) +
                                " out of [1, " + std::to_string(scores.size()) + "]");
  }
  for (const auto& s : scores) {
    if (s.metric != scores[0].metric) {
      throw std::invalid_argument("rank_and_select: mixed metrics in score list");
    }
  }

  if (policy.kind == SelectionPolicy::Kind::random) {
    std::vector<std::string> ids;
    for (const auto& s : scores) ids.push_back(s.checkpoint_id);
    std::sort(ids.begin(), ids.end());  // canonical base order, independent of input order
    Rng rng(derive_seed(policy.random_seed, {fnv1a64("random-select")}));
    for (int i = 0; i < policy.k; ++i) {
      std::swap(ids[static_cast<std::size_t>(i)],
                ids[static_cast<std::size_t>(i) + rng.below(ids.size() - static_cast<std::size_t>(i))]);
    }
    ids.resize(static_cast<std::size_t>(policy.k));
    return ids;
  }

  const bool ascending = policy.kind == SelectionPolicy::Kind::by_loss;
  std::vector<const RelevanceScore*> order;
  for (const auto& s : scores) order.push_back(&s);
  std::sort(order.begin(), order.end(), [ascending](const auto* a, const auto* b) {
    if (a->value != b->value) return ascending ? a->value < b->value : a->value > b->value;
    return a->checkpoint_id < b->checkpoint_id;  // deterministic tie rule
  });
  std::vector<std::string> selected;
  for (int i = 0; i < policy.k; ++i) selected.push_back(order[static_cast<std::size_t>(i)]->checkpoint_id);
  return selected;
}

std::string scores_to_csv(const std::vector<RelevanceScore>& scores) {
  std::string out = "checkpoint_id,metric,value,n_samples,subset_seed\n";
  char buf[160];
  for (const auto& s : scores) {
    std::snprintf(buf, sizeof(buf), "%s,%s,%.17g,%d,%llu\n", s.checkpoint_id.c_str(),
                  to_string(s.metric).c_str(), s.value, s.n_samples,
                  static_cast<unsigned long long>(s.subset_seed));
    out += buf;
  }
  return out;
}

std::vector<std::string> oracle_select(const std::vector<const CheckpointRecord*>& library,
                                       const ModelArch& arch, const CheckpointRecord* base,
                                       const TaskData& task, int k, const MergeRecipe& recipe,
                                       const OracleConfig& cfg, int n_samples,
                                       std::uint64_t subset_seed, int workers) {
  const int n = static_cast<int>(library.size());
  if (k < 1 || k > n) throw std::invalid_argument("oracle_select: k out of range");

  // C(n, k) with saturation against the guard.
  std::uint64_t combos = 1;
  for (int i = 0; i < k; ++i) {
    combos = combos * static_cast<std::uint64_t>(n - i) / static_cast<std::uint64_t>(i + 1);
    if (combos > static_cast<std::uint64_t>(cfg.max_combinations)) {
      throw BudgetError("oracle: C(" + std::to_string(n) + "," + std::to_string(k) +
                        ") exceeds the enumeration guard of " +
                        std::to_string(cfg.max_combinations));
    }
  }

  std::vector<std::vector<int>> subsets;
  std::vector<int> current(static_cast<std::size_t>(k));
  // Lexicographic combinations over library order.
  auto emit = [&](auto&& self, int start, int depth) -> void {
    if (depth == k) {
      subsets.push_back(current);
      return;
    }
    for (int i = start; i <= n - (k - depth); ++i) {
      current[static_cast<std::size_t>(depth)] = i;
      self(self, i + 1, depth + 1);
    }
  };
  emit(emit, 0, 0);

  const Dataset subset = sample_eval_subset(task, n_samples, subset_seed);

  MergeContext ctx;
  ctx.arch = arch;
  ctx.base = base;
  ctx.stats_samples = &subset;
  ctx.stats_seed = derive_seed(subset_seed, {fnv1a64("oracle-stats")});

  // Objective per subset: init loss is minimized, trained accuracy maximized.
  std::vector<double> objective(subsets.size());
  parallel_for(subsets.size(), workers, [&](std::size_t s) {
    std::vector<const CheckpointRecord*> picked;
    for (int idx : subsets[s]) picked.push_back(library[static_cast<std::size_t>(idx)]);
    MergeRecipe r = recipe;
    r.k = k;
    const CheckpointRecord merged = merge_checkpoints(picked, r, ctx);
    const NamedParamSet* base_params = base != nullptr ? &base->params : nullptr;
    if (cfg.mode == OracleConfig::BudgetMode::init_loss) {
      const Model model = model_from_record(arch, merged, base_params);
      objective[s] = evaluate(model, subset, Metric::loss);
      return;
    }
    Model model = model_from_record(arch, merged, base_params);
    TrainConfig tc = cfg.train_cfg;
    const TrainTrajectory traj = train(model, task.train, task.val, tc);
    objective[s] = traj.points.back().val_accuracy;
  });

  std::size_t best = 0;
  for (std::size_t s = 1; s < subsets.size(); ++s) {
    const bool better = cfg.mode == OracleConfig::BudgetMode::init_loss
                            ? objective[s] < objective[best]
                            : objective[s] > objective[best];
    if (better) best = s;
  }

  std::vector<std::string> ids;
  for (int idx : subsets[best]) ids.push_back(library[static_cast<std::size_t>(idx)]->id);
  return ids;
}

}  // namespace mashup
