#pragma once

#include "mashup/merge.hpp"
#include "mashup/task.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mashup {

struct RelevanceScore {
  std::string checkpoint_id;
  Metric metric = Metric::loss;  // loss: lower is better; accuracy: higher
  double value = 0.0;
  int n_samples = 0;
  std::uint64_t subset_seed = 0;
};

struct SelectionPolicy {
  enum class Kind { by_loss, by_accuracy, random, oracle };

  Kind kind = Kind::by_loss;
  int k = 2;
  int n_samples = 256;
  std::uint64_t random_seed = 0;  // used by kind=random only
};

std::string to_string(SelectionPolicy::Kind kind);
SelectionPolicy::Kind selection_kind_from_string(const std::string& s);

// Zero-shot score of every library checkpoint on one shared subset of the
// target task's train split. Results are assembled in library order no
// matter how evaluations are scheduled.
std::vector<RelevanceScore> score_library(const std::vector<const CheckpointRecord*>& library,
                                          const ModelArch& arch, const NamedParamSet* base_params,
                                          const TaskData& task, Metric metric, int n_samples,
                                          std::uint64_t subset_seed, int workers = 1);

// Argsort by the policy's direction, ties broken by checkpoint id; random
// draws a uniform k-subset from the policy seed. kind=oracle is handled by
// oracle_select, not here.
std::vector<std::string> rank_and_select(const std::vector<RelevanceScore>& scores,
                                         const SelectionPolicy& policy);

std::string scores_to_csv(const std::vector<RelevanceScore>& scores);

struct OracleConfig {
  enum class BudgetMode { init_loss, full_train };

  BudgetMode mode = BudgetMode::full_train;
  TrainConfig train_cfg;         // used by full_train
  int max_combinations = 10000;  // enumeration guard
};

// Exhaustively merges every size-k subset with the recipe and keeps the best
// one: lowest merged-init loss on the selection subset (init_loss) or
// highest final validation accuracy after training (full_train).
std::vector<std::string> oracle_select(const std::vector<const CheckpointRecord*>& library,
                                       const ModelArch& arch, const CheckpointRecord* base,
                                       const TaskData& task, int k, const MergeRecipe& recipe,
                                       const OracleConfig& cfg, int n_samples,
                                       std::uint64_t subset_seed, int workers = 1);

}  // namespace mashup
