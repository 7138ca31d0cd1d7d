#pragma once

#include "mashup/relevance.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace mashup {

// Select -> merge -> train. The selection subset is drawn once per
// (task, subset_seed) and shared across checkpoints and policies.
struct PipelineConfig {
  SelectionPolicy policy;
  MergeRecipe recipe;
  TrainConfig train_cfg;
  Metric metric = Metric::loss;
  std::uint64_t subset_seed = 0;
  bool time_phases = true;  // false makes every report field seed-deterministic
  OracleConfig::BudgetMode oracle_mode = OracleConfig::BudgetMode::full_train;

  nlohmann::json to_json() const;
};

struct RunContext {
  ModelArch arch;
  TrainMode mode = TrainMode::full;
  const CheckpointRecord* base = nullptr;            // shared init / delta reference
  std::vector<const CheckpointRecord*> library;      // candidates (target's own excluded)
  const TaskData* task = nullptr;
};

struct SelectionReport {
  std::vector<RelevanceScore> scores;
  std::vector<std::string> selected;
  double relevance_spread = 0.0;  // max - min score value
  bool low_spread = false;        // spread below 2% of the mean |value|
};

struct PhaseTimings {
  double score_s = 0.0;
  double merge_s = 0.0;
  double train_s = 0.0;
};

struct MashupInitResult {
  CheckpointRecord merged;
  SelectionReport selection;
  PhaseTimings timings;
};

// Algorithm steps 1-2: rank the library on the selection subset, merge the
// top-k with the recipe. Deterministic given the config seeds.
MashupInitResult mashup_init(const RunContext& ctx, const PipelineConfig& cfg, int workers = 1);

struct RunReport {
  nlohmann::json config_echo;
  std::string task_name;
  SelectionReport selection;
  PhaseTimings timings;
  TrainTrajectory trajectory;
  double init_val_accuracy = 0.0;   // zero-shot accuracy of the initialization
  double final_val_accuracy = 0.0;

  nlohmann::json to_json() const;
};

// Full Algorithm: mashup_init then finetune from the merged initialization.
RunReport mashup_run(const RunContext& ctx, const PipelineConfig& cfg, int workers = 1);

struct BaselineInit {
  enum class Kind { scratch, sequential };

  Kind kind = Kind::scratch;
  std::string checkpoint_id;  // sequential only
};

// scratch: finetune the shared base directly (fresh adapter in lora mode;
// a fresh Gaussian init when no base exists in full mode).
// sequential: initialize from one named prior checkpoint.
RunReport baseline_run(const RunContext& ctx, const PipelineConfig& cfg, const BaselineInit& init);

}  // namespace mashup
