#pragma once

#include "mashup/pipeline.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mashup {

struct ConvergenceStat {
  double converged_acc_scratch = 0.0;
  double threshold = 0.0;  // 0.99 * converged_acc_scratch
  std::optional<int> steps_to_threshold;
  std::optional<double> fraction;  // steps_to_threshold / total_steps; absent = never reached
};

// First eval point whose validation accuracy reaches 99% of the converged
// from-scratch accuracy. A trajectory that starts at or above the threshold
// yields the first eval step (possibly 0).
ConvergenceStat convergence_fraction(const TrainTrajectory& trajectory,
                                     double scratch_converged_acc);

struct TimingStat {
  double scratch_seconds = 0.0;
  double mashup_seconds = 0.0;  // score_s + merge_s + train_s * fraction
  double ratio = 0.0;           // percent; > 100 means the overhead exceeded the savings
};

// Overhead-inclusive time to match from-scratch accuracy, as a percentage of
// the from-scratch time. Throws on zero scratch time (undefined ratio).
TimingStat wall_clock_ratio(const PhaseTimings& phases, double fraction, double scratch_seconds);

struct BenchMethodSpec {
  std::string label;
  bool is_scratch = false;
  SelectionPolicy policy;
  MergeRecipe recipe;
};

// "scratch" | "seq" | "<merge>[-k<K>][@<policy>]" with merge in
// {mean, dare, ties, dare-ties, fisher, regmean} and policy in
// {loss, accuracy, random, oracle}. Defaults: k=2, policy=loss.
BenchMethodSpec parse_method(const std::string& text);

// Five log-spaced learning rates; the lora grid sits one decade above full.
std::vector<double> default_lr_grid(TrainMode mode);

struct ScratchCell {
  double lr = 0.0;
  std::uint64_t seed = 0;
  RunReport report;
};

// Realized suite plus the shared base checkpoint, the per-task from-scratch
// sweep, and one source checkpoint per task trained at that task's best LR.
struct SuiteContext {
  TaskSuite suite;
  std::vector<TaskData> data;
  ModelArch arch;
  TrainMode mode = TrainMode::full;
  CheckpointRecord base;
  std::vector<CheckpointRecord> sources;   // sources[i] belongs to task i
  std::vector<double> source_lr;           // best scratch LR per task
  std::vector<std::vector<ScratchCell>> scratch_runs;  // per task, lr-major seed-minor
  std::vector<double> lr_grid;
  std::vector<std::uint64_t> seeds;
  std::uint64_t root_seed = 0;
  bool time_phases = true;

  int task_index(const std::string& name) const;
  const ScratchCell& scratch_cell(int task, double lr, std::uint64_t seed) const;
};

SuiteContext prepare_suite_context(const TaskSuite& suite, TrainMode mode,
                                   const std::vector<double>& lr_grid,
                                   const std::vector<std::uint64_t>& seeds,
                                   std::uint64_t root_seed, int workers, bool time_phases = true);

struct BenchCell {
  std::string task;
  std::string method;
  std::uint64_t seed = 0;
  double lr = 0.0;
  double final_accuracy = 0.0;
  double init_accuracy = 0.0;
  ConvergenceStat conv;
  PhaseTimings phases;
  std::optional<TimingStat> timing;
};

enum class ReportFormat { json, csv, markdown };

ReportFormat report_format_from_string(const std::string& s);

struct BenchmarkReport {
  nlohmann::json config_echo;
  std::vector<std::string> tasks;    // column order
  std::vector<std::string> methods;  // row order
  std::vector<BenchCell> rows;

  // Mean over seeds; nullopt when the (task, method) pair has no rows.
  std::optional<double> mean_accuracy(const std::string& task, const std::string& method) const;
  // Grand mean of the per-task means ("Avg." convention).
  std::optional<double> grand_mean_accuracy(const std::string& method) const;
  // Per-task fraction, absent if any seed failed to reach the threshold.
  std::optional<double> mean_fraction(const std::string& task, const std::string& method) const;
  // Mean over tasks with a defined fraction.
  std::optional<double> grand_mean_fraction(const std::string& method) const;
  std::optional<double> mean_ratio(const std::string& task, const std::string& method) const;
  std::optional<double> grand_mean_ratio(const std::string& method) const;

  nlohmann::json to_json() const;
  std::string to_csv() const;
  std::string to_markdown() const;
};

void emit_report(const BenchmarkReport& report, ReportFormat format,
                 const std::filesystem::path& path);

// Each task is the target in turn; sources from the remaining tasks form the
// library. Every method runs over lr_grid x seeds and reports its rows at
// the per-(task, method) best LR.
BenchmarkReport loo_benchmark(const SuiteContext& ctx, const std::vector<BenchMethodSpec>& methods,
                              const std::vector<std::uint64_t>& seeds,
                              const std::vector<double>& lr_grid, int workers);

struct LrSweepResult {
  std::vector<double> lr_grid;
  // method -> mean accuracy per grid point (grand mean over tasks x seeds)
  std::vector<std::pair<std::string, std::vector<double>>> curves;

  nlohmann::json to_json() const;
};

LrSweepResult lr_sweep(const SuiteContext& ctx, const std::vector<BenchMethodSpec>& methods,
                       const std::vector<double>& lr_grid,
                       const std::vector<std::uint64_t>& seeds, int workers);

struct EvalSizeResult {
  std::vector<int> sizes;
  std::vector<double> mean_accuracy;  // grand mean per size
  std::vector<std::tuple<std::string, std::uint64_t, int, double>> rows;  // task, seed, size, acc

  nlohmann::json to_json() const;
};

// Fixed method (k=2 mean, by-loss) at a fixed LR; only the number of
// selection samples varies.
EvalSizeResult eval_size_sweep(const SuiteContext& ctx, const std::vector<int>& sizes,
                               const std::vector<std::uint64_t>& seeds, double lr, int workers);

}  // namespace mashup
