#include "mashup/bench.hpp"

#include "mashup/errors.hpp"
#include "mashup/parallel.hpp"
#include "mashup/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>

namespace mashup {

using nlohmann::json;

ConvergenceStat convergence_fraction(const TrainTrajectory& trajectory,
                                     double scratch_converged_acc) {
  if (trajectory.points.empty()) {
    throw std::invalid_argument("convergence_fraction: empty trajectory");
  }
  ConvergenceStat stat;
  stat.converged_acc_scratch = scratch_converged_acc;
  stat.threshold = 0.99 * scratch_converged_acc;
  for (const auto& p : trajectory.points) {
    if (p.val_accuracy >= stat.threshold) {
      stat.steps_to_threshold = p.step;
      stat.fraction = static_cast<double>(p.step) / trajectory.total_steps;
      break;
    }
  }
  return stat;
}

TimingStat wall_clock_ratio(const PhaseTimings& phases, double fraction, double scratch_seconds) {
  if (!(scratch_seconds > 0.0)) {
    throw std::invalid_argument("wall_clock_ratio: zero scratch time, ratio undefined");
  }
  TimingStat stat;
  stat.scratch_seconds = scratch_seconds;
  stat.mashup_seconds = phases.score_s + phases.merge_s + phases.train_s * fraction;
  stat.ratio = 100.0 * stat.mashup_seconds / scratch_seconds;
  return stat;
}

BenchMethodSpec parse_method(const std::string& text) {
  BenchMethodSpec spec;
  spec.label = text;
  if (text == "scratch") {
    spec.is_scratch = true;
    return spec;
  }

  std::string body = text;
  std::string policy = "loss";
  if (const auto at = body.find('@'); at != std::string::npos) {
    policy = body.substr(at + 1);
    body = body.substr(0, at);
  }

  int k = 2;
  std::string method = body;
  if (body == "seq") {
    method = "mean";
    k = 1;
  } else if (const auto kpos = body.rfind("-k"); kpos != std::string::npos &&
             kpos + 2 < body.size() &&
             body.find_first_not_of("0123456789", kpos + 2) == std::string::npos) {
    k = std::stoi(body.substr(kpos + 2));
    method = body.substr(0, kpos);
  }

  spec.recipe.method = merge_method_from_string(method);
  spec.recipe.k = k;
  spec.policy.k = k;
  spec.policy.kind = selection_kind_from_string(policy == "acc" ? "by_accuracy" : policy);
  return spec;
}

std::vector<double> default_lr_grid(TrainMode mode) {
  const double lo = mode == TrainMode::full ? 5e-3 : 5e-2;
  const double hi = mode == TrainMode::full ? 5e-2 : 5e-1;
  std::vector<double> grid;
  for (int i = 0; i < 5; ++i) {
    grid.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / 4.0));
  }
  return grid;
}

int SuiteContext::task_index(const std::string& name) const {
  for (std::size_t i = 0; i < suite.specs.size(); ++i) {
    if (suite.specs[i].name == name) return static_cast<int>(i);
  }
  throw SetupError("unknown task '" + name + "'");
}

const ScratchCell& SuiteContext::scratch_cell(int task, double lr, std::uint64_t seed) const {
  for (const auto& cell : scratch_runs[static_cast<std::size_t>(task)]) {
    if (cell.lr == lr && cell.seed == seed) return cell;
  }
  throw SetupError("missing scratch run for task index " + std::to_string(task));
}

namespace {

std::uint64_t cell_train_seed(std::uint64_t root, const std::string& task, std::uint64_t seed) {
  return derive_seed(root, {fnv1a64(task), seed, fnv1a64("train")});
}

std::uint64_t cell_subset_seed(std::uint64_t root, const std::string& task, std::uint64_t seed) {
  return derive_seed(root, {fnv1a64(task), seed, fnv1a64("subset")});
}

TrainConfig make_train_cfg(TrainMode mode, double lr, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.mode = mode;
  cfg.learning_rate = lr;
  cfg.seed = seed;
  return cfg;
}

// Best LR by mean final accuracy across seeds; ties go to the smaller LR.
std::size_t best_lr_index(const std::vector<std::vector<double>>& acc_by_lr) {
  std::size_t best = 0;
  double best_mean = -1.0;
  for (std::size_t li = 0; li < acc_by_lr.size(); ++li) {
    double mean = 0.0;
    for (double a : acc_by_lr[li]) mean += a;
    mean /= static_cast<double>(acc_by_lr[li].size());
    if (mean > best_mean + 1e-15) {
      best_mean = mean;
      best = li;
    }
  }
  return best;
}

}  // namespace

SuiteContext prepare_suite_context(const TaskSuite& suite, TrainMode mode,
                                   const std::vector<double>& lr_grid,
                                   const std::vector<std::uint64_t>& seeds,
                                   std::uint64_t root_seed, int workers, bool time_phases) {
  if (lr_grid.empty() || seeds.empty()) {
    throw std::invalid_argument("prepare_suite_context: empty LR grid or seed list");
  }
  SuiteContext ctx;
  ctx.suite = suite;
  ctx.mode = mode;
  ctx.lr_grid = lr_grid;
  ctx.seeds = seeds;
  ctx.root_seed = root_seed;
  ctx.time_phases = time_phases;
  if (suite.specs.empty()) throw SetupError("prepare_suite_context: empty suite");
  ctx.arch = default_arch(suite.specs[0].input_dim, suite.specs[0].n_classes);

  const std::size_t n_tasks = suite.specs.size();
  ctx.data.resize(n_tasks);
  parallel_for(n_tasks, workers, [&](std::size_t i) { ctx.data[i] = realize_task(suite.specs[i]); });

  {
    const Model base_model = init_model(
        ctx.arch, TrainMode::full, ScratchInit{derive_seed(root_seed, {fnv1a64("base")})});
    ctx.base.id = "base";
    ctx.base.kind = CheckpointKind::full;
    ctx.base.task_name = "__pretrain__";
    ctx.base.params = export_params(base_model);
    ctx.base.train_config_hash = hash_hex("{\"init\":\"base\"}");
  }

  // From-scratch sweep: every (task, lr, seed) cell, reused later as the
  // baseline rows of every benchmark.
  const std::size_t cells = n_tasks * lr_grid.size() * seeds.size();
  ctx.scratch_runs.assign(n_tasks, {});
  for (std::size_t t = 0; t < n_tasks; ++t) {
    ctx.scratch_runs[t].resize(lr_grid.size() * seeds.size());
  }
  parallel_for(cells, workers, [&](std::size_t flat) {
    const std::size_t t = flat / (lr_grid.size() * seeds.size());
    const std::size_t rem = flat % (lr_grid.size() * seeds.size());
    const std::size_t li = rem / seeds.size();
    const std::size_t si = rem % seeds.size();
    const TaskSpec& spec = suite.specs[t];

    RunContext run_ctx;
    run_ctx.arch = ctx.arch;
    run_ctx.mode = mode;
    run_ctx.base = &ctx.base;
    run_ctx.task = &ctx.data[t];

    PipelineConfig cfg;
    cfg.train_cfg = make_train_cfg(mode, lr_grid[li], cell_train_seed(root_seed, spec.name, seeds[si]));
    cfg.time_phases = time_phases;

    ScratchCell cell;
    cell.lr = lr_grid[li];
    cell.seed = seeds[si];
    cell.report = baseline_run(run_ctx, cfg, BaselineInit{BaselineInit::Kind::scratch, ""});
    cell.report.task_name = spec.name;
    ctx.scratch_runs[t][li * seeds.size() + si] = std::move(cell);
  });

  ctx.source_lr.resize(n_tasks);
  for (std::size_t t = 0; t < n_tasks; ++t) {
    std::vector<std::vector<double>> acc(lr_grid.size());
    for (std::size_t li = 0; li < lr_grid.size(); ++li) {
      for (std::size_t si = 0; si < seeds.size(); ++si) {
        acc[li].push_back(ctx.scratch_runs[t][li * seeds.size() + si].report.final_val_accuracy);
      }
    }
    ctx.source_lr[t] = lr_grid[best_lr_index(acc)];
  }

  // One source checkpoint per task, trained at that task's best scratch LR.
  ctx.sources.resize(n_tasks);
  parallel_for(n_tasks, workers, [&](std::size_t t) {
    const TaskSpec& spec = suite.specs[t];
    RunContext run_ctx;
    run_ctx.arch = ctx.arch;
    run_ctx.mode = mode;
    run_ctx.base = &ctx.base;
    run_ctx.task = &ctx.data[t];

    PipelineConfig cfg;
    cfg.train_cfg = make_train_cfg(
        mode, ctx.source_lr[t],
        derive_seed(root_seed, {fnv1a64(spec.name), fnv1a64("source")}));
    cfg.time_phases = time_phases;

    RunReport report = baseline_run(run_ctx, cfg, BaselineInit{BaselineInit::Kind::scratch, ""});
    CheckpointRecord source = std::move(report.trajectory.final);
    source.id = "src-" + spec.name;
    source.task_name = spec.name;
    source.base_id = "base";
    ctx.sources[t] = std::move(source);
  });

  return ctx;
}

namespace {

struct MashupCell {
  double lr = 0.0;
  std::uint64_t seed = 0;
  RunReport report;
};

// Runs one mashup method over lr_grid x seeds for a fixed target task.
std::vector<MashupCell> run_method_cells(const SuiteContext& ctx, int target,
                                         const BenchMethodSpec& method,
                                         const std::vector<double>& lr_grid,
                                         const std::vector<std::uint64_t>& seeds,
                                         int n_samples_override, int workers) {
  const TaskSpec& spec = ctx.suite.specs[static_cast<std::size_t>(target)];
  std::vector<const CheckpointRecord*> library;
  for (std::size_t j = 0; j < ctx.sources.size(); ++j) {
    if (static_cast<int>(j) != target) library.push_back(&ctx.sources[j]);
  }

  std::vector<MashupCell> cells(lr_grid.size() * seeds.size());
  parallel_for(cells.size(), workers, [&](std::size_t flat) {
    const std::size_t li = flat / seeds.size();
    const std::size_t si = flat % seeds.size();

    RunContext run_ctx;
    run_ctx.arch = ctx.arch;
    run_ctx.mode = ctx.mode;
    run_ctx.base = &ctx.base;
    run_ctx.library = library;
    run_ctx.task = &ctx.data[static_cast<std::size_t>(target)];

    PipelineConfig cfg;
    cfg.policy = method.policy;
    cfg.recipe = method.recipe;
    if (n_samples_override > 0) cfg.policy.n_samples = n_samples_override;
    cfg.recipe.base_id = "base";
    cfg.metric = cfg.policy.kind == SelectionPolicy::Kind::by_accuracy ? Metric::accuracy
                                                                       : Metric::loss;
    cfg.policy.random_seed =
        derive_seed(ctx.root_seed, {fnv1a64(spec.name), seeds[si], fnv1a64("random-policy")});
    cfg.subset_seed = cell_subset_seed(ctx.root_seed, spec.name, seeds[si]);
    cfg.train_cfg =
        make_train_cfg(ctx.mode, lr_grid[li], cell_train_seed(ctx.root_seed, spec.name, seeds[si]));
    cfg.time_phases = ctx.time_phases;

    MashupCell cell;
    cell.lr = lr_grid[li];
    cell.seed = seeds[si];
    cell.report = mashup_run(run_ctx, cfg, 1);
    cell.report.task_name = spec.name;
    cells[flat] = std::move(cell);
  });
  return cells;
}

}  // namespace

BenchmarkReport loo_benchmark(const SuiteContext& ctx, const std::vector<BenchMethodSpec>& methods,
                              const std::vector<std::uint64_t>& seeds,
                              const std::vector<double>& lr_grid, int workers) {
  if (seeds != ctx.seeds || lr_grid != ctx.lr_grid) {
    throw SetupError("loo_benchmark: seeds/LR grid differ from the prepared context");
  }
  if (ctx.sources.empty()) throw SetupError("loo_benchmark: no source checkpoints prepared");

  BenchmarkReport report;
  for (const auto& s : ctx.suite.specs) report.tasks.push_back(s.name);
  for (const auto& m : methods) report.methods.push_back(m.label);
  {
    json method_names = json::array();
    for (const auto& m : methods) method_names.push_back(m.label);
    json seed_list = json::array();
    for (auto s : seeds) seed_list.push_back(s);
    report.config_echo = json{{"root_seed", ctx.root_seed},
                              {"mode", to_string(ctx.mode)},
                              {"methods", method_names},
                              {"seeds", seed_list},
                              {"lr_grid", lr_grid},
                              {"suite_seed", ctx.suite.suite_seed}};
  }

  const std::size_t n_tasks = ctx.suite.specs.size();
  for (std::size_t t = 0; t < n_tasks; ++t) {
    const std::string& task = ctx.suite.specs[t].name;

    // The scratch baseline at this task's best scratch LR; its per-seed
    // final accuracy defines the per-seed convergence threshold.
    const double scratch_lr = ctx.source_lr[t];
    std::vector<const ScratchCell*> scratch_cells;
    for (std::uint64_t seed : seeds) {
      scratch_cells.push_back(&ctx.scratch_cell(static_cast<int>(t), scratch_lr, seed));
    }

    for (const auto& method : methods) {
      if (method.is_scratch) {
        for (std::size_t si = 0; si < seeds.size(); ++si) {
          const RunReport& run = scratch_cells[si]->report;
          BenchCell cell;
          cell.task = task;
          cell.method = method.label;
          cell.seed = seeds[si];
          cell.lr = scratch_lr;
          cell.final_accuracy = run.final_val_accuracy;
          cell.init_accuracy = run.init_val_accuracy;
          cell.conv = convergence_fraction(run.trajectory, run.final_val_accuracy);
          cell.phases = run.timings;
          report.rows.push_back(std::move(cell));
        }
        continue;
      }

      const auto cells = run_method_cells(ctx, static_cast<int>(t), method, lr_grid, seeds,
                                          /*n_samples_override=*/0, workers);
      std::vector<std::vector<double>> acc(lr_grid.size());
      for (std::size_t li = 0; li < lr_grid.size(); ++li) {
        for (std::size_t si = 0; si < seeds.size(); ++si) {
          acc[li].push_back(cells[li * seeds.size() + si].report.final_val_accuracy);
        }
      }
      const std::size_t best_li = best_lr_index(acc);

      for (std::size_t si = 0; si < seeds.size(); ++si) {
        const MashupCell& cell_in = cells[best_li * seeds.size() + si];
        const RunReport& scratch = scratch_cells[si]->report;
        BenchCell cell;
        cell.task = task;
        cell.method = method.label;
        cell.seed = seeds[si];
        cell.lr = lr_grid[best_li];
        cell.final_accuracy = cell_in.report.final_val_accuracy;
        cell.init_accuracy = cell_in.report.init_val_accuracy;
        cell.conv = convergence_fraction(cell_in.report.trajectory, scratch.final_val_accuracy);
        cell.phases = cell_in.report.timings;
        if (ctx.time_phases) {
          // Cells that never reach the threshold are charged the full
          // training time (fraction 1).
          const double fraction = cell.conv.fraction.value_or(1.0);
          cell.timing =
              wall_clock_ratio(cell.phases, fraction, scratch.trajectory.wall_clock_seconds);
        }
        report.rows.push_back(std::move(cell));
      }
    }
  }
  return report;
}

std::optional<double> BenchmarkReport::mean_accuracy(const std::string& task,
                                                     const std::string& method) const {
  double sum = 0.0;
  int count = 0;
  for (const auto& r : rows) {
    if (r.task == task && r.method == method) {
      sum += r.final_accuracy;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / count;
}

std::optional<double> BenchmarkReport::grand_mean_accuracy(const std::string& method) const {
  double sum = 0.0;
  int count = 0;
  for (const auto& t : tasks) {
    if (auto m = mean_accuracy(t, method)) {
      sum += *m;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / count;
}

std::optional<double> BenchmarkReport::mean_fraction(const std::string& task,
                                                     const std::string& method) const {
  double sum = 0.0;
  int count = 0;
  for (const auto& r : rows) {
    if (r.task != task || r.method != method) continue;
    if (!r.conv.fraction.has_value()) return std::nullopt;  // "---" if any seed missed
    sum += *r.conv.fraction;
    ++count;
  }
  if (count == 0) return std::nullopt;
  return sum / count;
}

std::optional<double> BenchmarkReport::grand_mean_fraction(const std::string& method) const {
  double sum = 0.0;
  int count = 0;
  for (const auto& t : tasks) {
    if (auto f = mean_fraction(t, method)) {
      sum += *f;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / count;
}

std::optional<double> BenchmarkReport::mean_ratio(const std::string& task,
                                                  const std::string& method) const {
  double sum = 0.0;
  int count = 0;
  for (const auto& r : rows) {
    if (r.task != task || r.method != method || !r.timing.has_value()) continue;
    sum += r.timing->ratio;
    ++count;
  }
  if (count == 0) return std::nullopt;
  return sum / count;
}

std::optional<double> BenchmarkReport::grand_mean_ratio(const std::string& method) const {
  double sum = 0.0;
  int count = 0;
  for (const auto& t : tasks) {
    if (auto r = mean_ratio(t, method)) {
      sum += *r;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / count;
}

json BenchmarkReport::to_json() const {
  json rows_json = json::array();
  for (const auto& r : rows) {
    json jr{{"task", r.task},
            {"method", r.method},
            {"seed", r.seed},
            {"lr", r.lr},
            {"final_accuracy", r.final_accuracy},
            {"init_accuracy", r.init_accuracy},
            {"converged_acc_scratch", r.conv.converged_acc_scratch},
            {"threshold", r.conv.threshold}};
    if (r.conv.steps_to_threshold) jr["steps_to_threshold"] = *r.conv.steps_to_threshold;
    if (r.conv.fraction) jr["fraction"] = *r.conv.fraction;
    jr["score_s"] = r.phases.score_s;
    jr["merge_s"] = r.phases.merge_s;
    jr["train_s"] = r.phases.train_s;
    if (r.timing) {
      jr["timing"] = json{{"scratch_seconds", r.timing->scratch_seconds},
                          {"mashup_seconds", r.timing->mashup_seconds},
                          {"ratio", r.timing->ratio}};
    }
    rows_json.push_back(std::move(jr));
  }

  json aggregates;
  for (const auto& m : methods) {
    json per_task;
    for (const auto& t : tasks) {
      json cell;
      if (auto a = mean_accuracy(t, m)) cell["accuracy"] = *a;
      if (auto f = mean_fraction(t, m)) cell["fraction"] = *f;
      if (auto r = mean_ratio(t, m)) cell["ratio"] = *r;
      per_task[t] = std::move(cell);
    }
    json grand;
    if (auto a = grand_mean_accuracy(m)) grand["accuracy"] = *a;
    if (auto f = grand_mean_fraction(m)) grand["fraction"] = *f;
    if (auto r = grand_mean_ratio(m)) grand["ratio"] = *r;
    aggregates[m] = json{{"per_task", per_task}, {"grand", grand}};
  }

  return json{{"config", config_echo},
              {"tasks", tasks},
              {"methods", methods},
              {"rows", rows_json},
              {"aggregates", aggregates}};
}

std::string BenchmarkReport::to_csv() const {
  std::string out =
      "task,method,seed,lr,final_accuracy,init_accuracy,converged_acc_scratch,threshold,"
      "steps_to_threshold,fraction,score_s,merge_s,train_s,scratch_seconds,mashup_seconds,"
      "ratio\n";
  char buf[512];
  for (const auto& r : rows) {
    std::string steps = r.conv.steps_to_threshold ? std::to_string(*r.conv.steps_to_threshold) : "";
    char frac[40] = "";
    if (r.conv.fraction) std::snprintf(frac, sizeof(frac), "%.17g", *r.conv.fraction);
    char timing[140] = ",,";
    if (r.timing) {
      std::snprintf(timing, sizeof(timing), "%.17g,%.17g,%.17g", r.timing->scratch_seconds,
                    r.timing->mashup_seconds, r.timing->ratio);
    }
    std::snprintf(buf, sizeof(buf), "%s,%s,%llu,%.17g,%.17g,%.17g,%.17g,%.17g,%s,%s,%.17g,%.17g,%.17g,%s\n",
                  r.task.c_str(), r.method.c_str(), static_cast<unsigned long long>(r.seed), r.lr,
                  r.final_accuracy, r.init_accuracy, r.conv.converged_acc_scratch,
                  r.conv.threshold, steps.c_str(), frac, r.phases.score_s, r.phases.merge_s,
                  r.phases.train_s, timing);
    out += buf;
  }
  return out;
}

namespace {

std::string format_cell(std::optional<double> value, bool best, int decimals) {
  if (!value) return "---";
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, *value);
  return best ? "**" + std::string(buf) + "**" : std::string(buf);
}

// One paper-style table: methods as rows, tasks + Avg. as columns.
std::string markdown_table(
    const BenchmarkReport& report, const std::string& title, bool higher_is_better, int decimals,
    const std::function<std::optional<double>(const std::string&, const std::string&)>& cell,
    const std::function<std::optional<double>(const std::string&)>& grand) {
  std::string out = "### " + title + "\n\n| Method |";
  for (const auto& t : report.tasks) out += " " + t + " |";
  out += " Avg. |\n|---|";
  for (std::size_t i = 0; i <= report.tasks.size(); ++i) out += "---|";
  out += "\n";

  auto best_of = [&](const std::function<std::optional<double>(const std::string&)>& get) {
    std::optional<double> best;
    for (const auto& m : report.methods) {
      const auto v = get(m);
      if (!v) continue;
      if (!best || (higher_is_better ? *v > *best : *v < *best)) best = *v;
    }
    return best;
  };

  std::vector<std::optional<double>> col_best;
  for (const auto& t : report.tasks) {
    col_best.push_back(best_of([&](const std::string& m) { return cell(t, m); }));
  }
  const auto grand_best = best_of(grand);

  for (const auto& m : report.methods) {
    out += "| " + m + " |";
    for (std::size_t ti = 0; ti < report.tasks.size(); ++ti) {
      const auto v = cell(report.tasks[ti], m);
      const bool is_best = v && col_best[ti] && *v == *col_best[ti];
      out += " " + format_cell(v, is_best, decimals) + " |";
    }
    const auto g = grand(m);
    const bool is_best = g && grand_best && *g == *grand_best;
    out += " " + format_cell(g, is_best, decimals) + " |\n";
  }
  return out + "\n";
}

}  // namespace

std::string BenchmarkReport::to_markdown() const {
  std::string out;
  out += markdown_table(
      *this, "Final accuracy (%)", /*higher_is_better=*/true, 2,
      [this](const std::string& t, const std::string& m) -> std::optional<double> {
        const auto a = mean_accuracy(t, m);
        if (!a) return std::nullopt;
        return 100.0 * *a;
      },
      [this](const std::string& m) -> std::optional<double> {
        const auto a = grand_mean_accuracy(m);
        if (!a) return std::nullopt;
        return 100.0 * *a;
      });
  out += markdown_table(
      *this, "Convergence fraction (% of steps to 99% of scratch accuracy)",
      /*higher_is_better=*/false, 1,
      [this](const std::string& t, const std::string& m) -> std::optional<double> {
        const auto f = mean_fraction(t, m);
        if (!f) return std::nullopt;
        return 100.0 * *f;
      },
      [this](const std::string& m) -> std::optional<double> {
        const auto f = grand_mean_fraction(m);
        if (!f) return std::nullopt;
        return 100.0 * *f;
      });

  bool any_timing = false;
  for (const auto& r : rows) any_timing = any_timing || r.timing.has_value();
  if (any_timing) {
    out += markdown_table(
        *this, "Overhead-inclusive wall clock (% of scratch)", /*higher_is_better=*/false, 1,
        [this](const std::string& t, const std::string& m) { return mean_ratio(t, m); },
        [this](const std::string& m) { return grand_mean_ratio(m); });
  }
  return out;
}

ReportFormat report_format_from_string(const std::string& s) {
  if (s == "json") return ReportFormat::json;
  if (s == "csv") return ReportFormat::csv;
  if (s == "markdown" || s == "md") return ReportFormat::markdown;
  throw std::invalid_argument("unknown report format '" + s + "'");
}

void emit_report(const BenchmarkReport& report, ReportFormat format,
                 const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  switch (format) {
    case ReportFormat::json: out << report.to_json().dump(2) << "\n"; break;
    case ReportFormat::csv: out << report.to_csv(); break;
    case ReportFormat::markdown: out << report.to_markdown(); break;
  }
  if (!out) throw FormatError("write failed for " + path.string());
}

LrSweepResult lr_sweep(const SuiteContext& ctx, const std::vector<BenchMethodSpec>& methods,
                       const std::vector<double>& lr_grid,
                       const std::vector<std::uint64_t>& seeds, int workers) {
  LrSweepResult result;
  result.lr_grid = lr_grid;
  const std::size_t n_tasks = ctx.suite.specs.size();

  for (const auto& method : methods) {
    std::vector<double> curve(lr_grid.size(), 0.0);
    if (method.is_scratch) {
      if (lr_grid != ctx.lr_grid || seeds != ctx.seeds) {
        throw SetupError("lr_sweep: scratch rows need the prepared grid and seeds");
      }
      for (std::size_t li = 0; li < lr_grid.size(); ++li) {
        double sum = 0.0;
        for (std::size_t t = 0; t < n_tasks; ++t) {
          for (std::size_t si = 0; si < seeds.size(); ++si) {
            sum += ctx.scratch_runs[t][li * seeds.size() + si].report.final_val_accuracy;
          }
        }
        curve[li] = sum / static_cast<double>(n_tasks * seeds.size());
      }
    } else {
      for (std::size_t t = 0; t < n_tasks; ++t) {
        const auto cells = run_method_cells(ctx, static_cast<int>(t), method, lr_grid, seeds,
                                            /*n_samples_override=*/0, workers);
        for (std::size_t li = 0; li < lr_grid.size(); ++li) {
          for (std::size_t si = 0; si < seeds.size(); ++si) {
            curve[li] += cells[li * seeds.size() + si].report.final_val_accuracy;
          }
        }
      }
      for (double& c : curve) c /= static_cast<double>(n_tasks * seeds.size());
    }
    result.curves.emplace_back(method.label, std::move(curve));
  }
  return result;
}

json LrSweepResult::to_json() const {
  json curves_json;
  for (const auto& [label, curve] : curves) curves_json[label] = curve;
  return json{{"lr_grid", lr_grid}, {"curves", curves_json}};
}

EvalSizeResult eval_size_sweep(const SuiteContext& ctx, const std::vector<int>& sizes,
                               const std::vector<std::uint64_t>& seeds, double lr, int workers) {
  EvalSizeResult result;
  result.sizes = sizes;
  const std::size_t n_tasks = ctx.suite.specs.size();

  BenchMethodSpec method = parse_method("mean-k2");
  const std::vector<double> one_lr{lr};

  for (int size : sizes) {
    double sum = 0.0;
    for (std::size_t t = 0; t < n_tasks; ++t) {
      const auto cells =
          run_method_cells(ctx, static_cast<int>(t), method, one_lr, seeds, size, workers);
      for (std::size_t si = 0; si < seeds.size(); ++si) {
        const double acc = cells[si].report.final_val_accuracy;
        result.rows.emplace_back(ctx.suite.specs[t].name, seeds[si], size, acc);
        sum += acc;
      }
    }
    result.mean_accuracy.push_back(sum / static_cast<double>(n_tasks * seeds.size()));
  }
  return result;
}

json EvalSizeResult::to_json() const {
  json rows_json = json::array();
  for (const auto& [task, seed, size, acc] : rows) {
    rows_json.push_back(
        json{{"task", task}, {"seed", seed}, {"n_samples", size}, {"accuracy", acc}});
  }
  return json{{"sizes", sizes}, {"mean_accuracy", mean_accuracy}, {"rows", rows_json}};
}

}  // namespace mashup
