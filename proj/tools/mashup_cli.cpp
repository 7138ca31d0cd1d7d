// mashup: select relevant checkpoints for a task, merge them, and train from
// the merged initialization. Subcommands cover suite generation, training,
// scoring, merging, the full pipeline, the oracle, and the benchmark sweeps.

#include "mashup/bench.hpp"
#include "mashup/errors.hpp"
#include "mashup/parallel.hpp"
#include "mashup/rng.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>

namespace {

using namespace mashup;
using nlohmann::json;

namespace fs = std::filesystem;

struct GlobalOpts {
  std::string library;
  std::uint64_t seed = 0;
  int workers = default_workers();
  std::string report;
  std::string format = "json";
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path);
  out << text;
}

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t comma = text.find(',', pos);
    const std::string tok = text.substr(pos, comma == std::string::npos ? comma : comma - pos);
    seeds.push_back(std::stoull(tok));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (seeds.empty()) throw std::invalid_argument("empty seed list");
  return seeds;
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> grid;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t comma = text.find(',', pos);
    grid.push_back(std::stod(text.substr(pos, comma == std::string::npos ? comma : comma - pos)));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (grid.empty()) throw std::invalid_argument("empty LR grid");
  return grid;
}

std::vector<int> parse_sizes(const std::string& text) {
  std::vector<int> sizes;
  for (double v : parse_grid(text)) sizes.push_back(static_cast<int>(v));
  return sizes;
}

// Loads the library directory, splitting off the base checkpoint.
struct LoadedLibrary {
  std::vector<CheckpointRecord> records;
  CheckpointRecord base;
  bool has_base = false;

  std::vector<const CheckpointRecord*> candidates(const std::string& exclude_task) const {
    std::vector<const CheckpointRecord*> out;
    for (const auto& r : records) {
      if (!exclude_task.empty() && r.task_name == exclude_task) continue;
      out.push_back(&r);
    }
    return out;
  }
};

LoadedLibrary load_library_dir(const std::string& dir, const std::string& base_id) {
  if (dir.empty()) throw SetupError("--library is required for this subcommand");
  LoadedLibrary lib;
  for (auto& record : load_library(dir)) {
    if (record.id == base_id) {
      lib.base = std::move(record);
      lib.has_base = true;
    } else {
      lib.records.push_back(std::move(record));
    }
  }
  return lib;
}

// Creates the shared base checkpoint in the library when absent.
CheckpointRecord ensure_base(const std::string& dir, const std::string& base_id,
                             const ModelArch& arch, std::uint64_t root_seed) {
  if (fs::exists(fs::path(dir) / "library.json")) {
    const LibraryIndex index = read_library_index(dir);
    if (index.find(base_id) != nullptr) return load_from_library(dir, base_id);
  }
  const Model model =
      init_model(arch, TrainMode::full, ScratchInit{derive_seed(root_seed, {fnv1a64("base")})});
  CheckpointRecord base;
  base.id = base_id;
  base.kind = CheckpointKind::full;
  base.task_name = "__pretrain__";
  base.params = export_params(model);
  base.train_config_hash = hash_hex("{\"init\":\"base\"}");
  add_to_library(dir, base, /*overwrite=*/false);
  return base;
}

SuiteContext prepare_context(const std::string& suite_path, const GlobalOpts& g, TrainMode mode,
                             const std::vector<double>& lr_grid,
                             const std::vector<std::uint64_t>& seeds) {
  const TaskSuite suite = load_suite(suite_path);
  return prepare_suite_context(suite, mode, lr_grid, seeds, g.seed, g.workers);
}

int run_dispatch(int argc, char** argv) {
  CLI::App app{"Mashup Learning: recycle historical checkpoints as finetuning initializations"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--library", g.library, "Checkpoint library directory");
  app.add_option("--seed", g.seed, "Root seed (MASHUP_SEED env overrides)");
  app.add_option("--workers", g.workers, "Worker thread count");
  app.add_option("--report", g.report, "Write a machine-readable report here");
  app.add_option("--format", g.format, "Report format: json, csv, markdown");

  // suite gen
  auto* suite_cmd = app.add_subcommand("suite", "Synthetic task suite commands");
  auto* suite_gen = suite_cmd->add_subcommand("gen", "Generate a task suite");
  int gen_tasks = 8, gen_meta = 4;
  double gen_overlap = 0.6;
  std::string gen_out = "suite.json";
  suite_gen->add_option("--tasks", gen_tasks, "Number of tasks");
  suite_gen->add_option("--meta", gen_meta, "Number of shared meta-teachers");
  suite_gen->add_option("--overlap", gen_overlap, "Pool mass shared by each task");
  suite_gen->add_option("--out", gen_out, "Output path");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train one task and save the checkpoint");
  std::string tr_suite, tr_task, tr_mode = "full", tr_init = "base", tr_id, tr_base = "base";
  double tr_lr = 0.0;
  bool tr_overwrite = false;
  train_cmd->add_option("--suite", tr_suite, "Suite JSON")->required();
  train_cmd->add_option("--task", tr_task, "Task name")->required();
  train_cmd->add_option("--mode", tr_mode, "full or lora");
  train_cmd->add_option("--lr", tr_lr, "Peak learning rate (default: grid midpoint)");
  train_cmd->add_option("--init", tr_init, "base | scratch | <checkpoint id>");
  train_cmd->add_option("--base", tr_base, "Base checkpoint id");
  train_cmd->add_option("--save-as", tr_id, "Checkpoint id (default <task>-<mode>)");
  train_cmd->add_flag("--overwrite", tr_overwrite, "Replace an existing checkpoint");

  // score
  auto* score_cmd = app.add_subcommand("score", "Score library checkpoints on a task");
  std::string sc_suite, sc_task, sc_metric = "loss", sc_base = "base";
  int sc_samples = 256;
  score_cmd->add_option("--suite", sc_suite, "Suite JSON")->required();
  score_cmd->add_option("--task", sc_task, "Target task")->required();
  score_cmd->add_option("--metric", sc_metric, "loss or accuracy");
  score_cmd->add_option("--samples", sc_samples, "Selection subset size");
  score_cmd->add_option("--base", sc_base, "Base checkpoint id");

  // merge
  auto* merge_cmd = app.add_subcommand("merge", "Merge named checkpoints");
  std::string mg_ids, mg_method = "mean", mg_out, mg_base = "base", mg_suite, mg_task;
  double mg_p = 0.9, mg_density = 0.2, mg_gamma = 0.9, mg_ridge = 1e-4;
  int mg_samples = 256;
  merge_cmd->add_option("--ids", mg_ids, "Comma-separated checkpoint ids")->required();
  merge_cmd->add_option("--method", mg_method, "mean|dare|ties|dare-ties|fisher|regmean");
  merge_cmd->add_option("--out", mg_out, "Output .mash path")->required();
  merge_cmd->add_option("--base", mg_base, "Base checkpoint id");
  merge_cmd->add_option("--p", mg_p, "DARE drop probability");
  merge_cmd->add_option("--density", mg_density, "TIES trim density");
  merge_cmd->add_option("--gamma", mg_gamma, "RegMean off-diagonal scale");
  merge_cmd->add_option("--ridge", mg_ridge, "RegMean ridge");
  merge_cmd->add_option("--suite", mg_suite, "Suite JSON (fisher/regmean statistics)");
  merge_cmd->add_option("--task", mg_task, "Task providing statistics samples");
  merge_cmd->add_option("--samples", mg_samples, "Statistics sample count");

  // run
  auto* run_cmd = app.add_subcommand("run", "Full pipeline: score, select, merge, train");
  std::string rn_suite, rn_task, rn_mode = "full", rn_method = "mean", rn_metric = "loss",
              rn_base = "base", rn_policy;
  int rn_k = 2, rn_samples = 256;
  double rn_lr = 0.0;
  run_cmd->add_option("--suite", rn_suite, "Suite JSON")->required();
  run_cmd->add_option("--task", rn_task, "Target task")->required();
  run_cmd->add_option("--mode", rn_mode, "full or lora");
  run_cmd->add_option("--k", rn_k, "Checkpoints to merge");
  run_cmd->add_option("--method", rn_method, "Merge method");
  run_cmd->add_option("--metric", rn_metric, "Selection metric: loss or accuracy");
  run_cmd->add_option("--policy", rn_policy, "Selection policy (default: by the metric)");
  run_cmd->add_option("--samples", rn_samples, "Selection subset size");
  run_cmd->add_option("--lr", rn_lr, "Peak learning rate (default: grid midpoint)");
  run_cmd->add_option("--base", rn_base, "Base checkpoint id");

  // oracle
  auto* oracle_cmd = app.add_subcommand("oracle", "Exhaustive best-subset selection");
  std::string or_suite, or_task, or_mode = "full", or_method = "mean",
              or_budget = "full-train", or_base = "base";
  int or_k = 2, or_samples = 256;
  double or_lr = 0.0;
  oracle_cmd->add_option("--suite", or_suite, "Suite JSON")->required();
  oracle_cmd->add_option("--task", or_task, "Target task")->required();
  oracle_cmd->add_option("--mode", or_mode, "full or lora");
  oracle_cmd->add_option("--k", or_k, "Subset size");
  oracle_cmd->add_option("--method", or_method, "Merge method");
  oracle_cmd->add_option("--budget-mode", or_budget, "init-loss or full-train");
  oracle_cmd->add_option("--samples", or_samples, "Selection subset size");
  oracle_cmd->add_option("--lr", or_lr, "Training LR for full-train mode");
  oracle_cmd->add_option("--base", or_base, "Base checkpoint id");

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "Benchmark sweeps");
  auto* bench_loo = bench_cmd->add_subcommand("loo", "Leave-one-out benchmark");
  std::string bl_suite, bl_mode = "full", bl_methods = "scratch,mean-k2", bl_seeds = "0,1,2",
              bl_grid;
  bool bl_no_timing = false;
  bench_loo->add_option("--suite", bl_suite, "Suite JSON")->required();
  bench_loo->add_option("--mode", bl_mode, "full or lora");
  bench_loo->add_option("--methods", bl_methods, "Comma-separated method specs");
  bench_loo->add_option("--seeds", bl_seeds, "Comma-separated seeds");
  bench_loo->add_option("--lr-grid", bl_grid, "Comma-separated LRs (default: 5-point grid)");
  bench_loo->add_flag("--no-timing", bl_no_timing, "Disable phase clocks (deterministic output)");

  auto* bench_lr = bench_cmd->add_subcommand("lr-sweep", "Learning-rate sensitivity sweep");
  std::string lrs_suite, lrs_mode = "full", lrs_methods = "scratch,mean-k2", lrs_seeds = "0,1,2",
              lrs_grid;
  bench_lr->add_option("--suite", lrs_suite, "Suite JSON")->required();
  bench_lr->add_option("--mode", lrs_mode, "full or lora");
  bench_lr->add_option("--methods", lrs_methods, "Comma-separated method specs");
  bench_lr->add_option("--seeds", lrs_seeds, "Comma-separated seeds");
  bench_lr->add_option("--lr-grid", lrs_grid, "Comma-separated LRs (default: 5-point grid)");

  auto* bench_es = bench_cmd->add_subcommand("eval-size", "Selection sample-size sweep");
  std::string es_suite, es_mode = "full", es_sizes = "16,64,256,1024", es_seeds = "0,1,2";
  double es_lr = 0.0;
  bench_es->add_option("--suite", es_suite, "Suite JSON")->required();
  bench_es->add_option("--mode", es_mode, "full or lora");
  bench_es->add_option("--sizes", es_sizes, "Comma-separated subset sizes");
  bench_es->add_option("--seeds", es_seeds, "Comma-separated seeds");
  bench_es->add_option("--lr", es_lr, "Training LR (default: grid midpoint)");

  // Let global flags appear after the subcommand as well.
  const std::function<void(CLI::App*)> enable_fallthrough = [&](CLI::App* cmd) {
    for (auto* sub : cmd->get_subcommands({})) {
      sub->fallthrough();
      enable_fallthrough(sub);
    }
  };
  enable_fallthrough(&app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);  // usage text, exit 1 on errors / 0 on --help
  }

  if (const char* env = std::getenv("MASHUP_SEED")) {
    g.seed = std::stoull(env);
  }

  const auto grid_midpoint = [](TrainMode mode) { return default_lr_grid(mode)[2]; };

  if (*suite_gen) {
    const TaskSuite suite = generate_suite(gen_tasks, gen_meta, gen_overlap, g.seed);
    save_suite(suite, gen_out);
    std::cout << "wrote " << gen_out << " (" << suite.specs.size() << " tasks)\n";
    return 0;
  }

  if (*train_cmd) {
    const TaskSuite suite = load_suite(tr_suite);
    const TaskSpec& spec = suite.spec(tr_task);
    const TaskData data = realize_task(spec);
    const ModelArch arch = default_arch(spec.input_dim, spec.n_classes);
    const TrainMode mode = train_mode_from_string(tr_mode);
    if (tr_lr <= 0.0) tr_lr = grid_midpoint(mode);

    CheckpointRecord base = ensure_base(g.library, tr_base, arch, g.seed);

    Model model;
    std::string base_id;
    if (tr_init == "scratch" && mode == TrainMode::full) {
      model = init_model(arch, TrainMode::full, ScratchInit{g.seed});
    } else if (tr_init == "base" || (tr_init == "scratch" && mode == TrainMode::lora)) {
      if (mode == TrainMode::lora) {
        model = init_model(arch, TrainMode::lora, ScratchInit{g.seed}, LoraConfig{}, &base.params);
      } else {
        model = init_model(arch, TrainMode::full, FromParams{&base.params});
      }
      base_id = base.id;
    } else {
      const CheckpointRecord prior = load_from_library(g.library, tr_init);
      model = model_from_record(arch, prior, &base.params);
      base_id = prior.base_id.empty() ? base.id : prior.base_id;
    }

    TrainConfig cfg;
    cfg.mode = mode;
    cfg.learning_rate = tr_lr;
    cfg.seed = g.seed;
    TrainTrajectory traj = train(model, data.train, data.val, cfg);

    CheckpointRecord record = std::move(traj.final);
    record.id = tr_id.empty() ? tr_task + "-" + tr_mode : tr_id;
    record.task_name = tr_task;
    record.base_id = base_id;
    add_to_library(g.library, record, tr_overwrite);

    json summary{{"id", record.id},
                 {"task", tr_task},
                 {"final_val_accuracy", traj.points.back().val_accuracy},
                 {"steps", traj.total_steps},
                 {"wall_clock_seconds", traj.wall_clock_seconds}};
    std::cout << summary.dump(2) << "\n";
    if (!g.report.empty()) write_json(g.report, summary);
    return 0;
  }

  if (*score_cmd) {
    const TaskSuite suite = load_suite(sc_suite);
    const TaskSpec& spec = suite.spec(sc_task);
    const TaskData data = realize_task(spec);
    const ModelArch arch = default_arch(spec.input_dim, spec.n_classes);
    const LoadedLibrary lib = load_library_dir(g.library, sc_base);

    const auto candidates = lib.candidates(sc_task);
    if (candidates.empty()) throw SetupError("no scoreable checkpoints in the library");
    const auto scores = score_library(candidates, arch, lib.has_base ? &lib.base.params : nullptr,
                                      data, metric_from_string(sc_metric), sc_samples,
                                      derive_seed(g.seed, {fnv1a64(sc_task), fnv1a64("subset")}),
                                      g.workers);
    const std::string csv = scores_to_csv(scores);
    std::cout << csv;
    if (!g.report.empty()) write_text(g.report, csv);
    return 0;
  }

  if (*merge_cmd) {
    const LoadedLibrary lib = load_library_dir(g.library, mg_base);
    std::vector<const CheckpointRecord*> picked;
    std::size_t pos = 0;
    while (pos < mg_ids.size()) {
      const std::size_t comma = mg_ids.find(',', pos);
      const std::string id =
          mg_ids.substr(pos, comma == std::string::npos ? comma : comma - pos);
      const CheckpointRecord* found = nullptr;
      for (const auto& r : lib.records) {
        if (r.id == id) found = &r;
      }
      if (found == nullptr) throw SetupError("library has no checkpoint '" + id + "'");
      picked.push_back(found);
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }

    MergeRecipe recipe;
    recipe.method = merge_method_from_string(mg_method);
    recipe.k = static_cast<int>(picked.size());
    recipe.dare_p = mg_p;
    recipe.ties_density = mg_density;
    recipe.regmean_gamma = mg_gamma;
    recipe.regmean_ridge = mg_ridge;
    recipe.rng_seed = g.seed;
    recipe.base_id = mg_base;

    Dataset stats;
    MergeContext ctx;
    ctx.arch = default_arch();
    ctx.base = lib.has_base ? &lib.base : nullptr;
    if (!mg_suite.empty() && !mg_task.empty()) {
      const TaskSuite suite = load_suite(mg_suite);
      const TaskSpec& spec = suite.spec(mg_task);
      ctx.arch = default_arch(spec.input_dim, spec.n_classes);
      const TaskData data = realize_task(spec);
      stats = sample_eval_subset(data, mg_samples,
                                 derive_seed(g.seed, {fnv1a64(mg_task), fnv1a64("subset")}));
      ctx.stats_samples = &stats;
      ctx.stats_seed = derive_seed(g.seed, {fnv1a64("merge-stats")});
    }

    CheckpointRecord merged = merge_checkpoints(picked, recipe, ctx);
    save_checkpoint(merged, mg_out, /*overwrite=*/true);
    std::cout << "wrote " << mg_out << " (method " << mg_method << ", k=" << recipe.k << ")\n";
    if (!g.report.empty()) write_json(g.report, recipe.to_json());
    return 0;
  }

  if (*run_cmd || *oracle_cmd) {
    const bool is_oracle_cmd = static_cast<bool>(*oracle_cmd);
    const std::string& suite_path = is_oracle_cmd ? or_suite : rn_suite;
    const std::string& task = is_oracle_cmd ? or_task : rn_task;
    const std::string& mode_str = is_oracle_cmd ? or_mode : rn_mode;
    const std::string& base_id = is_oracle_cmd ? or_base : rn_base;

    const TaskSuite suite = load_suite(suite_path);
    const TaskSpec& spec = suite.spec(task);
    const TaskData data = realize_task(spec);
    const ModelArch arch = default_arch(spec.input_dim, spec.n_classes);
    const TrainMode mode = train_mode_from_string(mode_str);
    const LoadedLibrary lib = load_library_dir(g.library, base_id);
    if (!lib.has_base) throw SetupError("library has no base checkpoint '" + base_id + "'");

    RunContext run_ctx;
    run_ctx.arch = arch;
    run_ctx.mode = mode;
    run_ctx.base = &lib.base;
    run_ctx.library = lib.candidates(task);  // leave-one-out: own checkpoints excluded
    run_ctx.task = &data;

    PipelineConfig cfg;
    cfg.policy.k = is_oracle_cmd ? or_k : rn_k;
    cfg.policy.n_samples = is_oracle_cmd ? or_samples : rn_samples;
    cfg.recipe.method = merge_method_from_string(is_oracle_cmd ? or_method : rn_method);
    cfg.recipe.k = cfg.policy.k;
    cfg.recipe.rng_seed = g.seed;
    cfg.recipe.base_id = base_id;
    cfg.subset_seed = derive_seed(g.seed, {fnv1a64(task), fnv1a64("subset")});
    cfg.train_cfg.mode = mode;
    cfg.train_cfg.seed = derive_seed(g.seed, {fnv1a64(task), fnv1a64("train")});
    double lr = is_oracle_cmd ? or_lr : rn_lr;
    cfg.train_cfg.learning_rate = lr > 0.0 ? lr : grid_midpoint(mode);

    if (is_oracle_cmd) {
      cfg.policy.kind = SelectionPolicy::Kind::oracle;
      cfg.oracle_mode = or_budget == "init-loss" ? OracleConfig::BudgetMode::init_loss
                                                 : OracleConfig::BudgetMode::full_train;
    } else if (!rn_policy.empty()) {
      cfg.policy.kind = selection_kind_from_string(rn_policy);
      cfg.policy.random_seed = derive_seed(g.seed, {fnv1a64(task), fnv1a64("random-policy")});
    } else {
      cfg.metric = metric_from_string(rn_metric);
      cfg.policy.kind = cfg.metric == Metric::accuracy ? SelectionPolicy::Kind::by_accuracy
                                                       : SelectionPolicy::Kind::by_loss;
    }

    const RunReport report = [&] {
      RunReport r = mashup_run(run_ctx, cfg, g.workers);
      r.task_name = task;
      return r;
    }();

    json out = report.to_json();
    std::cout << out.dump(2) << "\n";
    if (!g.report.empty()) write_json(g.report, out);
    return 0;
  }

  if (*bench_loo) {
    const TrainMode mode = train_mode_from_string(bl_mode);
    const auto seeds = parse_seeds(bl_seeds);
    const auto grid = bl_grid.empty() ? default_lr_grid(mode) : parse_grid(bl_grid);
    const TaskSuite suite = load_suite(bl_suite);
    SuiteContext ctx =
        prepare_suite_context(suite, mode, grid, seeds, g.seed, g.workers, !bl_no_timing);

    std::vector<BenchMethodSpec> methods;
    std::size_t pos = 0;
    while (pos < bl_methods.size()) {
      const std::size_t comma = bl_methods.find(',', pos);
      methods.push_back(parse_method(
          bl_methods.substr(pos, comma == std::string::npos ? comma : comma - pos)));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }

    const BenchmarkReport report = loo_benchmark(ctx, methods, seeds, grid, g.workers);
    if (!g.report.empty()) {
      emit_report(report, report_format_from_string(g.format), g.report);
      std::cout << "wrote " << g.report << "\n";
    } else {
      std::cout << report.to_markdown();
    }
    return 0;
  }

  if (*bench_lr) {
    const TrainMode mode = train_mode_from_string(lrs_mode);
    const auto seeds = parse_seeds(lrs_seeds);
    const auto grid = lrs_grid.empty() ? default_lr_grid(mode) : parse_grid(lrs_grid);
    SuiteContext ctx = prepare_context(lrs_suite, g, mode, grid, seeds);

    std::vector<BenchMethodSpec> methods;
    std::size_t pos = 0;
    while (pos < lrs_methods.size()) {
      const std::size_t comma = lrs_methods.find(',', pos);
      methods.push_back(parse_method(
          lrs_methods.substr(pos, comma == std::string::npos ? comma : comma - pos)));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }

    const LrSweepResult result = lr_sweep(ctx, methods, grid, seeds, g.workers);
    const json out = result.to_json();
    std::cout << out.dump(2) << "\n";
    if (!g.report.empty()) write_json(g.report, out);
    return 0;
  }

  if (*bench_es) {
    const TrainMode mode = train_mode_from_string(es_mode);
    const auto seeds = parse_seeds(es_seeds);
    const auto grid = default_lr_grid(mode);
    SuiteContext ctx = prepare_context(es_suite, g, mode, grid, seeds);
    const double lr = es_lr > 0.0 ? es_lr : grid_midpoint(mode);

    const EvalSizeResult result = eval_size_sweep(ctx, parse_sizes(es_sizes), seeds, lr, g.workers);
    const json out = result.to_json();
    std::cout << out.dump(2) << "\n";
    if (!g.report.empty()) write_json(g.report, out);
    return 0;
  }

  std::cerr << app.help() << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_dispatch(argc, argv);
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
