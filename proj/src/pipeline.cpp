#include "mashup/pipeline.hpp"

#include "mashup/errors.hpp"
#include "mashup/rng.hpp"

#include <chrono>
#include <cmath>

namespace mashup {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

SelectionReport make_selection_report(std::vector<RelevanceScore> scores,
                                      std::vector<std::string> selected) {
  SelectionReport report;
  report.scores = std::move(scores);
  report.selected = std::move(selected);
  if (!report.scores.empty()) {
    double lo = report.scores[0].value;
    double hi = report.scores[0].value;
    double mean_abs = 0.0;
    for (const auto& s : report.scores) {
      lo = std::min(lo, s.value);
      hi = std::max(hi, s.value);
      mean_abs += std::abs(s.value);
    }
    mean_abs /= static_cast<double>(report.scores.size());
    report.relevance_spread = hi - lo;
    report.low_spread = report.relevance_spread < 0.02 * mean_abs;
  }
  return report;
}

Model model_for_init(const RunContext& ctx, const CheckpointRecord& record) {
  const NamedParamSet* base = ctx.base != nullptr ? &ctx.base->params : nullptr;
  return model_from_record(ctx.arch, record, base);
}

RunReport finish_run(const RunContext& ctx, const PipelineConfig& cfg, Model& model,
                     SelectionReport selection, PhaseTimings timings) {
  RunReport report;
  report.config_echo = cfg.to_json();
  report.selection = std::move(selection);
  report.init_val_accuracy = evaluate(model, ctx.task->val, Metric::accuracy);

  const auto t0 = Clock::now();
  report.trajectory = train(model, ctx.task->train, ctx.task->val, cfg.train_cfg);
  timings.train_s = cfg.time_phases ? seconds_since(t0) : 0.0;

  report.timings = timings;
  report.final_val_accuracy = report.trajectory.points.back().val_accuracy;
  return report;
}

json timings_to_json(const PhaseTimings& t) {
  return json{{"score_s", t.score_s}, {"merge_s", t.merge_s}, {"train_s", t.train_s}};
}

json trajectory_to_json(const TrainTrajectory& traj) {
  json points = json::array();
  for (const auto& p : traj.points) {
    points.push_back(
        json{{"step", p.step}, {"train_loss", p.train_loss}, {"val_accuracy", p.val_accuracy}});
  }
  return json{{"points", points}, {"total_steps", traj.total_steps}};
}

}  // namespace

json PipelineConfig::to_json() const {
  return json{{"policy",
               json{{"kind", to_string(policy.kind)},
                    {"k", policy.k},
                    {"n_samples", policy.n_samples},
                    {"random_seed", policy.random_seed}}},
              {"recipe", recipe.to_json()},
              {"train",
               json{{"mode", to_string(train_cfg.mode)},
                    {"learning_rate", train_cfg.learning_rate},
                    {"seed", train_cfg.seed},
                    {"batch_size", train_cfg.batch_size},
                    {"epochs", train_cfg.epochs}}},
              {"metric", to_string(metric)},
              {"subset_seed", subset_seed},
              {"time_phases", time_phases}};
}

json RunReport::to_json() const {
  json scores = json::array();
  for (const auto& s : selection.scores) {
    scores.push_back(json{{"checkpoint_id", s.checkpoint_id},
                          {"metric", to_string(s.metric)},
                          {"value", s.value},
                          {"n_samples", s.n_samples},
                          {"subset_seed", s.subset_seed}});
  }
  return json{{"config", config_echo},
              {"task", task_name},
              {"selected", selection.selected},
              {"scores", scores},
              {"relevance_spread", selection.relevance_spread},
              {"low_spread", selection.low_spread},
              {"timings", timings_to_json(timings)},
              {"trajectory", trajectory_to_json(trajectory)},
              {"final",
               json{{"init_val_accuracy", init_val_accuracy},
                    {"final_val_accuracy", final_val_accuracy}}}};
}

MashupInitResult mashup_init(const RunContext& ctx, const PipelineConfig& cfg, int workers) {
  if (ctx.task == nullptr) throw std::invalid_argument("mashup_init: no task data");
  if (ctx.library.empty()) throw SetupError("mashup_init: the checkpoint library is empty");
  if (cfg.recipe.k != cfg.policy.k) {
    throw std::invalid_argument("mashup_init: recipe.k must equal policy.k");
  }

  MashupInitResult result;
  const NamedParamSet* base_params = ctx.base != nullptr ? &ctx.base->params : nullptr;

  const auto t_score = Clock::now();
  std::vector<RelevanceScore> scores =
      score_library(ctx.library, ctx.arch, base_params, *ctx.task, cfg.metric,
                    cfg.policy.n_samples, cfg.subset_seed, workers);
  if (cfg.time_phases) result.timings.score_s = seconds_since(t_score);

  std::vector<std::string> selected;
  if (cfg.policy.kind == SelectionPolicy::Kind::oracle) {
    OracleConfig oracle_cfg;
    oracle_cfg.mode = cfg.oracle_mode;
    oracle_cfg.train_cfg = cfg.train_cfg;
    selected = oracle_select(ctx.library, ctx.arch, ctx.base, *ctx.task, cfg.policy.k,
                             cfg.recipe, oracle_cfg, cfg.policy.n_samples, cfg.subset_seed,
                             workers);
  } else {
    selected = rank_and_select(scores, cfg.policy);
  }

  const auto t_merge = Clock::now();
  std::vector<const CheckpointRecord*> picked;
  for (const auto& id : selected) {
    const CheckpointRecord* found = nullptr;
    for (const auto* r : ctx.library) {
      if (r->id == id) found = r;
    }
    if (found == nullptr) throw SetupError("selected checkpoint '" + id + "' not in library");
    picked.push_back(found);
  }
  const Dataset subset = sample_eval_subset(*ctx.task, cfg.policy.n_samples, cfg.subset_seed);
  MergeContext merge_ctx;
  merge_ctx.arch = ctx.arch;
  merge_ctx.base = ctx.base;
  merge_ctx.stats_samples = &subset;
  merge_ctx.stats_seed = derive_seed(cfg.subset_seed, {fnv1a64("merge-stats")});
  result.merged = merge_checkpoints(picked, cfg.recipe, merge_ctx);
  if (cfg.time_phases) result.timings.merge_s = seconds_since(t_merge);

  result.selection = make_selection_report(std::move(scores), std::move(selected));
  return result;
}

RunReport mashup_run(const RunContext& ctx, const PipelineConfig& cfg, int workers) {
  MashupInitResult init = mashup_init(ctx, cfg, workers);
  Model model = model_for_init(ctx, init.merged);
  return finish_run(ctx, cfg, model, std::move(init.selection), init.timings);
}

RunReport baseline_run(const RunContext& ctx, const PipelineConfig& cfg,
                       const BaselineInit& init) {
  if (ctx.task == nullptr) throw std::invalid_argument("baseline_run: no task data");

  Model model;
  if (init.kind == BaselineInit::Kind::sequential) {
    const CheckpointRecord* found = nullptr;
    for (const auto* r : ctx.library) {
      if (r->id == init.checkpoint_id) found = r;
    }
    if (found == nullptr) {
      throw SetupError("sequential baseline: checkpoint '" + init.checkpoint_id +
                       "' not in library");
    }
    model = model_for_init(ctx, *found);
  } else if (ctx.mode == TrainMode::lora) {
    if (ctx.base == nullptr) throw SetupError("lora baseline requires a base checkpoint");
    LoraConfig lora;
    model = init_model(ctx.arch, TrainMode::lora, ScratchInit{cfg.train_cfg.seed}, lora,
                       &ctx.base->params);
  } else if (ctx.base != nullptr) {
    model = init_model(ctx.arch, TrainMode::full, FromParams{&ctx.base->params});
  } else {
    model = init_model(ctx.arch, TrainMode::full, ScratchInit{cfg.train_cfg.seed});
  }

  return finish_run(ctx, cfg, model, SelectionReport{}, PhaseTimings{});
}

}  // namespace mashup
