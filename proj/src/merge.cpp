#include "mashup/merge.hpp"

#include "mashup/errors.hpp"
#include "mashup/rng.hpp"

#include <algorithm>
#include <cmath>

namespace mashup {

using nlohmann::json;

std::string to_string(MergeMethod method) {
  switch (method) {
    case MergeMethod::mean: return "mean";
    case MergeMethod::dare: return "dare";
    case MergeMethod::ties: return "ties";
    case MergeMethod::dare_ties: return "dare-ties";
    case MergeMethod::fisher: return "fisher";
    case MergeMethod::regmean: return "regmean";
  }
  return "mean";
}

MergeMethod merge_method_from_string(const std::string& s) {
  if (s == "mean") return MergeMethod::mean;
  if (s == "dare") return MergeMethod::dare;
  if (s == "ties") return MergeMethod::ties;
  if (s == "dare-ties" || s == "dare_ties") return MergeMethod::dare_ties;
  if (s == "fisher") return MergeMethod::fisher;
  if (s == "regmean") return MergeMethod::regmean;
  throw std::invalid_argument("unknown merge method '" + s + "'");
}

json MergeRecipe::to_json() const {
  return json{{"method", to_string(method)},
              {"k", k},
              {"dare_p", dare_p},
              {"ties_density", ties_density},
              {"regmean_gamma", regmean_gamma},
              {"regmean_ridge", regmean_ridge},
              {"rng_seed", rng_seed},
              {"base_id", base_id},
              {"lora_factor_average", lora_factor_average}};
}

MergeRecipe MergeRecipe::from_json(const json& j) {
  MergeRecipe r;
  r.method = merge_method_from_string(j.at("method").get<std::string>());
  r.k = j.at("k").get<int>();
  r.dare_p = j.value("dare_p", r.dare_p);
  r.ties_density = j.value("ties_density", r.ties_density);
  r.regmean_gamma = j.value("regmean_gamma", r.regmean_gamma);
  r.regmean_ridge = j.value("regmean_ridge", r.regmean_ridge);
  r.rng_seed = j.value("rng_seed", r.rng_seed);
  r.base_id = j.value("base_id", r.base_id);
  r.lora_factor_average = j.value("lora_factor_average", r.lora_factor_average);
  return r;
}

const Eigen::MatrixXd* GramStats::find(std::string_view layer) const {
  for (const auto& [name, g] : grams) {
    if (name == layer) return &g;
  }
  return nullptr;
}

NamedParamSet merge_mean(const std::vector<const NamedParamSet*>& sets) {
  if (sets.empty()) throw std::invalid_argument("merge_mean: no inputs");
  const std::vector<double> weights(sets.size(), 1.0 / static_cast<double>(sets.size()));
  return combine(sets, weights);
}

DeltaSet dare_sparsify(const DeltaSet& delta, double p, std::uint64_t seed) {
  if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("dare: p must lie in [0, 1)");
  const double rescale = 1.0 / (1.0 - p);
  Rng rng(derive_seed(seed, {fnv1a64("dare")}));
  DeltaSet out;
  out.base_id = delta.base_id;
  for (const auto& e : delta.deltas.entries) {
    Eigen::VectorXf values(e.values.size());
    for (Eigen::Index i = 0; i < values.size(); ++i) {
      values[i] = rng.uniform() < p ? 0.0f : static_cast<float>(e.values[i] * rescale);
    }
    out.deltas.add(e.spec, std::move(values));
  }
  return out;
}

DeltaSet merge_ties(const std::vector<const DeltaSet*>& deltas, double density) {
  if (!(density > 0.0 && density <= 1.0)) {
    throw std::invalid_argument("ties: density must lie in (0, 1]");
  }
  if (deltas.empty()) throw std::invalid_argument("ties: no inputs");
  for (std::size_t i = 1; i < deltas.size(); ++i) {
    require_compatible(deltas[0]->deltas, deltas[i]->deltas);
  }

  const std::size_t n_models = deltas.size();
  DeltaSet out;
  out.base_id = deltas[0]->base_id;

  for (std::size_t t = 0; t < deltas[0]->deltas.size(); ++t) {
    const Eigen::Index n = deltas[0]->deltas.entries[t].values.size();
    const std::size_t keep = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(density * static_cast<double>(n))));

    // Trim: keep the top `keep` elements of each model by |value| (per
    // tensor, ties kept), zero out the rest.
    std::vector<Eigen::VectorXf> kept(n_models);
    for (std::size_t m = 0; m < n_models; ++m) {
      const Eigen::VectorXf& v = deltas[m]->deltas.entries[t].values;
      std::vector<float> mags(static_cast<std::size_t>(n));
      for (Eigen::Index i = 0; i < n; ++i) mags[static_cast<std::size_t>(i)] = std::abs(v[i]);
      std::nth_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(keep - 1),
                       mags.end(), std::greater<float>());
      const float threshold = mags[keep - 1];
      kept[m] = Eigen::VectorXf(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        kept[m][i] = std::abs(v[i]) >= threshold ? v[i] : 0.0f;
      }
    }

    // Elect sign by magnitude-mass majority, then average the kept values
    // that match it; coordinates with no matching mass stay zero.
    Eigen::VectorXf merged(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      double mass = 0.0;
      for (std::size_t m = 0; m < n_models; ++m) mass += kept[m][i];
      const bool positive = mass >= 0.0;  // tie -> positive
      double sum = 0.0;
      int count = 0;
      for (std::size_t m = 0; m < n_models; ++m) {
        const float v = kept[m][i];
        if (v == 0.0f) continue;
        if ((v > 0.0f) == positive) {
          sum += v;
          ++count;
        }
      }
      merged[i] = count == 0 ? 0.0f : static_cast<float>(sum / count);
    }
    out.deltas.add(deltas[0]->deltas.entries[t].spec, std::move(merged));
  }
  return out;
}

DeltaSet merge_dare_ties(const std::vector<const DeltaSet*>& deltas,
                         std::span<const std::string> ids, const MergeRecipe& recipe) {
  if (deltas.size() != ids.size()) {
    throw std::invalid_argument("dare-ties: delta/id count mismatch");
  }
  std::vector<DeltaSet> dared;
  dared.reserve(deltas.size());
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    // Seeds follow checkpoint ids, not positions, so the merge is
    // permutation-equivariant in its inputs.
    const std::uint64_t seed = derive_seed(recipe.rng_seed, {fnv1a64(ids[i])});
    dared.push_back(dare_sparsify(*deltas[i], recipe.dare_p, seed));
  }
  std::vector<const DeltaSet*> ptrs;
  for (const auto& d : dared) ptrs.push_back(&d);
  return merge_ties(ptrs, recipe.ties_density);
}

namespace {

// Squared-gradient accumulation flattened in the canonical export order of
// the model's trainable tensors.
struct SquaredGrads {
  std::vector<Eigen::VectorXd> acc;  // one flat buffer per exported tensor
};

void accumulate_squares(const Model& model, const Gradients& grads, SquaredGrads& sq) {
  std::vector<Eigen::VectorXd> flat;
  const auto layers = model.arch.layers();
  auto push_matrix = [&flat](const Eigen::MatrixXd& m) {
    Eigen::MatrixXd rm = m.transpose();  // row-major flatten via transposed col-major walk
    flat.emplace_back(Eigen::Map<const Eigen::VectorXd>(rm.data(), rm.size()));
  };
  if (model.mode == TrainMode::full) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
      push_matrix(grads.weights[l]);
      flat.push_back(grads.biases[l]);
    }
  } else {
    const auto& targets = model.lora_cfg->target_modules;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      if (std::find(targets.begin(), targets.end(), layers[l].name) == targets.end()) continue;
      push_matrix(grads.lora_a[l]);
      push_matrix(grads.lora_b[l]);
    }
  }
  if (sq.acc.empty()) {
    for (const auto& f : flat) sq.acc.push_back(Eigen::VectorXd::Zero(f.size()));
  }
  for (std::size_t i = 0; i < flat.size(); ++i) {
    sq.acc[i] += flat[i].cwiseProduct(flat[i]);
  }
}

}  // namespace

FisherEstimate fisher_diagonal_estimate(const Model& model, const std::string& checkpoint_id,
                                        const Dataset& samples, int n, std::uint64_t seed) {
  if (n < 1 || n > samples.size()) {
    throw std::invalid_argument("fisher: n out of [1, " + std::to_string(samples.size()) + "]");
  }

  SquaredGrads sq;
  Gradients grads;
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd row = samples.features.row(i);
    const Eigen::MatrixXd x = row.transpose();
    const Eigen::MatrixXd logits = forward_logits(model, x);

    // Sample a label from the model's predictive distribution. The draw is
    // seeded from the feature bytes so identical samples always get the
    // identical label.
    Eigen::ArrayXd shifted = logits.row(0).transpose().array() - logits.row(0).maxCoeff();
    Eigen::ArrayXd probs = shifted.exp();
    probs /= probs.sum();
    Rng rng(derive_seed(seed, {fnv1a64(row.data(), sizeof(double) * row.size())}));
    const double u = rng.uniform();
    int label = 0;
    double cum = 0.0;
    for (Eigen::Index c = 0; c < probs.size(); ++c) {
      cum += probs[c];
      if (u < cum) {
        label = static_cast<int>(c);
        break;
      }
      label = static_cast<int>(c);  // guard against rounding at the top end
    }

    Dataset one;
    one.features = x;
    one.labels = Eigen::VectorXi::Constant(1, label);
    forward_backward(model, one, grads);  // d(-log p(label))/dtheta; squares match
    accumulate_squares(model, grads, sq);
  }

  const NamedParamSet layout = export_params(model);
  FisherEstimate est;
  est.checkpoint_id = checkpoint_id;
  est.n_samples = n;
  for (std::size_t i = 0; i < layout.entries.size(); ++i) {
    est.diag.add(layout.entries[i].spec, (sq.acc[i] / static_cast<double>(n)).cast<float>());
  }
  return est;
}

NamedParamSet merge_fisher(const std::vector<const NamedParamSet*>& sets,
                           const std::vector<const FisherEstimate*>& fishers,
                           std::size_t* zero_weight_coords) {
  if (sets.empty() || sets.size() != fishers.size()) {
    throw std::invalid_argument("merge_fisher: need one Fisher estimate per checkpoint");
  }
  for (std::size_t i = 1; i < sets.size(); ++i) require_compatible(*sets[0], *sets[i]);
  for (std::size_t i = 0; i < sets.size(); ++i) require_compatible(*sets[i], fishers[i]->diag);

  constexpr double kGuard = 1e-12;
  std::size_t zeros = 0;
  NamedParamSet out;
  for (std::size_t t = 0; t < sets[0]->size(); ++t) {
    const Eigen::Index n = sets[0]->entries[t].values.size();
    Eigen::VectorXd num = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd den = Eigen::VectorXd::Zero(n);
    for (std::size_t i = 0; i < sets.size(); ++i) {
      const Eigen::VectorXd f = fishers[i]->diag.entries[t].values.cast<double>();
      num += f.cwiseProduct(sets[i]->entries[t].values.cast<double>());
      den += f;
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      if (den[j] <= 0.0) ++zeros;
    }
    Eigen::VectorXd merged = num.array() / (den.array() + kGuard);
    out.add(sets[0]->entries[t].spec, merged.cast<float>());
  }
  if (zero_weight_coords != nullptr) *zero_weight_coords = zeros;
  return out;
}

GramStats capture_gram_stats(const Model& model, const std::string& checkpoint_id,
                             const Dataset& samples) {
  if (samples.size() == 0) throw std::invalid_argument("gram stats: empty sample set");
  const auto inputs = capture_layer_inputs(model, samples.features);
  const auto layers = model.arch.layers();
  GramStats stats;
  stats.checkpoint_id = checkpoint_id;
  stats.n_samples = static_cast<int>(samples.size());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    stats.grams.emplace_back(layers[l].name,
                             Eigen::MatrixXd(inputs[l].transpose() * inputs[l]));
  }
  return stats;
}

NamedParamSet merge_regmean(const std::vector<const NamedParamSet*>& sets,
                            const std::vector<const GramStats*>& grams,
                            const MergeRecipe& recipe) {
  if (sets.empty() || sets.size() != grams.size()) {
    throw std::invalid_argument("merge_regmean: need Gram statistics per checkpoint");
  }
  for (std::size_t i = 1; i < sets.size(); ++i) require_compatible(*sets[0], *sets[i]);
  const double gamma = recipe.regmean_gamma;
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw std::invalid_argument("merge_regmean: gamma out of [0, 1]");
  }

  NamedParamSet out;
  for (std::size_t t = 0; t < sets[0]->size(); ++t) {
    const TensorSpec& spec = sets[0]->entries[t].spec;
    const bool is_weight =
        spec.shape.size() == 2 && spec.name.size() > 7 &&
        spec.name.compare(spec.name.size() - 7, 7, ".weight") == 0;
    const std::string module =
        is_weight ? spec.name.substr(0, spec.name.size() - 7) : std::string();

    bool have_grams = is_weight;
    for (const auto* g : grams) have_grams = have_grams && g->find(module) != nullptr;

    if (!have_grams) {
      std::vector<const NamedParamSet*> singles;
      // Biases and any tensor without statistics are merged by mean.
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(sets[0]->entries[t].values.size());
      for (const auto* s : sets) acc += s->entries[t].values.cast<double>();
      acc /= static_cast<double>(sets.size());
      out.add(spec, acc.cast<float>());
      continue;
    }

    const int rows = spec.shape[0];
    const int cols = spec.shape[1];
    Eigen::MatrixXd lhs = Eigen::MatrixXd::Zero(cols, cols);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(cols, rows);
    for (std::size_t i = 0; i < sets.size(); ++i) {
      const Eigen::MatrixXd g = *grams[i]->find(module);
      if (g.rows() != cols || g.cols() != cols) {
        throw std::invalid_argument("merge_regmean: Gram shape mismatch for layer '" + module +
                                    "'");
      }
      Eigen::MatrixXd ghat = gamma * g;
      ghat.diagonal() += (1.0 - gamma) * g.diagonal();
      ghat.diagonal().array() += recipe.regmean_ridge;
      const Eigen::MatrixXd w = matrix_view(sets[i]->entries[t]).cast<double>();
      lhs += ghat;
      rhs += ghat * w.transpose();
    }

    const Eigen::LDLT<Eigen::MatrixXd> solver(lhs);
    Eigen::MatrixXd solution = solver.solve(rhs);  // W*^T, cols x rows
    const double residual = (lhs * solution - rhs).norm();
    const double scale = std::max(1.0, rhs.norm());
    if (solver.info() != Eigen::Success || !solution.allFinite() || residual > 1e-6 * scale) {
      throw NumericalError("regmean: singular system for layer '" + module + "'");
    }

    RowMatrixXf merged = solution.transpose().cast<float>();
    out.add(spec, Eigen::Map<Eigen::VectorXf>(merged.data(), merged.size()));
  }
  return out;
}

NamedParamSet lora_refactor(const DeltaSet& delta, int rank, float alpha) {
  if (rank < 1) throw std::invalid_argument("lora_refactor: rank must be positive");
  NamedParamSet out;
  for (const auto& e : delta.deltas.entries) {
    if (e.spec.shape.size() != 2) {
      throw std::invalid_argument("lora_refactor: tensor '" + e.spec.name + "' is not 2-D");
    }
    const int rows = e.spec.shape[0];
    const int cols = e.spec.shape[1];
    if (rank > std::min(rows, cols)) {
      throw std::invalid_argument("lora_refactor: rank " + std::to_string(rank) +
                                  " exceeds min dim of '" + e.spec.name + "'");
    }
    std::string module = e.spec.name;
    if (module.size() > 7 && module.compare(module.size() - 7, 7, ".weight") == 0) {
      module.resize(module.size() - 7);
    }

    const double inv_scaling = static_cast<double>(rank) / alpha;
    const Eigen::MatrixXd m = matrix_view(e).cast<double>() * inv_scaling;
    const SvdResult svd = truncated_svd(m, rank);
    const Eigen::VectorXd root = svd.s.cwiseSqrt();
    Eigen::MatrixXd a = root.asDiagonal() * svd.v.transpose();  // rank x cols
    Eigen::MatrixXd b = svd.u * root.asDiagonal();              // rows x rank

    RowMatrixXf af = a.cast<float>();
    RowMatrixXf bf = b.cast<float>();
    out.add(TensorSpec{module + ".lora_A", {rank, cols}},
            Eigen::Map<Eigen::VectorXf>(af.data(), af.size()));
    out.add(TensorSpec{module + ".lora_B", {rows, rank}},
            Eigen::Map<Eigen::VectorXf>(bf.data(), bf.size()));
  }
  return out;
}

DeltaSet adapter_delta(const CheckpointRecord& record) {
  if (record.kind != CheckpointKind::lora) {
    throw std::invalid_argument("adapter_delta: record '" + record.id + "' is not a lora adapter");
  }
  const LoraMeta& meta = *record.lora_meta;
  const double scaling = static_cast<double>(meta.alpha) / meta.rank;
  DeltaSet out;
  out.base_id = record.base_id;
  for (const auto& module : meta.target_modules) {
    const auto* a = record.params.find(module + ".lora_A");
    const auto* b = record.params.find(module + ".lora_B");
    if (a == nullptr || b == nullptr) {
      throw CompatibilityError("adapter '" + record.id + "' is missing factors for module '" +
                               module + "'");
    }
    const Eigen::MatrixXd eff =
        scaling * (matrix_view(*b).cast<double>() * matrix_view(*a).cast<double>());
    RowMatrixXf ef = eff.cast<float>();
    out.deltas.add(TensorSpec{module + ".weight", {b->spec.shape[0], a->spec.shape[1]}},
                   Eigen::Map<Eigen::VectorXf>(ef.data(), ef.size()));
  }
  return out;
}

namespace {

std::vector<DeltaSet> full_deltas(const std::vector<const CheckpointRecord*>& selected,
                                  const CheckpointRecord& base) {
  std::vector<DeltaSet> deltas;
  deltas.reserve(selected.size());
  for (const auto* r : selected) {
    deltas.push_back(delta(r->params, base.params, base.id));
  }
  return deltas;
}

DeltaSet mean_of_dared(const std::vector<DeltaSet>& deltas,
                       const std::vector<const CheckpointRecord*>& selected,
                       const MergeRecipe& recipe) {
  std::vector<DeltaSet> dared;
  dared.reserve(deltas.size());
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    const std::uint64_t seed = derive_seed(recipe.rng_seed, {fnv1a64(selected[i]->id)});
    dared.push_back(dare_sparsify(deltas[i], recipe.dare_p, seed));
  }
  std::vector<const NamedParamSet*> sets;
  for (const auto& d : dared) sets.push_back(&d.deltas);
  DeltaSet out;
  out.base_id = deltas[0].base_id;
  out.deltas = merge_mean(sets);
  return out;
}

DeltaSet merge_deltas(const std::vector<DeltaSet>& deltas,
                      const std::vector<const CheckpointRecord*>& selected,
                      const MergeRecipe& recipe) {
  std::vector<const DeltaSet*> ptrs;
  for (const auto& d : deltas) ptrs.push_back(&d);
  switch (recipe.method) {
    case MergeMethod::mean: {
      std::vector<const NamedParamSet*> sets;
      for (const auto& d : deltas) sets.push_back(&d.deltas);
      DeltaSet out;
      out.base_id = deltas[0].base_id;
      out.deltas = merge_mean(sets);
      return out;
    }
    case MergeMethod::dare:
      return mean_of_dared(deltas, selected, recipe);
    case MergeMethod::ties:
      return merge_ties(ptrs, recipe.ties_density);
    case MergeMethod::dare_ties: {
      std::vector<std::string> ids;
      for (const auto* r : selected) ids.push_back(r->id);
      return merge_dare_ties(ptrs, ids, recipe);
    }
    default:
      throw std::invalid_argument("merge_deltas: not a delta method");
  }
}

const Dataset& stats_or_throw(const MergeContext& ctx, MergeMethod method) {
  if (ctx.stats_samples == nullptr || ctx.stats_samples->size() == 0) {
    throw SetupError("merge method '" + to_string(method) + "' needs statistics samples");
  }
  return *ctx.stats_samples;
}

// Fisher/RegMean over full parameter sets (lora inputs are first flattened
// to effective weights by the caller).
NamedParamSet merge_with_stats(const std::vector<const CheckpointRecord*>& selected,
                               const std::vector<const NamedParamSet*>& sets,
                               const MergeRecipe& recipe, const MergeContext& ctx) {
  const Dataset& samples = stats_or_throw(ctx, recipe.method);
  const int n = static_cast<int>(samples.size());
  std::vector<Model> models;
  models.reserve(sets.size());
  for (const auto* s : sets) {
    models.push_back(init_model(ctx.arch, TrainMode::full, FromParams{s}));
  }
  if (recipe.method == MergeMethod::fisher) {
    std::vector<FisherEstimate> estimates;
    estimates.reserve(sets.size());
    for (std::size_t i = 0; i < sets.size(); ++i) {
      estimates.push_back(
          fisher_diagonal_estimate(models[i], selected[i]->id, samples, n, ctx.stats_seed));
    }
    std::vector<const FisherEstimate*> ptrs;
    for (const auto& e : estimates) ptrs.push_back(&e);
    return merge_fisher(sets, ptrs);
  }
  std::vector<GramStats> stats;
  stats.reserve(sets.size());
  for (std::size_t i = 0; i < sets.size(); ++i) {
    stats.push_back(capture_gram_stats(models[i], selected[i]->id, samples));
  }
  std::vector<const GramStats*> ptrs;
  for (const auto& s : stats) ptrs.push_back(&s);
  return merge_regmean(sets, ptrs, recipe);
}

const CheckpointRecord& base_or_throw(const MergeContext& ctx, const MergeRecipe& recipe) {
  if (ctx.base == nullptr) {
    throw SetupError("merge method '" + to_string(recipe.method) +
                     "' requires the base checkpoint '" + recipe.base_id +
                     "', which was not resolved");
  }
  return *ctx.base;
}

}  // namespace

CheckpointRecord merge_checkpoints(const std::vector<const CheckpointRecord*>& selected,
                                   const MergeRecipe& recipe, const MergeContext& ctx) {
  if (selected.empty()) throw std::invalid_argument("merge: no checkpoints selected");
  if (static_cast<int>(selected.size()) != recipe.k) {
    throw std::invalid_argument("merge: recipe.k=" + std::to_string(recipe.k) + " but " +
                                std::to_string(selected.size()) + " checkpoints were selected");
  }
  for (std::size_t i = 1; i < selected.size(); ++i) {
    const CompatReport report = validate_compatibility(*selected[0], *selected[i]);
    if (!report.ok) {
      throw CompatibilityError("checkpoints '" + selected[0]->id + "' and '" + selected[i]->id +
                               "' are incompatible: " + report.mismatch);
    }
  }

  CheckpointRecord merged;
  merged.id = "merged";
  merged.kind = selected[0]->kind;
  merged.base_id = selected[0]->base_id;
  merged.lora_meta = selected[0]->lora_meta;
  merged.train_config_hash = hash_hex(recipe.to_json().dump());

  if (merged.kind == CheckpointKind::full) {
    switch (recipe.method) {
      case MergeMethod::mean: {
        if (selected.size() == 1) {
          merged.params = selected[0]->params;  // sequential finetuning case
          break;
        }
        std::vector<const NamedParamSet*> sets;
        for (const auto* r : selected) sets.push_back(&r->params);
        merged.params = merge_mean(sets);
        break;
      }
      case MergeMethod::fisher:
      case MergeMethod::regmean: {
        std::vector<const NamedParamSet*> sets;
        for (const auto* r : selected) sets.push_back(&r->params);
        merged.params = merge_with_stats(selected, sets, recipe, ctx);
        break;
      }
      case MergeMethod::dare:
      case MergeMethod::ties:
      case MergeMethod::dare_ties: {
        const CheckpointRecord& base = base_or_throw(ctx, recipe);
        const auto deltas = full_deltas(selected, base);
        const DeltaSet combined = merge_deltas(deltas, selected, recipe);
        merged.params = apply_delta(base.params, combined);
        merged.base_id = base.id;
        break;
      }
    }
    return merged;
  }

  // lora kind
  const LoraMeta& meta = *selected[0]->lora_meta;
  if (recipe.method == MergeMethod::mean && selected.size() == 1) {
    merged.params = selected[0]->params;  // keep the original factors intact
    return merged;
  }
  if (recipe.lora_factor_average && recipe.method == MergeMethod::mean) {
    std::vector<const NamedParamSet*> sets;
    for (const auto* r : selected) sets.push_back(&r->params);
    merged.params = merge_mean(sets);
    return merged;
  }

  std::vector<DeltaSet> deltas;
  deltas.reserve(selected.size());
  for (const auto* r : selected) deltas.push_back(adapter_delta(*r));

  DeltaSet combined;
  if (recipe.method == MergeMethod::fisher || recipe.method == MergeMethod::regmean) {
    // Statistics-based methods act on effective weights; the result is
    // re-expressed as an adapter delta against the shared base.
    const CheckpointRecord& base = base_or_throw(ctx, recipe);
    std::vector<NamedParamSet> effective;
    effective.reserve(selected.size());
    for (const auto& d : deltas) effective.push_back(apply_delta(base.params, d));
    std::vector<const NamedParamSet*> sets;
    for (const auto& e : effective) sets.push_back(&e);
    const NamedParamSet merged_eff = merge_with_stats(selected, sets, recipe, ctx);
    DeltaSet weight_only;
    weight_only.base_id = base.id;
    const NamedParamSet full_delta = delta(merged_eff, base.params, base.id).deltas;
    for (const auto& module : meta.target_modules) {
      const auto* e = full_delta.find(module + ".weight");
      if (e != nullptr) weight_only.deltas.add(e->spec, e->values);
    }
    combined = std::move(weight_only);
  } else {
    combined = merge_deltas(deltas, selected, recipe);
  }
  merged.params = lora_refactor(combined, meta.rank, meta.alpha);
  return merged;
}

}  // namespace mashup
