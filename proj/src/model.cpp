#include "mashup/model.hpp"

#include "mashup/errors.hpp"
#include "mashup/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace mashup {

using nlohmann::json;

std::vector<ModelArch::Layer> ModelArch::layers() const {
  if (hidden_dims.empty()) throw std::invalid_argument("arch: at least one hidden layer required");
  if (input_dim <= 0 || n_classes <= 0) throw std::invalid_argument("arch: non-positive dims");
  std::vector<Layer> out;
  int in = input_dim;
  for (std::size_t i = 0; i < hidden_dims.size(); ++i) {
    if (hidden_dims[i] <= 0) throw std::invalid_argument("arch: non-positive hidden dim");
    out.push_back(Layer{"layer" + std::to_string(i), hidden_dims[i], in});
    in = hidden_dims[i];
  }
  out.push_back(Layer{"out", n_classes, in});
  return out;
}

std::vector<std::string> ModelArch::layer_names() const {
  std::vector<std::string> names;
  for (const auto& l : layers()) names.push_back(l.name);
  return names;
}

ModelArch default_arch(int input_dim, int n_classes) {
  ModelArch arch;
  arch.input_dim = input_dim;
  arch.hidden_dims = {64, 64};
  arch.n_classes = n_classes;
  return arch;
}

std::string to_string(TrainMode mode) { return mode == TrainMode::full ? "full" : "lora"; }

TrainMode train_mode_from_string(const std::string& s) {
  if (s == "full") return TrainMode::full;
  if (s == "lora") return TrainMode::lora;
  throw std::invalid_argument("unknown train mode '" + s + "'");
}

std::string to_string(Metric metric) { return metric == Metric::loss ? "loss" : "accuracy"; }

Metric metric_from_string(const std::string& s) {
  if (s == "loss") return Metric::loss;
  if (s == "accuracy") return Metric::accuracy;
  throw std::invalid_argument("unknown metric '" + s + "'");
}

std::string TrainConfig::canonical_json() const {
  json j{{"mode", to_string(mode)},
         {"learning_rate", learning_rate},
         {"beta1", beta1},
         {"beta2", beta2},
         {"adam_eps", adam_eps},
         {"weight_decay", weight_decay},
         {"warmup_fraction", warmup_fraction},
         {"batch_size", batch_size},
         {"epochs", epochs},
         {"seed", seed},
         {"eval_every", eval_every}};
  return j.dump();  // keys are emitted sorted
}

std::string TrainConfig::config_hash() const { return hash_hex(canonical_json()); }

bool Model::layer_targeted(std::size_t layer) const {
  return mode == TrainMode::lora && layer < lora_a.size() && lora_a[layer].size() > 0;
}

double Model::lora_scaling() const {
  return lora_cfg ? static_cast<double>(lora_cfg->alpha) / lora_cfg->rank : 0.0;
}

Eigen::MatrixXd Model::effective_weight(std::size_t layer) const {
  if (!layer_targeted(layer)) return weights[layer];
  return weights[layer] + lora_scaling() * (lora_b[layer] * lora_a[layer]);
}

std::vector<TensorSpec> full_param_specs(const ModelArch& arch) {
  std::vector<TensorSpec> specs;
  for (const auto& l : arch.layers()) {
    specs.push_back(TensorSpec{l.name + ".weight", {l.out, l.in}});
    specs.push_back(TensorSpec{l.name + ".bias", {l.out}});
  }
  return specs;
}

namespace {

Eigen::VectorXf flatten_rowmajor(const Eigen::MatrixXd& m) {
  RowMatrixXf rm = m.cast<float>();
  return Eigen::Map<Eigen::VectorXf>(rm.data(), rm.size());
}

Eigen::MatrixXd unflatten_rowmajor(const Eigen::VectorXf& flat, int rows, int cols) {
  Eigen::Map<const RowMatrixXf> view(flat.data(), rows, cols);
  return view.cast<double>();
}

std::vector<std::string> resolve_targets(const ModelArch& arch, const LoraConfig& cfg) {
  if (cfg.target_modules.empty()) return arch.layer_names();
  const auto names = arch.layer_names();
  for (const auto& t : cfg.target_modules) {
    if (std::find(names.begin(), names.end(), t) == names.end()) {
      throw std::invalid_argument("lora target module '" + t + "' is not a layer of the arch");
    }
  }
  return cfg.target_modules;
}

void install_full(Model& model, const NamedParamSet& params) {
  const auto expected = full_param_specs(model.arch);
  if (params.size() != expected.size()) {
    throw CompatibilityError("parameter set has " + std::to_string(params.size()) +
                             " tensors, arch expects " + std::to_string(expected.size()));
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (!params.entries[i].spec.same_layout(expected[i])) {
      throw CompatibilityError("tensor '" + params.entries[i].spec.name +
                               "' does not match expected '" + expected[i].name + "'");
    }
  }
  const auto layers = model.arch.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& w = params.entries[2 * l];
    const auto& b = params.entries[2 * l + 1];
    model.weights[l] = unflatten_rowmajor(w.values, layers[l].out, layers[l].in);
    model.biases[l] = b.values.cast<double>();
  }
}

void install_adapter(Model& model, const NamedParamSet& params) {
  const auto layers = model.arch.layers();
  const auto targets = resolve_targets(model.arch, *model.lora_cfg);
  const int r = model.lora_cfg->rank;

  std::vector<TensorSpec> expected;
  for (const auto& l : layers) {
    if (std::find(targets.begin(), targets.end(), l.name) == targets.end()) continue;
    expected.push_back(TensorSpec{l.name + ".lora_A", {r, l.in}});
    expected.push_back(TensorSpec{l.name + ".lora_B", {l.out, r}});
  }
  if (params.size() != expected.size()) {
    throw CompatibilityError("adapter set has " + std::to_string(params.size()) +
                             " tensors, expected " + std::to_string(expected.size()));
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (!params.entries[i].spec.same_layout(expected[i])) {
      throw CompatibilityError("adapter tensor '" + params.entries[i].spec.name +
                               "' does not match expected '" + expected[i].name + "'");
    }
  }
  std::size_t next = 0;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (std::find(targets.begin(), targets.end(), layers[l].name) == targets.end()) continue;
    model.lora_a[l] = unflatten_rowmajor(params.entries[next].values, r, layers[l].in);
    model.lora_b[l] = unflatten_rowmajor(params.entries[next + 1].values, layers[l].out, r);
    next += 2;
  }
}

struct ForwardPass {
  std::vector<Eigen::MatrixXd> acts;  // inputs to each linear layer; acts[0] == x
  std::vector<Eigen::MatrixXd> effs;  // effective weights per layer
  Eigen::MatrixXd logits;
};

ForwardPass run_forward(const Model& model, const Eigen::MatrixXd& x) {
  if (x.cols() != model.arch.input_dim) {
    throw std::invalid_argument("batch feature dim " + std::to_string(x.cols()) +
                                " != input dim " + std::to_string(model.arch.input_dim));
  }
  const std::size_t n_layers = model.weights.size();
  ForwardPass fp;
  fp.acts.reserve(n_layers);
  fp.effs.reserve(n_layers);
  fp.acts.push_back(x);
  for (std::size_t l = 0; l < n_layers; ++l) {
    fp.effs.push_back(model.effective_weight(l));
    Eigen::MatrixXd z =
        (fp.acts[l] * fp.effs[l].transpose()).rowwise() + model.biases[l].transpose();
    if (l + 1 < n_layers) {
      fp.acts.push_back(z.array().tanh().matrix());
    } else {
      fp.logits = std::move(z);
    }
  }
  return fp;
}

struct SoftmaxLoss {
  double loss = 0.0;
  Eigen::MatrixXd dlogits;  // (softmax - onehot) / n
  std::vector<std::uint8_t> correct;
};

SoftmaxLoss softmax_loss(const Eigen::MatrixXd& logits, const Eigen::VectorXi& labels,
                         bool want_grad) {
  const Eigen::Index n = logits.rows();
  const Eigen::Index c = logits.cols();
  SoftmaxLoss out;
  out.correct.resize(static_cast<std::size_t>(n));
  if (want_grad) out.dlogits.resize(n, c);
  double loss_acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = labels[i];
    if (y < 0 || y >= c) throw std::invalid_argument("label out of range");
    const double m = logits.row(i).maxCoeff();
    Eigen::ArrayXd shifted = logits.row(i).transpose().array() - m;
    Eigen::ArrayXd e = shifted.exp();
    const double z = e.sum();
    loss_acc += std::log(z) - shifted(y);
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < c; ++j) {
      if (logits(i, j) > logits(i, best)) best = j;  // first max wins ties
    }
    out.correct[static_cast<std::size_t>(i)] = best == y ? 1 : 0;
    if (want_grad) {
      out.dlogits.row(i) = (e / z).matrix().transpose() / static_cast<double>(n);
      out.dlogits(i, y) -= 1.0 / static_cast<double>(n);
    }
  }
  out.loss = loss_acc / static_cast<double>(n);
  return out;
}

// Flat (param, grad, moment) views over the trainable tensors.
struct FlatView {
  double* p;
  const double* g;
  std::size_t n;
};

std::vector<FlatView> trainable_views(Model& model, const Gradients& grads) {
  std::vector<FlatView> views;
  if (model.mode == TrainMode::full) {
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
      views.push_back({model.weights[l].data(), grads.weights[l].data(),
                       static_cast<std::size_t>(model.weights[l].size())});
      views.push_back({model.biases[l].data(), grads.biases[l].data(),
                       static_cast<std::size_t>(model.biases[l].size())});
    }
  } else {
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
      if (!model.layer_targeted(l)) continue;
      views.push_back({model.lora_a[l].data(), grads.lora_a[l].data(),
                       static_cast<std::size_t>(model.lora_a[l].size())});
      views.push_back({model.lora_b[l].data(), grads.lora_b[l].data(),
                       static_cast<std::size_t>(model.lora_b[l].size())});
    }
  }
  return views;
}

}  // namespace

Model init_model(const ModelArch& arch, TrainMode mode, const ModelInit& init,
                 std::optional<LoraConfig> lora_cfg, const NamedParamSet* lora_base) {
  Model model;
  model.arch = arch;
  model.mode = mode;
  const auto layers = arch.layers();
  model.weights.resize(layers.size());
  model.biases.resize(layers.size());
  model.lora_a.resize(layers.size());
  model.lora_b.resize(layers.size());

  if (mode == TrainMode::lora) {
    if (!lora_cfg) throw std::invalid_argument("lora mode requires a LoraConfig");
    if (lora_base == nullptr) {
      throw std::invalid_argument("lora mode requires the frozen base parameters");
    }
    LoraConfig cfg = *lora_cfg;
    cfg.target_modules = resolve_targets(arch, cfg);
    for (const auto& l : layers) {
      const bool targeted = std::find(cfg.target_modules.begin(), cfg.target_modules.end(),
                                      l.name) != cfg.target_modules.end();
      if (targeted && cfg.rank > std::min(l.out, l.in)) {
        throw std::invalid_argument("lora rank " + std::to_string(cfg.rank) +
                                    " exceeds layer '" + l.name + "' dims");
      }
    }
    model.lora_cfg = cfg;
    install_full(model, *lora_base);
  }

  if (const auto* scratch = std::get_if<ScratchInit>(&init)) {
    Rng rng(derive_seed(scratch->seed, {fnv1a64("init")}));
    if (mode == TrainMode::full) {
      for (std::size_t l = 0; l < layers.size(); ++l) {
        const double std_dev = 1.0 / std::sqrt(static_cast<double>(layers[l].in));
        model.weights[l].resize(layers[l].out, layers[l].in);
        for (int r = 0; r < layers[l].out; ++r) {
          for (int c = 0; c < layers[l].in; ++c) model.weights[l](r, c) = rng.normal() * std_dev;
        }
        model.biases[l] = Eigen::VectorXd::Zero(layers[l].out);
      }
    } else {
      // Gaussian A, zero B: the fresh adapter contributes a zero delta.
      const auto& targets = model.lora_cfg->target_modules;
      for (std::size_t l = 0; l < layers.size(); ++l) {
        if (std::find(targets.begin(), targets.end(), layers[l].name) == targets.end()) continue;
        const int r = model.lora_cfg->rank;
        const double std_dev = 1.0 / std::sqrt(static_cast<double>(layers[l].in));
        model.lora_a[l].resize(r, layers[l].in);
        for (int i = 0; i < r; ++i) {
          for (int c = 0; c < layers[l].in; ++c) model.lora_a[l](i, c) = rng.normal() * std_dev;
        }
        model.lora_b[l] = Eigen::MatrixXd::Zero(layers[l].out, r);
      }
    }
    return model;
  }

  const auto& from = std::get<FromParams>(init);
  if (from.params == nullptr) throw std::invalid_argument("from_params: null parameter set");
  if (mode == TrainMode::full) {
    install_full(model, *from.params);
  } else {
    install_adapter(model, *from.params);
  }
  return model;
}

Eigen::MatrixXd forward_logits(const Model& model, const Eigen::MatrixXd& x) {
  return run_forward(model, x).logits;
}

LossResult forward_loss(const Model& model, const Dataset& batch) {
  if (batch.size() == 0) throw std::invalid_argument("forward_loss: empty batch");
  const ForwardPass fp = run_forward(model, batch.features);
  SoftmaxLoss sm = softmax_loss(fp.logits, batch.labels, /*want_grad=*/false);
  return LossResult{sm.loss, std::move(sm.correct)};
}

double forward_backward(const Model& model, const Dataset& batch, Gradients& grads) {
  if (batch.size() == 0) throw std::invalid_argument("forward_backward: empty batch");
  const ForwardPass fp = run_forward(model, batch.features);
  const SoftmaxLoss sm = softmax_loss(fp.logits, batch.labels, /*want_grad=*/true);

  const std::size_t n_layers = model.weights.size();
  grads.weights.assign(n_layers, Eigen::MatrixXd());
  grads.biases.assign(n_layers, Eigen::VectorXd());
  grads.lora_a.assign(n_layers, Eigen::MatrixXd());
  grads.lora_b.assign(n_layers, Eigen::MatrixXd());

  Eigen::MatrixXd g = sm.dlogits;  // gradient wrt the current layer's pre-activation
  for (std::size_t l = n_layers; l-- > 0;) {
    Eigen::MatrixXd dw = g.transpose() * fp.acts[l];
    Eigen::VectorXd db = g.colwise().sum();
    if (l > 0) {
      Eigen::MatrixXd dact = g * fp.effs[l];
      g = dact.cwiseProduct(
          (1.0 - fp.acts[l].array().square()).matrix());  // tanh'(z) = 1 - tanh(z)^2
    }
    if (model.mode == TrainMode::full) {
      grads.weights[l] = std::move(dw);
      grads.biases[l] = std::move(db);
    } else {
      grads.weights[l] = Eigen::MatrixXd::Zero(model.weights[l].rows(), model.weights[l].cols());
      grads.biases[l] = Eigen::VectorXd::Zero(model.biases[l].size());
      if (model.layer_targeted(l)) {
        const double s = model.lora_scaling();
        grads.lora_a[l] = s * (model.lora_b[l].transpose() * dw);
        grads.lora_b[l] = s * (dw * model.lora_a[l].transpose());
      }
    }
  }
  return sm.loss;
}

double evaluate(const Model& model, const Dataset& examples, Metric metric) {
  if (examples.size() == 0) throw std::invalid_argument("evaluate: empty example set");
  const LossResult r = forward_loss(model, examples);
  if (metric == Metric::loss) return r.loss;
  double correct = 0.0;
  for (std::uint8_t c : r.correct) correct += c;
  return correct / static_cast<double>(r.correct.size());
}

std::vector<Eigen::MatrixXd> capture_layer_inputs(const Model& model, const Eigen::MatrixXd& x) {
  ForwardPass fp = run_forward(model, x);
  return std::move(fp.acts);
}

void adamw_step(Eigen::Ref<Eigen::VectorXd> p, const Eigen::Ref<const Eigen::VectorXd>& g,
                Eigen::VectorXd& m, Eigen::VectorXd& v, int t, double lr,
                const AdamWParams& hp) {
  m = hp.beta1 * m + (1.0 - hp.beta1) * g;
  v = hp.beta2 * v + (1.0 - hp.beta2) * g.cwiseProduct(g);
  const double bc1 = 1.0 - std::pow(hp.beta1, t);
  const double bc2 = 1.0 - std::pow(hp.beta2, t);
  const Eigen::ArrayXd mhat = m.array() / bc1;
  const Eigen::ArrayXd vhat = v.array() / bc2;
  p = (1.0 - lr * hp.weight_decay) * p.array() - lr * mhat / (vhat.sqrt() + hp.eps);
}

double lr_at(const TrainConfig& cfg, int step, int total_steps) {
  if (total_steps <= 0 || step < 0 || step >= total_steps) {
    throw std::invalid_argument("lr_at: step out of range");
  }
  const int warmup = static_cast<int>(
      std::ceil(cfg.warmup_fraction * static_cast<double>(total_steps)));
  if (step < warmup) {
    return cfg.learning_rate * static_cast<double>(step) / static_cast<double>(warmup);
  }
  const double span = static_cast<double>(total_steps - warmup);
  const double progress = span > 0 ? static_cast<double>(step - warmup) / span : 1.0;
  return cfg.learning_rate * 0.5 * (1.0 + std::cos(M_PI * progress));
}

TrainTrajectory train(Model& model, const Dataset& train_data, const Dataset& val_data,
                      const TrainConfig& cfg) {
  if (train_data.size() == 0) throw std::invalid_argument("train: empty training data");
  if (val_data.size() == 0) throw std::invalid_argument("train: empty validation data");
  if (cfg.batch_size <= 0 || cfg.epochs <= 0) throw std::invalid_argument("train: bad config");
  if (cfg.mode != model.mode) throw std::invalid_argument("train: config/model mode mismatch");
  if (cfg.learning_rate < 0) throw std::invalid_argument("train: negative learning rate");

  const int n = static_cast<int>(train_data.size());
  const int steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const int total = steps_per_epoch * cfg.epochs;
  const int eval_every = cfg.eval_every > 0 ? cfg.eval_every : (total + 19) / 20;

  TrainTrajectory traj;
  traj.total_steps = total;

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng(derive_seed(cfg.seed, {fnv1a64("shuffle"), 0}));
  shuffle_rng.shuffle(order);

  {
    std::vector<int> first(order.begin(), order.begin() + std::min(n, cfg.batch_size));
    const Dataset batch = train_data.gather(first);
    traj.points.push_back(EvalPoint{0, forward_loss(model, batch).loss,
                                    evaluate(model, val_data, Metric::accuracy)});
  }

  Gradients grads;
  std::vector<Eigen::VectorXd> opt_m, opt_v;
  const AdamWParams hp{cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay};
  double last_loss = 0.0;

  const auto t_start = std::chrono::steady_clock::now();
  int step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (epoch > 0) {
      Rng rng(derive_seed(cfg.seed, {fnv1a64("shuffle"), static_cast<std::uint64_t>(epoch)}));
      std::iota(order.begin(), order.end(), 0);
      rng.shuffle(order);
    }
    for (int b = 0; b < steps_per_epoch; ++b) {
      const int begin = b * cfg.batch_size;
      const int end = std::min(n, begin + cfg.batch_size);
      std::vector<int> idx(order.begin() + begin, order.begin() + end);
      const Dataset batch = train_data.gather(idx);

      last_loss = forward_backward(model, batch, grads);
      if (!std::isfinite(last_loss)) throw TrainingError("non-finite training loss", step);

      const double lr = lr_at(cfg, step, total);
      auto views = trainable_views(model, grads);
      if (opt_m.empty()) {
        for (const auto& view : views) {
          opt_m.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(view.n)));
          opt_v.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(view.n)));
        }
      }
      ++step;
      for (std::size_t i = 0; i < views.size(); ++i) {
        Eigen::Map<Eigen::VectorXd> p(views[i].p, static_cast<Eigen::Index>(views[i].n));
        Eigen::Map<const Eigen::VectorXd> g(views[i].g, static_cast<Eigen::Index>(views[i].n));
        adamw_step(p, g, opt_m[i], opt_v[i], step, lr, hp);
      }

      if (step % eval_every == 0 && step != total) {
        traj.points.push_back(
            EvalPoint{step, last_loss, evaluate(model, val_data, Metric::accuracy)});
      }
    }
  }
  const auto t_end = std::chrono::steady_clock::now();
  traj.wall_clock_seconds = std::chrono::duration<double>(t_end - t_start).count();

  traj.points.push_back(
      EvalPoint{total, last_loss, evaluate(model, val_data, Metric::accuracy)});

  traj.final.params = export_params(model);
  traj.final.kind = model.mode == TrainMode::full ? CheckpointKind::full : CheckpointKind::lora;
  if (model.mode == TrainMode::lora) {
    traj.final.lora_meta =
        LoraMeta{model.lora_cfg->rank, model.lora_cfg->alpha, model.lora_cfg->target_modules};
  }
  traj.final.train_config_hash = cfg.config_hash();
  return traj;
}

double grad_check(const Model& model, const Dataset& batch, double epsilon, std::uint64_t seed,
                  int n_params) {
  if (!(epsilon > 0.0 && epsilon <= 1e-2)) {
    throw std::invalid_argument("grad_check: epsilon must lie in (0, 1e-2]");
  }
  Model probe = model;
  Gradients grads;
  forward_backward(probe, batch, grads);
  auto views = trainable_views(probe, grads);

  std::size_t total = 0;
  for (const auto& v : views) total += v.n;
  const std::size_t sample_count = std::min<std::size_t>(static_cast<std::size_t>(n_params), total);

  std::vector<std::size_t> all(total);
  std::iota(all.begin(), all.end(), std::size_t{0});
  Rng rng(derive_seed(seed, {fnv1a64("grad-check")}));
  for (std::size_t i = 0; i < sample_count; ++i) {
    std::swap(all[i], all[i + rng.below(total - i)]);
  }

  double max_rel = 0.0;
  for (std::size_t s = 0; s < sample_count; ++s) {
    std::size_t flat = all[s];
    std::size_t vi = 0;
    while (flat >= views[vi].n) {
      flat -= views[vi].n;
      ++vi;
    }
    double* slot = views[vi].p + flat;
    const double analytic = views[vi].g[flat];
    const double saved = *slot;
    *slot = saved + epsilon;
    const double lp = forward_loss(probe, batch).loss;
    *slot = saved - epsilon;
    const double lm = forward_loss(probe, batch).loss;
    *slot = saved;
    const double fd = (lp - lm) / (2.0 * epsilon);
    const double rel =
        std::abs(fd - analytic) / std::max({std::abs(fd), std::abs(analytic), 1e-6});
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

NamedParamSet export_params(const Model& model) {
  NamedParamSet out;
  const auto layers = model.arch.layers();
  if (model.mode == TrainMode::full) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
      out.add(TensorSpec{layers[l].name + ".weight", {layers[l].out, layers[l].in}},
              flatten_rowmajor(model.weights[l]));
      out.add(TensorSpec{layers[l].name + ".bias", {layers[l].out}},
              model.biases[l].cast<float>());
    }
    return out;
  }
  const int r = model.lora_cfg->rank;
  const auto& targets = model.lora_cfg->target_modules;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (std::find(targets.begin(), targets.end(), layers[l].name) == targets.end()) continue;
    out.add(TensorSpec{layers[l].name + ".lora_A", {r, layers[l].in}},
            flatten_rowmajor(model.lora_a[l]));
    out.add(TensorSpec{layers[l].name + ".lora_B", {layers[l].out, r}},
            flatten_rowmajor(model.lora_b[l]));
  }
  return out;
}

NamedParamSet export_effective_params(const Model& model) {
  NamedParamSet out;
  const auto layers = model.arch.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    out.add(TensorSpec{layers[l].name + ".weight", {layers[l].out, layers[l].in}},
            flatten_rowmajor(model.effective_weight(l)));
    out.add(TensorSpec{layers[l].name + ".bias", {layers[l].out}},
            model.biases[l].cast<float>());
  }
  return out;
}

Model model_from_record(const ModelArch& arch, const CheckpointRecord& record,
                        const NamedParamSet* base_params) {
  if (record.kind == CheckpointKind::full) {
    return init_model(arch, TrainMode::full, FromParams{&record.params});
  }
  if (base_params == nullptr) {
    throw SetupError("checkpoint '" + record.id + "' is a lora adapter but no base was given");
  }
  const LoraMeta& meta = *record.lora_meta;
  LoraConfig cfg{meta.rank, meta.alpha, meta.target_modules};
  return init_model(arch, TrainMode::lora, FromParams{&record.params}, cfg, base_params);
}

}  // namespace mashup
