#pragma once

#include "mashup/checkpoint.hpp"
#include "mashup/data.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace mashup {

// Dense tanh classifier: input -> hidden... -> logits. The last layer is
// named "out", hidden layers "layer0", "layer1", ...
struct ModelArch {
  int input_dim = 32;
  std::vector<int> hidden_dims = {64, 64};
  int n_classes = 8;

  struct Layer {
    std::string name;
    int out = 0;
    int in = 0;
  };

  std::vector<Layer> layers() const;
  std::vector<std::string> layer_names() const;
  bool operator==(const ModelArch&) const = default;
};

ModelArch default_arch(int input_dim = 32, int n_classes = 8);

enum class TrainMode { full, lora };

std::string to_string(TrainMode mode);
TrainMode train_mode_from_string(const std::string& s);

enum class Metric { loss, accuracy };

std::string to_string(Metric metric);
Metric metric_from_string(const std::string& s);

struct LoraConfig {
  int rank = 8;
  float alpha = 16.0f;
  std::vector<std::string> target_modules;  // empty = every linear layer
};

// Fixed protocol: AdamW, cosine decay to zero with 10% warmup, batch 32,
// one epoch. Only learning_rate, seed and eval stride vary day to day.
struct TrainConfig {
  TrainMode mode = TrainMode::full;
  double learning_rate = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.01;
  double warmup_fraction = 0.10;
  int batch_size = 32;
  int epochs = 1;
  std::uint64_t seed = 0;
  int eval_every = 0;  // 0 = ceil(total_steps / 20)

  std::string canonical_json() const;
  std::string config_hash() const;  // hash_hex(canonical_json())
};

// Model state. Compute runs in f64; import/export converts to the f32
// checkpoint representation. In lora mode the base weights are frozen and
// the targeted layers carry trainable factors A (r x in) and B (out x r)
// with effective weight W + (alpha/rank) * B * A.
struct Model {
  ModelArch arch;
  TrainMode mode = TrainMode::full;
  std::vector<Eigen::MatrixXd> weights;  // per layer, out x in
  std::vector<Eigen::VectorXd> biases;   // per layer, out
  std::optional<LoraConfig> lora_cfg;
  std::vector<Eigen::MatrixXd> lora_a;  // empty matrix for untargeted layers
  std::vector<Eigen::MatrixXd> lora_b;

  bool layer_targeted(std::size_t layer) const;
  double lora_scaling() const;  // alpha / rank
  Eigen::MatrixXd effective_weight(std::size_t layer) const;
};

struct ScratchInit {
  std::uint64_t seed = 0;
};
struct FromParams {
  const NamedParamSet* params = nullptr;
};
using ModelInit = std::variant<ScratchInit, FromParams>;

// Scratch-full draws fan-in-scaled Gaussians; scratch-lora draws Gaussian A
// and zero B over the frozen base; from_params installs the given set
// exactly. lora mode requires lora_base (the frozen full weights).
Model init_model(const ModelArch& arch, TrainMode mode, const ModelInit& init,
                 std::optional<LoraConfig> lora_cfg = {},
                 const NamedParamSet* lora_base = nullptr);

Eigen::MatrixXd forward_logits(const Model& model, const Eigen::MatrixXd& x);

struct LossResult {
  double loss = 0.0;
  std::vector<std::uint8_t> correct;  // per example, argmax(logits) == label
};

LossResult forward_loss(const Model& model, const Dataset& batch);

struct Gradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  std::vector<Eigen::MatrixXd> lora_a;
  std::vector<Eigen::MatrixXd> lora_b;
};

// Mean cross-entropy loss plus gradients for the trainable tensors. In lora
// mode the base weight/bias gradients are identically zero.
double forward_backward(const Model& model, const Dataset& batch, Gradients& grads);

// Mean metric over the examples. Throws std::invalid_argument when empty.
double evaluate(const Model& model, const Dataset& examples, Metric metric);

// Inputs seen by each linear layer for the given batch (activations before
// the layer), used for Gram statistics.
std::vector<Eigen::MatrixXd> capture_layer_inputs(const Model& model, const Eigen::MatrixXd& x);

struct AdamWParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// One decoupled AdamW update; t is the 1-based step count.
//   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2
//   p <- p (1 - lr wd) - lr mhat / (sqrt(vhat) + eps)
void adamw_step(Eigen::Ref<Eigen::VectorXd> p, const Eigen::Ref<const Eigen::VectorXd>& g,
                Eigen::VectorXd& m, Eigen::VectorXd& v, int t, double lr, const AdamWParams& hp);

// Linear warmup from zero over ceil(warmup_fraction * total) steps, then
// cosine decay to zero at step == total.
double lr_at(const TrainConfig& cfg, int step, int total_steps);

struct EvalPoint {
  int step = 0;  // optimizer steps completed
  double train_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainTrajectory {
  std::vector<EvalPoint> points;  // strictly increasing steps; last == total_steps
  CheckpointRecord final;         // params/kind/lora_meta/hash filled; id/task left to the caller
  double wall_clock_seconds = 0.0;
  int total_steps = 0;
};

// ceil(train/batch) * epochs optimizer steps with per-epoch shuffling from
// cfg.seed. Throws TrainingError on a non-finite loss.
TrainTrajectory train(Model& model, const Dataset& train_data, const Dataset& val_data,
                      const TrainConfig& cfg);

// Max relative error between analytic gradients and central finite
// differences over >= n_params sampled trainable parameters.
double grad_check(const Model& model, const Dataset& batch, double epsilon,
                  std::uint64_t seed = 0, int n_params = 200);

// f32 export in canonical order. full: "<layer>.weight", "<layer>.bias" per
// layer; lora: "<layer>.lora_A", "<layer>.lora_B" for targeted layers.
NamedParamSet export_params(const Model& model);

// Full effective weights (base plus adapter delta for lora models), exported
// in full-checkpoint layout.
NamedParamSet export_effective_params(const Model& model);

// Canonical full-parameter layout for an architecture.
std::vector<TensorSpec> full_param_specs(const ModelArch& arch);

// Builds a scoring/training model from a checkpoint record. lora records
// need the shared base parameters.
Model model_from_record(const ModelArch& arch, const CheckpointRecord& record,
                        const NamedParamSet* base_params = nullptr);

}  // namespace mashup
