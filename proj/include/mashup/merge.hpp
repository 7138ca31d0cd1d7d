#pragma once

#include "mashup/checkpoint.hpp"
#include "mashup/model.hpp"

#include <nlohmann/json.hpp>

#include <span>
#include <string>
#include <vector>

namespace mashup {

enum class MergeMethod { mean, dare, ties, dare_ties, fisher, regmean };

std::string to_string(MergeMethod method);
MergeMethod merge_method_from_string(const std::string& s);

// Everything a merge needs to be reproduced. Delta-based methods (dare,
// ties, dare_ties) require base_id for full checkpoints; lora adapters carry
// their own delta (zero-B init), so no base resolution is needed there.
struct MergeRecipe {
  MergeMethod method = MergeMethod::mean;
  int k = 2;
  double dare_p = 0.9;
  double ties_density = 0.2;
  double regmean_gamma = 0.9;
  double regmean_ridge = 1e-4;
  std::uint64_t rng_seed = 0;
  std::string base_id;               // empty = absent
  bool lora_factor_average = false;  // average A/B factors directly instead of
                                     // merging in effective-delta space

  nlohmann::json to_json() const;
  static MergeRecipe from_json(const nlohmann::json& j);
};

struct FisherEstimate {
  std::string checkpoint_id;
  NamedParamSet diag;  // per-parameter squared-gradient means, >= 0
  int n_samples = 0;
};

struct GramStats {
  std::string checkpoint_id;
  // Per target linear layer: G = X^T X over the captured layer inputs.
  std::vector<std::pair<std::string, Eigen::MatrixXd>> grams;
  int n_samples = 0;

  const Eigen::MatrixXd* find(std::string_view layer) const;
};

// Uniform average; k=1 returns the single input (sequential finetuning).
NamedParamSet merge_mean(const std::vector<const NamedParamSet*>& sets);

// Drops each delta element with probability p and rescales survivors by
// 1/(1-p), preserving the delta in expectation.
DeltaSet dare_sparsify(const DeltaSet& delta, double p, std::uint64_t seed);

// Trim per tensor to the top `density` fraction by |value| (ties kept),
// elect a per-coordinate sign by magnitude-mass majority (tie -> positive),
// average only the kept values whose sign matches.
DeltaSet merge_ties(const std::vector<const DeltaSet*>& deltas, double density);

// DARE each delta with a seed derived from (recipe.rng_seed, its id) — never
// from its position — then TIES-merge the results.
DeltaSet merge_dare_ties(const std::vector<const DeltaSet*>& deltas,
                         std::span<const std::string> ids, const MergeRecipe& recipe);

// diag_j = (1/n) sum over samples of (d log p(sampled label) / d theta_j)^2,
// over the model's trainable tensors. Labels are sampled from the model's
// own predictive distribution, seeded per sample from the feature bytes so
// duplicated samples contribute identically.
FisherEstimate fisher_diagonal_estimate(const Model& model, const std::string& checkpoint_id,
                                        const Dataset& samples, int n, std::uint64_t seed = 0);

// theta*_j = sum_i F_ij theta_ij / (sum_i F_ij + 1e-12). Coordinates whose
// Fisher mass vanishes fall back to ~0; their count is reported through
// zero_weight_coords when non-null.
NamedParamSet merge_fisher(const std::vector<const NamedParamSet*>& sets,
                           const std::vector<const FisherEstimate*>& fishers,
                           std::size_t* zero_weight_coords = nullptr);

GramStats capture_gram_stats(const Model& model, const std::string& checkpoint_id,
                             const Dataset& samples);

// Per linear layer W* = (sum Ghat_i)^{-1} sum Ghat_i W_i with
// Ghat = gamma G + (1-gamma) diag(G) + ridge I, solved as a symmetric
// system; biases and untargeted tensors are merged by mean.
NamedParamSet merge_regmean(const std::vector<const NamedParamSet*>& sets,
                            const std::vector<const GramStats*>& grams,
                            const MergeRecipe& recipe);

// Re-expresses a per-layer weight delta as rank-r adapter factors:
// truncated SVD of delta * (r/alpha), A = sqrt(S) V^T, B = U sqrt(S). The
// reconstructed effective delta (alpha/r) B A equals the rank-r SVD
// approximation of the delta.
NamedParamSet lora_refactor(const DeltaSet& delta, int rank, float alpha);

// Effective weight delta of a lora adapter record: (alpha/r) B A per target
// module, named "<module>.weight".
DeltaSet adapter_delta(const CheckpointRecord& record);

struct MergeContext {
  ModelArch arch;
  const CheckpointRecord* base = nullptr;  // resolved base for delta methods / lora
  const Dataset* stats_samples = nullptr;  // data for fisher/regmean statistics
  std::uint64_t stats_seed = 0;
};

// Dispatches a recipe over compatible checkpoints of one kind and wraps the
// result as a CheckpointRecord (id "merged", provenance hash = recipe hash).
CheckpointRecord merge_checkpoints(const std::vector<const CheckpointRecord*>& selected,
                                   const MergeRecipe& recipe, const MergeContext& ctx);

}  // namespace mashup
