#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mashup {

using RowMatrixXf = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Shape and name of one f32 tensor. dtype is fixed: everything on disk and in
// parameter sets is 32-bit float.
struct TensorSpec {
  std::string name;
  std::vector<int> shape;

  std::int64_t elem_count() const {
    std::int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
  }

  bool same_layout(const TensorSpec& other) const {
    return name == other.name && shape == other.shape;
  }
};

// Ordered collection of named f32 tensors. Iteration order is the stored
// order and is identity-relevant: two sets are compatible iff their specs
// match in name, order, and shape.
struct NamedParamSet {
  struct Entry {
    TensorSpec spec;
    Eigen::VectorXf values;  // flat, length == spec.elem_count()
  };

  std::vector<Entry> entries;

  void add(TensorSpec spec, Eigen::VectorXf values);
  const Entry* find(std::string_view name) const;
  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
  std::int64_t total_elements() const;

  bool operator==(const NamedParamSet& other) const;  // bit-exact payload compare
};

// Delta parameters ("task vector"): checkpoint minus the base it refers to.
struct DeltaSet {
  std::string base_id;
  NamedParamSet deltas;
};

// nullopt when compatible; otherwise a description naming the first
// mismatching tensor (or the count mismatch).
std::optional<std::string> first_mismatch(const NamedParamSet& a, const NamedParamSet& b);

// Throws CompatibilityError with the first-mismatch description.
void require_compatible(const NamedParamSet& a, const NamedParamSet& b);

// Elementwise sum_i weights[i] * sets[i] per tensor, accumulated in f64 and
// stored back to f32. Uniform weights 1/k recover the mean.
NamedParamSet combine(const std::vector<const NamedParamSet*>& sets,
                      std::span<const double> weights);

// Per-element ckpt - base, computed in f64 and stored to f32.
DeltaSet delta(const NamedParamSet& ckpt, const NamedParamSet& base, std::string base_id = "");

// base + deltas, elementwise in f64, stored to f32.
NamedParamSet apply_delta(const NamedParamSet& base, const DeltaSet& d);

// sqrt of the sum of squares over every element of every tensor (f64
// accumulation). Zero iff all elements are zero.
double frobenius_norm(const NamedParamSet& set);

struct SvdResult {
  Eigen::MatrixXd u;  // rows x rank
  Eigen::VectorXd s;  // rank, non-increasing, non-negative
  Eigen::MatrixXd v;  // cols x rank
};

// Best rank-r approximation in Frobenius norm (u * s.asDiagonal() * v^T).
// rank must lie in [1, min(rows, cols)].
SvdResult truncated_svd(const Eigen::MatrixXd& m, int rank);

// Row-major matrix view of a 2-D tensor entry.
Eigen::Map<const RowMatrixXf> matrix_view(const NamedParamSet::Entry& entry);

}  // namespace mashup
