#include "mashup/tensor.hpp"

#include "mashup/errors.hpp"

#include <cstring>
#include <stdexcept>

namespace mashup {

void NamedParamSet::add(TensorSpec spec, Eigen::VectorXf values) {
  if (spec.shape.empty()) {
    throw std::invalid_argument("tensor '" + spec.name + "': shape must be non-empty");
  }
  for (int d : spec.shape) {
    if (d <= 0) throw std::invalid_argument("tensor '" + spec.name + "': non-positive dimension");
  }
  if (values.size() != spec.elem_count()) {
    throw std::invalid_argument("tensor '" + spec.name + "': payload length " +
                                std::to_string(values.size()) + " != element count " +
                                std::to_string(spec.elem_count()));
  }
  if (find(spec.name) != nullptr) {
    throw std::invalid_argument("duplicate tensor name '" + spec.name + "'");
  }
  entries.push_back(Entry{std::move(spec), std::move(values)});
}

const NamedParamSet::Entry* NamedParamSet::find(std::string_view name) const {
  for (const Entry& e : entries) {
    if (e.spec.name == name) return &e;
  }
  return nullptr;
}

std::int64_t NamedParamSet::total_elements() const {
  std::int64_t n = 0;
  for (const Entry& e : entries) n += e.spec.elem_count();
  return n;
}

bool NamedParamSet::operator==(const NamedParamSet& other) const {
  if (entries.size() != other.entries.size()) return false;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!entries[i].spec.same_layout(other.entries[i].spec)) return false;
    const auto& a = entries[i].values;
    const auto& b = other.entries[i].values;
    if (a.size() != b.size()) return false;
    if (a.size() > 0 &&
        std::memcmp(a.data(), b.data(), sizeof(float) * static_cast<std::size_t>(a.size())) != 0) {
      return false;
    }
  }
  return true;
}

std::optional<std::string> first_mismatch(const NamedParamSet& a, const NamedParamSet& b) {
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    const TensorSpec& sa = a.entries[i].spec;
    const TensorSpec& sb = b.entries[i].spec;
    if (sa.name != sb.name) {
      return "tensor " + std::to_string(i) + ": name '" + sa.name + "' vs '" + sb.name + "'";
    }
    if (sa.shape != sb.shape) {
      return "tensor '" + sa.name + "': shape mismatch";
    }
  }
  if (a.size() != b.size()) {
    return "tensor count " + std::to_string(a.size()) + " vs " + std::to_string(b.size());
  }
  return std::nullopt;
}

void require_compatible(const NamedParamSet& a, const NamedParamSet& b) {
  if (auto mismatch = first_mismatch(a, b)) {
    throw CompatibilityError("incompatible parameter sets: " + *mismatch);
  }
}

NamedParamSet combine(const std::vector<const NamedParamSet*>& sets,
                      std::span<const double> weights) {
  if (sets.empty()) throw std::invalid_argument("combine: no input sets");
  if (sets.size() != weights.size()) {
    throw std::invalid_argument("combine: " + std::to_string(sets.size()) + " sets vs " +
                                std::to_string(weights.size()) + " weights");
  }
  for (std::size_t i = 1; i < sets.size(); ++i) require_compatible(*sets[0], *sets[i]);

  NamedParamSet out;
  for (std::size_t t = 0; t < sets[0]->size(); ++t) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(sets[0]->entries[t].values.size());
    for (std::size_t i = 0; i < sets.size(); ++i) {
      acc += weights[i] * sets[i]->entries[t].values.cast<double>();
    }
    out.add(sets[0]->entries[t].spec, acc.cast<float>());
  }
  return out;
}

DeltaSet delta(const NamedParamSet& ckpt, const NamedParamSet& base, std::string base_id) {
  require_compatible(ckpt, base);
  NamedParamSet deltas;
  for (std::size_t t = 0; t < ckpt.size(); ++t) {
    Eigen::VectorXd d =
        ckpt.entries[t].values.cast<double>() - base.entries[t].values.cast<double>();
    deltas.add(ckpt.entries[t].spec, d.cast<float>());
  }
  return DeltaSet{std::move(base_id), std::move(deltas)};
}

NamedParamSet apply_delta(const NamedParamSet& base, const DeltaSet& d) {
  require_compatible(base, d.deltas);
  NamedParamSet out;
  for (std::size_t t = 0; t < base.size(); ++t) {
    Eigen::VectorXd sum =
        base.entries[t].values.cast<double>() + d.deltas.entries[t].values.cast<double>();
    out.add(base.entries[t].spec, sum.cast<float>());
  }
  return out;
}

double frobenius_norm(const NamedParamSet& set) {
  double acc = 0.0;
  for (const auto& e : set.entries) {
    acc += e.values.cast<double>().squaredNorm();
  }
  return std::sqrt(acc);
}

SvdResult truncated_svd(const Eigen::MatrixXd& m, int rank) {
  const int max_rank = static_cast<int>(std::min(m.rows(), m.cols()));
  if (rank < 1 || rank > max_rank) {
    throw std::invalid_argument("truncated_svd: rank " + std::to_string(rank) +
                                " out of [1, " + std::to_string(max_rank) + "]");
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  SvdResult r;
  r.u = svd.matrixU().leftCols(rank);
  r.s = svd.singularValues().head(rank);
  r.v = svd.matrixV().leftCols(rank);
  return r;
}

Eigen::Map<const RowMatrixXf> matrix_view(const NamedParamSet::Entry& entry) {
  if (entry.spec.shape.size() != 2) {
    throw std::invalid_argument("tensor '" + entry.spec.name + "' is not 2-D");
  }
  return Eigen::Map<const RowMatrixXf>(entry.values.data(), entry.spec.shape[0],
                                       entry.spec.shape[1]);
}

}  // namespace mashup
