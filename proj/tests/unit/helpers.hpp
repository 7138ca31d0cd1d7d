#pragma once

#include "mashup/rng.hpp"
#include "mashup/tensor.hpp"

#include <cmath>
#include <initializer_list>
#include <string>
#include <vector>

namespace mashup::test {

inline NamedParamSet make_set(std::initializer_list<std::pair<std::string, std::vector<float>>>
                                  tensors) {
  NamedParamSet set;
  for (const auto& [name, values] : tensors) {
    Eigen::VectorXf v(static_cast<Eigen::Index>(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i) v[static_cast<Eigen::Index>(i)] = values[i];
    set.add(TensorSpec{name, {static_cast<int>(values.size())}}, std::move(v));
  }
  return set;
}

inline NamedParamSet random_set(std::uint64_t seed,
                                std::initializer_list<std::pair<std::string, int>> tensors) {
  Rng rng(seed);
  NamedParamSet set;
  for (const auto& [name, n] : tensors) {
    Eigen::VectorXf v(n);
    for (int i = 0; i < n; ++i) v[i] = static_cast<float>(rng.normal());
    set.add(TensorSpec{name, {n}}, std::move(v));
  }
  return set;
}

// Cyclic Jacobi eigenvalues of a symmetric matrix; an SVD oracle that shares
// no code path with the implementation under test.
inline std::vector<double> jacobi_eigenvalues(Eigen::MatrixXd a) {
  const int n = static_cast<int>(a.rows());
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    }
    if (off < 1e-24) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> eigs(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) eigs[static_cast<std::size_t>(i)] = a(i, i);
  std::sort(eigs.begin(), eigs.end(), std::greater<double>());
  return eigs;
}

// Singular values of m via the Jacobi oracle on m^T m.
inline std::vector<double> oracle_singular_values(const Eigen::MatrixXd& m) {
  const Eigen::MatrixXd gram = m.transpose() * m;
  std::vector<double> eigs = jacobi_eigenvalues(gram);
  for (double& e : eigs) e = std::sqrt(std::max(0.0, e));
  return eigs;
}

}  // namespace mashup::test
