#include "mashup/tensor.hpp"

#include "mashup/errors.hpp"
#include "helpers.hpp"

#include <doctest.h>

using namespace mashup;
using namespace mashup::test;

TEST_CASE("combine: weighted mean matches hand arithmetic") {
  const auto a = make_set({{"w", {1.0f, 3.0f}}});
  const auto b = make_set({{"w", {3.0f, 5.0f}}});
  const std::vector<double> w{0.5, 0.5};
  const NamedParamSet out = combine({&a, &b}, w);
  CHECK(out.entries[0].values[0] == doctest::Approx(2.0));
  CHECK(out.entries[0].values[1] == doctest::Approx(4.0));
}

TEST_CASE("combine: single set with unit weight is the identity") {
  const auto a = make_set({{"w", {1.0f, 2.0f}}});
  const std::vector<double> w{1.0};
  CHECK(combine({&a}, w) == a);
}

TEST_CASE("combine: three-set mean matches an elementwise sum oracle") {
  const auto a = make_set({{"w", {1.0f, 0.0f}}});
  const auto b = make_set({{"w", {0.0f, 1.0f}}});
  const auto c = make_set({{"w", {1.0f, 1.0f}}});
  const std::vector<double> w{1.0 / 3, 1.0 / 3, 1.0 / 3};
  const NamedParamSet out = combine({&a, &b, &c}, w);

  // Independent oracle: plain scalar loop over the inputs.
  for (int j = 0; j < 2; ++j) {
    double expected = 0.0;
    for (const auto* s : {&a, &b, &c}) {
      expected += s->entries[0].values[j] / 3.0;
    }
    CHECK(out.entries[0].values[j] == doctest::Approx(expected).epsilon(1e-6));
  }
  CHECK(out.entries[0].values[0] == doctest::Approx(2.0 / 3).epsilon(1e-6));
}

TEST_CASE("combine: linear in the weights") {
  const auto a = random_set(1, {{"w", 33}, {"b", 7}});
  const auto b = random_set(2, {{"w", 33}, {"b", 7}});
  const std::vector<double> w1{0.3, 0.4};
  const std::vector<double> w2{0.5, -0.2};
  std::vector<double> sum{w1[0] + w2[0], w1[1] + w2[1]};

  const NamedParamSet lhs = combine({&a, &b}, sum);
  const NamedParamSet r1 = combine({&a, &b}, w1);
  const NamedParamSet r2 = combine({&a, &b}, w2);
  for (std::size_t t = 0; t < lhs.size(); ++t) {
    for (Eigen::Index j = 0; j < lhs.entries[t].values.size(); ++j) {
      CHECK(lhs.entries[t].values[j] ==
            doctest::Approx(r1.entries[t].values[j] + r2.entries[t].values[j]).epsilon(1e-6));
    }
  }
}

TEST_CASE("combine: uniform weights over identical sets return the set exactly") {
  const auto a = random_set(3, {{"w", 50}});
  const std::vector<double> w{0.25, 0.25, 0.25, 0.25};
  CHECK(combine({&a, &a, &a, &a}, w) == a);
}

TEST_CASE("combine: incompatible sets name the first mismatching tensor") {
  const auto a = make_set({{"w", {1.0f}}, {"b", {1.0f}}});
  const auto b = make_set({{"w", {1.0f}}, {"c", {1.0f}}});
  const std::vector<double> w{0.5, 0.5};
  CHECK_THROWS_WITH_AS(combine({&a, &b}, w),
                       doctest::Contains("'b' vs 'c'"), CompatibilityError);
}

TEST_CASE("delta: subtraction, self-delta, and round-trip") {
  const auto ckpt = make_set({{"w", {3.0f, 5.0f}}});
  const auto base = make_set({{"w", {1.0f, 2.0f}}});
  const DeltaSet d = delta(ckpt, base, "base");
  CHECK(d.base_id == "base");
  CHECK(d.deltas.entries[0].values[0] == doctest::Approx(2.0));
  CHECK(d.deltas.entries[0].values[1] == doctest::Approx(3.0));

  const DeltaSet zero = delta(base, base);
  for (Eigen::Index j = 0; j < zero.deltas.entries[0].values.size(); ++j) {
    CHECK(zero.deltas.entries[0].values[j] == 0.0f);
  }
}

TEST_CASE("delta/apply round-trip is exact to f32 associativity on random tensors") {
  const auto ckpt = random_set(11, {{"w", 300}, {"b", 40}});
  const auto base = random_set(12, {{"w", 300}, {"b", 40}});
  const NamedParamSet back = apply_delta(base, delta(ckpt, base));
  for (std::size_t t = 0; t < ckpt.size(); ++t) {
    for (Eigen::Index j = 0; j < ckpt.entries[t].values.size(); ++j) {
      const double expect = ckpt.entries[t].values[j];
      const double got = back.entries[t].values[j];
      CHECK(std::abs(got - expect) <= 1e-6 * std::max(1.0, std::abs(expect)));
    }
  }
}

TEST_CASE("truncated_svd: exact-rank matrix reconstructs to zero error") {
  // rank-2 by construction: outer products of two vector pairs
  Eigen::MatrixXd m = Eigen::Vector4d(1, 2, 3, 4) * Eigen::RowVector3d(1, 0, 2) +
                      Eigen::Vector4d(0, 1, 1, 0) * Eigen::RowVector3d(2, 1, 0);
  const SvdResult r = truncated_svd(m, 2);
  const Eigen::MatrixXd rec = r.u * r.s.asDiagonal() * r.v.transpose();
  CHECK((rec - m).norm() < 1e-6);
}

TEST_CASE("truncated_svd: identity has unit singular values") {
  const SvdResult r = truncated_svd(Eigen::MatrixXd::Identity(3, 3), 3);
  for (int i = 0; i < 3; ++i) CHECK(r.s[i] == doctest::Approx(1.0));
}

TEST_CASE("truncated_svd: error equals the discarded-spectrum norm (Eckart-Young oracle)") {
  Rng rng(77);
  Eigen::MatrixXd m(8, 6);
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 6; ++j) m(i, j) = rng.normal();
  }
  const int rank = 3;
  const SvdResult r = truncated_svd(m, rank);
  const double err = (m - r.u * r.s.asDiagonal() * r.v.transpose()).norm();

  const std::vector<double> sigma = oracle_singular_values(m);
  double tail = 0.0;
  for (std::size_t i = rank; i < sigma.size(); ++i) tail += sigma[i] * sigma[i];
  CHECK(err == doctest::Approx(std::sqrt(tail)).epsilon(1e-8));

  // leading singular values agree with the oracle as well
  for (int i = 0; i < rank; ++i) {
    CHECK(r.s[i] == doctest::Approx(sigma[static_cast<std::size_t>(i)]).epsilon(1e-8));
  }
}

TEST_CASE("truncated_svd: reconstruction error is non-increasing in rank") {
  Rng rng(78);
  Eigen::MatrixXd m(7, 5);
  for (int i = 0; i < 7; ++i) {
    for (int j = 0; j < 5; ++j) m(i, j) = rng.normal();
  }
  double prev = std::numeric_limits<double>::infinity();
  for (int rank = 1; rank <= 5; ++rank) {
    const SvdResult r = truncated_svd(m, rank);
    const double err = (m - r.u * r.s.asDiagonal() * r.v.transpose()).norm();
    CHECK(err <= prev + 1e-12);
    prev = err;
  }
}

TEST_CASE("truncated_svd: rank out of range") {
  CHECK_THROWS_AS(truncated_svd(Eigen::MatrixXd::Identity(3, 3), 4), std::invalid_argument);
  CHECK_THROWS_AS(truncated_svd(Eigen::MatrixXd::Identity(3, 3), 0), std::invalid_argument);
}

TEST_CASE("frobenius_norm: hand values and elementwise oracle") {
  CHECK(frobenius_norm(make_set({{"w", {3.0f, 4.0f}}})) == doctest::Approx(5.0));
  CHECK(frobenius_norm(make_set({{"w", {0.0f, 0.0f, 0.0f}}})) == 0.0);
  CHECK(frobenius_norm(make_set({{"a", {1.0f, 1.0f}}, {"b", {1.0f, 1.0f}}})) ==
        doctest::Approx(2.0));
}

TEST_CASE("named set rejects malformed tensors") {
  NamedParamSet set;
  CHECK_THROWS_AS(set.add(TensorSpec{"w", {}}, Eigen::VectorXf::Zero(1)), std::invalid_argument);
  CHECK_THROWS_AS(set.add(TensorSpec{"w", {2}}, Eigen::VectorXf::Zero(3)), std::invalid_argument);
  set.add(TensorSpec{"w", {2}}, Eigen::VectorXf::Zero(2));
  CHECK_THROWS_AS(set.add(TensorSpec{"w", {2}}, Eigen::VectorXf::Zero(2)), std::invalid_argument);
}
