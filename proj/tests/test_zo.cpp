/*
 * Copyright 2026 The Meerkat Simulator Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <doctest.h>

#include <cmath>

#include "meerkat/prng.hpp"
#include "meerkat/zo.hpp"
#include "test_util.hpp"

using namespace meerkat;

namespace {

Eigen::VectorXd random_params(Eigen::Index dim, std::uint64_t seed) {
  GaussianStream stream(seed);
  Eigen::VectorXd w(dim);
  for (Eigen::Index i = 0; i < dim; ++i) w[i] = stream.next_normal();
  return w;
}

Batch random_batch(Eigen::Index rows, Eigen::Index features, int classes,
                   std::uint64_t seed) {
  GaussianStream stream(seed);
  Batch batch;
  batch.inputs.resize(rows, features);
  batch.labels.resize(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index f = 0; f < features; ++f) {
      batch.inputs(i, f) = stream.next_normal();
    }
    batch.labels[i] = static_cast<int>(stream.next_u64() %
                                       static_cast<std::uint64_t>(classes));
  }
  return batch;
}

}  // namespace

TEST_CASE("projected gradient vanishes at a symmetric point") {
  const Eigen::Index d = 6;
  const ModelSpec spec = make_quadratic(Eigen::MatrixXd::Identity(d, d),
                                        Eigen::VectorXd::Zero(d));
  const SparseMask mask = make_mask(d, {0, 2, 4});
  const Eigen::VectorXd z = masked_gaussian(1, mask);
  CHECK(projected_gradient(spec, Eigen::VectorXd::Zero(d), mask, z, 1e-3,
                           Batch{}) == 0.0);
}

TEST_CASE("projected gradient is exact for an affine loss") {
  // f(w) = b'w is the quadratic spec with A = 0 and loss -(-b)'w; use
  // A = 0, quad_b = -b so f = b'w. The two-point rule is exact for affine f.
  const Eigen::Index d = 5;
  const Eigen::VectorXd b = random_params(d, 2);
  const ModelSpec spec = make_quadratic(Eigen::MatrixXd::Zero(d, d), -b);
  const SparseMask mask = make_mask(d, {0, 1, 3});
  const Eigen::VectorXd z = masked_gaussian(3, mask);
  const Eigen::VectorXd w = random_params(d, 4);
  for (double eps : {1e-1, 1e-3, 1e-6}) {
    const double g = projected_gradient(spec, w, mask, z, eps, Batch{});
    CHECK(g == doctest::Approx(support_dot(mask, z, b)).epsilon(1e-9));
  }
}

TEST_CASE("projected gradient truncation error is O(eps^2) on logistic") {
  const ModelSpec spec = make_logistic(4, 3);
  const SparseMask mask = make_mask(spec.dim, {0, 3, 5, 8, 11});
  const Eigen::VectorXd z = masked_gaussian(5, mask);
  const Eigen::VectorXd w = random_params(spec.dim, 6);
  const Batch batch = random_batch(6, 4, 3, 7);
  const double exact = support_dot(mask, z, grad(spec, w, batch));
  const double e1 = std::fabs(
      projected_gradient(spec, w, mask, z, 4e-2, batch) - exact);
  const double e2 = std::fabs(
      projected_gradient(spec, w, mask, z, 2e-2, batch) - exact);
  const double e3 = std::fabs(
      projected_gradient(spec, w, mask, z, 1e-2, batch) - exact);
  // Halving eps should roughly quarter the error.
  CHECK(e1 / e2 > 2.0);
  CHECK(e2 / e3 > 2.0);
}

TEST_CASE("projected gradient never mutates w") {
  const ModelSpec spec = make_logistic(3, 2);
  const SparseMask mask = make_mask(spec.dim, {0, 1, 2, 3, 4, 5});
  const Eigen::VectorXd z = masked_gaussian(8, mask);
  const Eigen::VectorXd w = random_params(spec.dim, 9);
  const Eigen::VectorXd before = w;
  (void)projected_gradient(spec, w, mask, z, 1e-3, random_batch(4, 3, 2, 10));
  CHECK(bits_equal(w, before));
}

TEST_CASE("zo_gradient scalar product") {
  Eigen::VectorXd z(2);
  z << 1.0, -2.0;
  CHECK(zo_gradient(0.0, z).norm() == 0.0);
  const Eigen::VectorXd unit = Eigen::VectorXd::Unit(5, 3);
  CHECK(zo_gradient(2.0, unit)[3] == 2.0);
}

TEST_CASE("local_step keeps off-support coordinates bit-identical") {
  const ModelSpec spec = make_logistic(4, 3);
  const SparseMask mask = make_mask(spec.dim, {1, 5, 9});
  const Eigen::VectorXd w = random_params(spec.dim, 11);
  const auto [next, g] = local_step(spec, w, mask, 12, ZOConfig{1e-3, 0.1},
                                    random_batch(4, 4, 3, 13));
  for (Eigen::Index i = 0; i < spec.dim; ++i) {
    if (i != 1 && i != 5 && i != 9) CHECK(next[i] == w[i]);
  }
  CHECK(g != 0.0);
}

TEST_CASE("local_step with g = 0 returns w bit-exactly") {
  const Eigen::Index d = 4;
  const ModelSpec spec = make_quadratic(Eigen::MatrixXd::Identity(d, d),
                                        Eigen::VectorXd::Zero(d));
  const SparseMask mask = make_mask(d, {0, 1, 2, 3});
  const Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  const auto [next, g] = local_step(spec, w, mask, 14, ZOConfig{1e-3, 0.5}, Batch{});
  CHECK(g == 0.0);
  CHECK(bits_equal(next, w));
}

TEST_CASE("quadratic local_step matches the closed form") {
  // For f = 0.5 w'w the two-point rule is exact: g = <w, z> on the support.
  const Eigen::Index d = 8;
  const ModelSpec spec = make_quadratic(Eigen::MatrixXd::Identity(d, d),
                                        Eigen::VectorXd::Zero(d));
  const SparseMask mask = make_mask(d, {0, 2, 4, 6});
  const Eigen::VectorXd w = random_params(d, 15);
  const std::uint64_t seed = 16;
  const ZOConfig cfg{1e-3, 0.05};
  const auto [next, g] = local_step(spec, w, mask, seed, cfg, Batch{});
  const Eigen::VectorXd z = masked_gaussian(seed, mask);
  CHECK(g == doctest::Approx(support_dot(mask, z, w)).epsilon(1e-9));
  Eigen::VectorXd expected = w;
  for (Eigen::Index i = 0; i < mask.support_size(); ++i) {
    expected[mask.support[i]] -= cfg.eta * g * z[i];
  }
  CHECK((next - expected).norm() < 1e-12);
}

TEST_CASE("local_step is deterministic") {
  const ModelSpec spec = make_logistic(3, 2);
  const SparseMask mask = make_mask(spec.dim, {0, 2, 4});
  const Eigen::VectorXd w = random_params(spec.dim, 17);
  const Batch batch = random_batch(5, 3, 2, 18);
  const auto a = local_step(spec, w, mask, 19, ZOConfig{}, batch);
  const auto b = local_step(spec, w, mask, 19, ZOConfig{}, batch);
  CHECK(a.second == b.second);
  CHECK(bits_equal(a.first, b.first));
}

TEST_CASE("Monte Carlo unbiasedness toward the masked gradient") {
  // Mean over fresh z of g(z) z approaches m .* grad f.
  const ModelSpec spec = make_logistic(4, 5);  // d = 20
  const SparseMask mask = make_mask(spec.dim, {0, 4, 9, 13, 18});
  const Eigen::VectorXd w = random_params(spec.dim, 20);
  const Batch batch = random_batch(8, 4, 5, 21);
  const Eigen::VectorXd masked_grad =
      embed(mask, restrict_to(mask, grad(spec, w, batch)));
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(spec.dim);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd z =
        masked_gaussian(0xAB0000ull + static_cast<std::uint64_t>(i), mask);
    const double g = projected_gradient(spec, w, mask, z, 1e-3, batch);
    mean += embed(mask, zo_gradient(g, z));
  }
  mean /= static_cast<double>(n);
  CHECK((mean - masked_grad).norm() / masked_grad.norm() < 0.03);
}

TEST_CASE("Monte Carlo second moment matches (s+2) * masked grad norm^2") {
  // Quadratic model, where the projected gradient is exact in eps.
  const Eigen::Index d = 20;
  GaussianStream stream(22);
  Eigen::MatrixXd gmat(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) gmat(i, j) = stream.next_normal();
  const ModelSpec spec =
      make_quadratic(0.1 * gmat * gmat.transpose(), random_params(d, 23));
  const SparseMask mask = make_mask(d, {1, 5, 10, 15, 19});
  const Eigen::VectorXd w = random_params(d, 24);
  const double target =
      static_cast<double>(mask.support_size() + 2) *
      restrict_to(mask, grad(spec, w, Batch{})).squaredNorm();
  double mean_sq = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd z =
        masked_gaussian(0xCD0000ull + static_cast<std::uint64_t>(i), mask);
    const double g = projected_gradient(spec, w, mask, z, 1e-3, Batch{});
    mean_sq += zo_gradient(g, z).squaredNorm();
  }
  mean_sq /= static_cast<double>(n);
  CHECK(std::fabs(mean_sq - target) / target < 0.03);
}
