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

#ifndef MEERKAT_MODEL_HPP
#define MEERKAT_MODEL_HPP

#include <Eigen/Core>
#include <cstdint>
#include <vector>

namespace meerkat {

/// One minibatch: rows of `inputs` are samples; `labels` holds class ids.
/// Quadratic objectives ignore the batch, so an empty batch is allowed there.
struct Batch {
  Eigen::MatrixXd inputs;   // B x feature_dim
  Eigen::VectorXi labels;   // length B
};

enum class ModelKind { PlQuadratic, Logistic, Mlp };

/// Desk-scale differentiable objective. Parameters live in a flat vector of
/// length `dim`; the layout per kind is documented with the factory helpers.
struct ModelSpec {
  ModelKind kind = ModelKind::PlQuadratic;
  Eigen::Index dim = 0;

  // pl-quadratic: f(w) = 0.5 w'Aw - b'w, A symmetric PSD.
  Eigen::MatrixXd quad_a;
  Eigen::VectorXd quad_b;

  // logistic: w is the C x F weight matrix flattened row-major
  // (w[c * F + f] = W(c, f)), loss = mean softmax cross-entropy.
  Eigen::Index feature_dim = 0;
  Eigen::Index num_classes = 0;

  // mlp: layers = {in, hidden..., out}, tanh hidden activations, softmax
  // cross-entropy output. Per layer the flat layout is row-major weights
  // followed by biases.
  std::vector<Eigen::Index> layers;
};

ModelSpec make_quadratic(Eigen::MatrixXd a, Eigen::VectorXd b);
ModelSpec make_logistic(Eigen::Index feature_dim, Eigen::Index num_classes);
ModelSpec make_mlp(std::vector<Eigen::Index> layers);

double loss(const ModelSpec& spec, const Eigen::VectorXd& w, const Batch& batch);

/// Exact analytic gradient of `loss` w.r.t. w.
Eigen::VectorXd grad(const ModelSpec& spec, const Eigen::VectorXd& w,
                     const Batch& batch);

/// Initial parameter vector: zeros for quadratic/logistic; for mlp, weights
/// drawn N(0, 1/fan_in) from the given seed, biases zero.
Eigen::VectorXd init_params(const ModelSpec& spec, std::uint64_t seed);

/// Smallest positive eigenvalue of A (the PL constant mu). Quadratic only.
double pl_constant(const ModelSpec& spec);

/// Largest eigenvalue of A (the smoothness constant L). Quadratic only.
double smoothness(const ModelSpec& spec);

/// Minimizer w* = pinv(A) b and optimal value f(w*). Quadratic only.
Eigen::VectorXd quad_optimum(const ModelSpec& spec);
double quad_optimal_value(const ModelSpec& spec);

}  // namespace meerkat

#endif  // MEERKAT_MODEL_HPP
