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

#ifndef MEERKAT_ZO_HPP
#define MEERKAT_ZO_HPP

#include <Eigen/Core>
#include <cstdint>
#include <utility>

#include "meerkat/masking.hpp"
#include "meerkat/model.hpp"

namespace meerkat {

struct ZOConfig {
  double epsilon = 1e-3;  // perturbation magnitude
  double eta = 2e-4;      // learning rate
};

/// Two-point masked directional quotient (f(w + eps z) - f(w - eps z)) / 2eps,
/// with z given in mask-support order. Evaluations use a scratch copy; w is
/// never modified.
double projected_gradient(const ModelSpec& spec, const Eigen::VectorXd& w,
                          const SparseMask& mask, const Eigen::VectorXd& z,
                          double epsilon, const Batch& batch);

/// Surrogate gradient g * z on the mask support (support-order values).
Eigen::VectorXd zo_gradient(double g, const Eigen::VectorXd& z);

/// Applies w[support] -= eta * g * z in support order, in place. Shared by
/// the client step and the server's virtual-path replay so both produce
/// bit-identical parameters.
void apply_masked_update(Eigen::VectorXd& w, const SparseMask& mask,
                         const Eigen::VectorXd& z, double g, double eta);

/// One local ZO step: draws z from the seed, computes the projected gradient
/// on the batch, and applies the masked update. Returns (w', g).
std::pair<Eigen::VectorXd, double> local_step(const ModelSpec& spec,
                                              const Eigen::VectorXd& w,
                                              const SparseMask& mask,
                                              std::uint64_t seed,
                                              const ZOConfig& cfg,
                                              const Batch& batch);

}  // namespace meerkat

#endif  // MEERKAT_ZO_HPP
