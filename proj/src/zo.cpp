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

#include "meerkat/zo.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "meerkat/prng.hpp"

namespace meerkat {

double projected_gradient(const ModelSpec& spec, const Eigen::VectorXd& w,
                          const SparseMask& mask, const Eigen::VectorXd& z,
                          double epsilon, const Batch& batch) {
  if (!(epsilon > 0.0)) {
    throw std::invalid_argument("projected_gradient: epsilon must be > 0");
  }
  if (z.size() != mask.support_size()) {
    throw std::invalid_argument("projected_gradient: z not supported on mask");
  }
  // Perturb a scratch copy: the in-place perturb/restore trick loses the
  // original bits, and virtual-path replay needs a pristine w.
  Eigen::VectorXd scratch = w;
  for (Eigen::Index i = 0; i < mask.support_size(); ++i) {
    scratch[mask.support[i]] = w[mask.support[i]] + epsilon * z[i];
  }
  const double f_plus = loss(spec, scratch, batch);
  if (!std::isfinite(f_plus)) {
    throw std::runtime_error("projected_gradient: non-finite loss at +epsilon");
  }
  for (Eigen::Index i = 0; i < mask.support_size(); ++i) {
    scratch[mask.support[i]] = w[mask.support[i]] - epsilon * z[i];
  }
  const double f_minus = loss(spec, scratch, batch);
  if (!std::isfinite(f_minus)) {
    throw std::runtime_error("projected_gradient: non-finite loss at -epsilon");
  }
  return (f_plus - f_minus) / (2.0 * epsilon);
}

Eigen::VectorXd zo_gradient(double g, const Eigen::VectorXd& z) { return g * z; }

void apply_masked_update(Eigen::VectorXd& w, const SparseMask& mask,
                         const Eigen::VectorXd& z, double g, double eta) {
  for (Eigen::Index i = 0; i < mask.support_size(); ++i) {
    w[mask.support[i]] -= eta * (g * z[i]);
  }
}

std::pair<Eigen::VectorXd, double> local_step(const ModelSpec& spec,
                                              const Eigen::VectorXd& w,
                                              const SparseMask& mask,
                                              std::uint64_t seed,
                                              const ZOConfig& cfg,
                                              const Batch& batch) {
  const Eigen::VectorXd z = masked_gaussian(seed, mask);
  const double g = projected_gradient(spec, w, mask, z, cfg.epsilon, batch);
  Eigen::VectorXd next = w;
  apply_masked_update(next, mask, z, g, cfg.eta);
  return {std::move(next), g};
}

}  // namespace meerkat
