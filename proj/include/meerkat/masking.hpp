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

#ifndef MEERKAT_MASKING_HPP
#define MEERKAT_MASKING_HPP

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "meerkat/model.hpp"

namespace meerkat {

/// Static binary selector of the parameters eligible for perturbation and
/// update. Support indices are sorted ascending and strictly increasing.
struct SparseMask {
  Eigen::Index dim = 0;
  std::vector<Eigen::Index> support;
  double density = 0.0;

  Eigen::Index support_size() const {
    return static_cast<Eigen::Index>(support.size());
  }
};

/// Builds a mask from an explicit (sorted or unsorted) index set.
SparseMask make_mask(Eigen::Index dim, std::vector<Eigen::Index> support);

/// Embeds values given on the mask support into a dense zero-padded vector.
Eigen::VectorXd embed(const SparseMask& mask, const Eigen::VectorXd& values);

/// Restricts a dense vector to the mask support (values in support order).
Eigen::VectorXd restrict_to(const SparseMask& mask, const Eigen::VectorXd& dense);

/// Inner product between support-order values and a dense vector; off-support
/// terms of the dense vector do not contribute.
double support_dot(const SparseMask& mask, const Eigen::VectorXd& values,
                   const Eigen::VectorXd& dense);

/// Elementwise mean over batches of the squared exact gradient at w.
Eigen::VectorXd avg_squared_gradients(const ModelSpec& spec,
                                      const Eigen::VectorXd& w,
                                      const std::vector<Batch>& calib);

/// Support = indices of the k = max(1, floor(density * d)) largest scores,
/// ties broken by lower index.
SparseMask top_k_mask(const Eigen::VectorXd& scores, double density);

enum class BaselineMaskKind { WeightMagnitude, Random, Full };

SparseMask baseline_mask(BaselineMaskKind kind, const Eigen::VectorXd& w,
                         double density, std::uint64_t seed);

/// Text format: header "dim=<d> density=<u>" then one index per line.
void save_mask(const SparseMask& mask, std::ostream& out);
SparseMask load_mask(std::istream& in);
void save_mask_file(const SparseMask& mask, const std::string& path);
SparseMask load_mask_file(const std::string& path);

}  // namespace meerkat

#endif  // MEERKAT_MASKING_HPP
