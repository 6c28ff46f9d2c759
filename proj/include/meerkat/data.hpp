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

#ifndef MEERKAT_DATA_HPP
#define MEERKAT_DATA_HPP

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "meerkat/model.hpp"

namespace meerkat {

struct Dataset {
  Eigen::MatrixXd inputs;  // N x feature_dim
  Eigen::VectorXi labels;  // length N, values in [0, num_classes)
  int num_classes = 0;

  Eigen::Index size() const { return inputs.rows(); }
};

enum class PartitionKind { Iid, Dirichlet, SingleLabel };

struct PartitionSpec {
  PartitionKind kind = PartitionKind::Iid;
  double alpha = 0.5;  // dirichlet concentration
  int num_clients = 1;
  std::uint64_t seed = 0;
};

/// Gaussian class clusters with unit-separated means, deterministic in seed.
Dataset make_blobs(int num_classes, Eigen::Index per_class,
                   Eigen::Index feature_dim, double spread, std::uint64_t seed);

/// Disjoint index lists covering {0..N-1}. Dirichlet draws per-class client
/// proportions; every client is guaranteed at least one sample.
std::vector<std::vector<Eigen::Index>> partition(const Dataset& ds,
                                                 const PartitionSpec& spec);

/// Fixed seeded shuffle of the index list, chunked into batches; the last
/// batch may be short.
std::vector<Batch> batches(const Dataset& ds,
                           const std::vector<Eigen::Index>& indices,
                           Eigen::Index batch_size, std::uint64_t seed);

/// One batch holding the listed samples in order (evaluation helper).
Batch gather(const Dataset& ds, const std::vector<Eigen::Index>& indices);

/// CSV round trip: feature columns then a label column.
void save_dataset_csv(const Dataset& ds, const std::string& path);
Dataset load_dataset_csv(const std::string& path);

}  // namespace meerkat

#endif  // MEERKAT_DATA_HPP
