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

#ifndef MEERKAT_METRICS_HPP
#define MEERKAT_METRICS_HPP

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "meerkat/gradip.hpp"

namespace meerkat {

struct RoundRecord {
  int round = 0;
  double global_loss = 0.0;
  double gap = 0.0;  // NaN when f* is unknown
  std::uint64_t up_bytes = 0;    // cumulative, all clients
  std::uint64_t down_bytes = 0;  // cumulative, all clients
};

struct MetricsSeries {
  std::vector<RoundRecord> rounds;
  std::vector<bool> flags;  // per client, set when vp ran
  std::vector<GradIPTrajectory> trajectories;
  Eigen::VectorXd final_params;
  std::vector<Eigen::VectorXd> param_history;  // filled when record_params

  /// Frozen column set: round,global_loss,gap,up_bytes,down_bytes.
  std::string to_csv() const;
};

/// Repeatable shortest-exact formatting for doubles in CSV output.
std::string format_double(double v);

}  // namespace meerkat

#endif  // MEERKAT_METRICS_HPP
