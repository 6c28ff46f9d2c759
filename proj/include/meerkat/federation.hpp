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

#ifndef MEERKAT_FEDERATION_HPP
#define MEERKAT_FEDERATION_HPP

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "meerkat/fed.hpp"
#include "meerkat/gradip.hpp"
#include "meerkat/metrics.hpp"

namespace meerkat {

/// Thrown when a client aborts a round; carries whatever metrics were
/// completed so callers can flush them.
class FederationError : public std::runtime_error {
 public:
  FederationError(const std::string& what, MetricsSeries partial)
      : std::runtime_error(what), partial_metrics(std::move(partial)) {}

  MetricsSeries partial_metrics;
};

/// Round index reserved for the one-shot vp calibration phase; never collides
/// with training rounds 1..R.
inline constexpr int kCalibrationRound = 1000000007;

/// Everything one federation run needs besides the round/vp configuration.
/// `specs` holds one model per client (size K) or a single shared model.
struct FederationSetup {
  std::vector<ModelSpec> specs;
  SparseMask mask;
  SeedSchedule schedule;
  Eigen::VectorXd w0;
  std::vector<std::vector<Batch>> client_data;
  std::vector<Batch> calib;          // pre-training batches for GradIP
  std::optional<double> f_star;      // optimal value when known
};

/// Executes R rounds of the protocol (multi-step or high-frequency), with an
/// optional vp calibration phase first, and records per-round global loss,
/// communication bytes, flags, and GradIP trajectories.
MetricsSeries run_federation(const FederationSetup& setup, const RoundConfig& cfg,
                             const std::optional<VpConfig>& vp);

}  // namespace meerkat

#endif  // MEERKAT_FEDERATION_HPP
