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

#ifndef MEERKAT_EXPERIMENT_HPP
#define MEERKAT_EXPERIMENT_HPP

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "meerkat/data.hpp"
#include "meerkat/federation.hpp"

namespace meerkat {

/// Invalid or out-of-domain configuration; maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class MaskKind { Meerkat, WeightMagnitude, Random, Full };

struct QuadraticConfig {
  Eigen::Index dim = 10;
  double eig_min = 1.0;
  double eig_max = 1.0;
  double client_shift = 0.0;  // std-dev of per-client optimum shifts
};

struct DataConfig {
  int classes = 3;
  Eigen::Index per_class = 100;
  Eigen::Index feature_dim = 4;
  double spread = 1.0;
  PartitionSpec partition;
  Eigen::Index batch_size = 16;
  double calib_fraction = 0.1;
};

/// Schema-validated experiment description; unknown config keys are rejected.
struct ExperimentConfig {
  int schema_version = 1;
  std::uint64_t master_seed = 0;
  std::string output_dir = "out";
  ModelKind model_kind = ModelKind::Logistic;
  QuadraticConfig quadratic;
  std::vector<Eigen::Index> mlp_hidden;
  std::optional<DataConfig> data;
  MaskKind mask_kind = MaskKind::Meerkat;
  double mask_density = 1e-3;
  RoundConfig round;
  std::optional<VpConfig> vp;
  std::vector<MaskKind> baselines;  // for compare
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config_file(const std::string& path);

/// Everything run_federation needs, materialized deterministically from the
/// config and master seed.
struct BuiltExperiment {
  FederationSetup setup;
  RoundConfig round;
  std::optional<VpConfig> vp;
};

BuiltExperiment build_experiment(const ExperimentConfig& cfg);

/// Output directory after the MEERKAT_OUT environment override.
std::string resolve_output_dir(const ExperimentConfig& cfg);

// CLI entry points. Exit codes: 0 success, 2 invalid config, 3 numerical
// failure. Errors are reported on stderr.
int cmd_run(const std::string& config_path);
int cmd_mask(const std::string& config_path, const std::string& out_path);
int cmd_compare(const std::string& config_path);
int cmd_gradip(const std::string& config_path);

}  // namespace meerkat

#endif  // MEERKAT_EXPERIMENT_HPP
