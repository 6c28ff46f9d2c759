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

#ifndef MEERKAT_GRADIP_HPP
#define MEERKAT_GRADIP_HPP

#include <Eigen/Core>
#include <string>
#include <vector>

#include "meerkat/fed.hpp"

namespace meerkat {

/// Per-client per-step GradIP scalars from the calibration phase, with the
/// companion gradient-norm and cosine series.
struct GradIPTrajectory {
  int client_id = 0;
  std::vector<double> values;
  std::vector<double> grad_norm;
  std::vector<double> cosine;
};

/// Calibration / classification thresholds for Meerkat-vp.
struct VpConfig {
  int calibration_steps = 100;  // T_cali
  int init_steps = 20;          // T_init
  int later_steps = 20;         // T_later
  double sigma = 1.0;           // convergence threshold
  double rho_later = 2.0;       // initial-to-later ratio threshold
  double rho_quie = 0.5;        // quiescent step ratio threshold
  /// Cosine diagnostic normalization: full-vector norm of the pre-training
  /// gradient by default, mask-support restriction when set.
  bool cosine_support_norm = false;
};

struct Classification {
  bool flagged = false;
  double init_avg = 0.0;
  double later_avg = 0.0;
  double rho_later_client = 0.0;
  double rho_quie_client = 0.0;
};

/// Mean exact gradient over the calibration batches at w0; computed once and
/// frozen for the whole run.
Eigen::VectorXd pretrain_gradient(const ModelSpec& spec, const Eigen::VectorXd& w0,
                                  const std::vector<Batch>& calib);

/// Inner product between a support-order ZO gradient and a dense gradient.
double gradip_score(const SparseMask& mask, const Eigen::VectorXd& zo_grad,
                    const Eigen::VectorXd& pretrain_grad);

/// Server-side trajectory: regenerates each step's perturbation from the
/// shared seeds and records GradIP, surrogate gradient norm, and cosine.
GradIPTrajectory trace_client(const ProjectedGradientLog& log,
                              const SparseMask& mask, const SeedSchedule& schedule,
                              const Eigen::VectorXd& pretrain_grad,
                              const VpConfig& cfg);

Classification classify(const GradIPTrajectory& traj, const VpConfig& cfg);

/// Per-client local-step override: flagged clients run one local step per
/// round from here on, resuming batches from their data pointer.
std::vector<int> vp_policy(const std::vector<bool>& flags, int local_steps);

/// CSV with columns client_id, step, gradip, grad_norm, cosine.
void save_trajectory_csv(const GradIPTrajectory& traj, const std::string& path);
std::string trajectory_csv(const GradIPTrajectory& traj);

}  // namespace meerkat

#endif  // MEERKAT_GRADIP_HPP
