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

#include "meerkat/gradip.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "meerkat/metrics.hpp"

namespace meerkat {

Eigen::VectorXd pretrain_gradient(const ModelSpec& spec, const Eigen::VectorXd& w0,
                                  const std::vector<Batch>& calib) {
  if (calib.empty()) {
    throw std::invalid_argument("pretrain_gradient: empty calibration set");
  }
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(spec.dim);
  for (const Batch& batch : calib) {
    acc += grad(spec, w0, batch);
  }
  return acc / static_cast<double>(calib.size());
}

double gradip_score(const SparseMask& mask, const Eigen::VectorXd& zo_grad,
                    const Eigen::VectorXd& pretrain_grad) {
  return support_dot(mask, zo_grad, pretrain_grad);
}

GradIPTrajectory trace_client(const ProjectedGradientLog& log,
                              const SparseMask& mask, const SeedSchedule& schedule,
                              const Eigen::VectorXd& pretrain_grad,
                              const VpConfig& cfg) {
  if (static_cast<int>(log.scalars.size()) != cfg.calibration_steps) {
    throw std::invalid_argument("trace_client: log length != calibration steps");
  }
  const double pg_norm = cfg.cosine_support_norm
                             ? restrict_to(mask, pretrain_grad).norm()
                             : pretrain_grad.norm();
  GradIPTrajectory traj;
  traj.client_id = log.client_id;
  for (std::size_t t = 0; t < log.scalars.size(); ++t) {
    const std::uint64_t seed =
        derive_seed(schedule, static_cast<std::uint64_t>(log.round),
                    static_cast<std::uint64_t>(t + 1));
    const Eigen::VectorXd z = masked_gaussian(seed, mask);
    const Eigen::VectorXd zo_grad = log.scalars[t] * z;
    const double score = gradip_score(mask, zo_grad, pretrain_grad);
    const double norm = zo_grad.norm();
    traj.values.push_back(score);
    traj.grad_norm.push_back(norm);
    const double denom = norm * pg_norm;
    traj.cosine.push_back(denom > 0.0 ? score / denom : 0.0);
  }
  return traj;
}

Classification classify(const GradIPTrajectory& traj, const VpConfig& cfg) {
  const int n = static_cast<int>(traj.values.size());
  if (cfg.init_steps < 1 || cfg.later_steps < 1 ||
      cfg.init_steps + cfg.later_steps > n) {
    throw std::invalid_argument("classify: invalid phase windows");
  }
  Classification out;
  double init_sum = 0.0;
  for (int t = 0; t < cfg.init_steps; ++t) init_sum += traj.values[static_cast<std::size_t>(t)];
  out.init_avg = init_sum / cfg.init_steps;

  double later_sum = 0.0;
  int quiescent = 0;
  for (int t = n - cfg.later_steps; t < n; ++t) {
    const double v = traj.values[static_cast<std::size_t>(t)];
    later_sum += v;
    if (v < cfg.sigma) ++quiescent;
  }
  out.later_avg = later_sum / cfg.later_steps;
  out.rho_quie_client = static_cast<double>(quiescent) / cfg.later_steps;

  constexpr double kZeroGuard = 1e-12;
  if (std::fabs(out.later_avg) < kZeroGuard) {
    out.rho_later_client = std::fabs(out.init_avg) >= kZeroGuard
                               ? std::numeric_limits<double>::infinity()
                               : 1.0;
  } else {
    out.rho_later_client = out.init_avg / out.later_avg;
  }
  out.flagged = out.rho_later_client > cfg.rho_later ||
                out.rho_quie_client > cfg.rho_quie;
  return out;
}

std::vector<int> vp_policy(const std::vector<bool>& flags, int local_steps) {
  std::vector<int> steps(flags.size(), local_steps);
  for (std::size_t k = 0; k < flags.size(); ++k) {
    if (flags[k]) steps[k] = 1;
  }
  return steps;
}

std::string trajectory_csv(const GradIPTrajectory& traj) {
  std::ostringstream out;
  out << "client_id,step,gradip,grad_norm,cosine\n";
  for (std::size_t t = 0; t < traj.values.size(); ++t) {
    out << traj.client_id << "," << (t + 1) << "," << format_double(traj.values[t])
        << "," << format_double(traj.grad_norm[t]) << ","
        << format_double(traj.cosine[t]) << "\n";
  }
  return out.str();
}

void save_trajectory_csv(const GradIPTrajectory& traj, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open trajectory file for write: " + path);
  out << trajectory_csv(traj);
}

}  // namespace meerkat
