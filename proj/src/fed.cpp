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

#include "meerkat/fed.hpp"
#include "meerkat/federation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>

namespace meerkat {
namespace {

// Sequential ascending-order mean. Both the multi-step aggregation replay and
// the high-frequency round go through this, which keeps the two protocol
// paths bit-identical at T=1.
double sequential_mean(const std::vector<double>& values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

const ModelSpec& spec_for(const std::vector<ModelSpec>& specs, std::size_t k) {
  return specs.size() == 1 ? specs[0] : specs.at(k);
}

const Batch& next_batch(ClientState& client) {
  const Batch& batch = client.data.at(client.data_pointer);
  client.data_pointer = (client.data_pointer + 1) % client.data.size();
  return batch;
}

}  // namespace

ProjectedGradientLog client_round(ClientState& client,
                                  const Eigen::VectorXd& global_params,
                                  int round, int local_steps,
                                  const ModelSpec& spec, const SparseMask& mask,
                                  const SeedSchedule& schedule,
                                  const ZOConfig& zo) {
  if (local_steps < 1) {
    throw std::invalid_argument("client_round: local_steps must be >= 1");
  }
  if (client.data.empty()) {
    throw std::invalid_argument("client_round: client has no data");
  }
  ProjectedGradientLog log;
  log.client_id = client.id;
  log.round = round;
  client.params = global_params;
  for (int t = 1; t <= local_steps; ++t) {
    const Batch& batch = next_batch(client);
    const std::uint64_t seed =
        derive_seed(schedule, static_cast<std::uint64_t>(round),
                    static_cast<std::uint64_t>(t));
    try {
      auto [next, g] = local_step(spec, client.params, mask, seed, zo, batch);
      client.params = std::move(next);
      log.scalars.push_back(g);
    } catch (const std::runtime_error& e) {
      throw std::runtime_error("client " + std::to_string(client.id) + " step " +
                               std::to_string(t) + ": " + e.what());
    }
  }
  return log;
}

Eigen::VectorXd reconstruct_virtual_path(const Eigen::VectorXd& global_params,
                                         const ProjectedGradientLog& log,
                                         const SparseMask& mask,
                                         const SeedSchedule& schedule,
                                         double eta) {
  Eigen::VectorXd w = global_params;
  for (std::size_t t = 0; t < log.scalars.size(); ++t) {
    const std::uint64_t seed =
        derive_seed(schedule, static_cast<std::uint64_t>(log.round),
                    static_cast<std::uint64_t>(t + 1));
    const Eigen::VectorXd z = masked_gaussian(seed, mask);
    apply_masked_update(w, mask, z, log.scalars[t], eta);
  }
  return w;
}

Eigen::VectorXd aggregate(const std::vector<Eigen::VectorXd>& params_list) {
  if (params_list.empty()) {
    throw std::invalid_argument("aggregate: empty parameter list");
  }
  Eigen::VectorXd sum = params_list[0];
  for (std::size_t k = 1; k < params_list.size(); ++k) {
    if (params_list[k].size() != sum.size()) {
      throw std::invalid_argument("aggregate: dimension mismatch");
    }
    sum += params_list[k];
  }
  return sum / static_cast<double>(params_list.size());
}

void high_frequency_round(ServerState& server, std::vector<ClientState>& clients,
                          const std::vector<ModelSpec>& specs,
                          const RoundConfig& cfg) {
  if (cfg.mode != RoundMode::HighFrequency || cfg.local_steps != 1) {
    throw std::invalid_argument("high_frequency_round: requires T = 1 mode");
  }
  const int round = server.round + 1;
  const std::uint64_t seed =
      derive_seed(server.schedule, static_cast<std::uint64_t>(round), 1);
  const Eigen::VectorXd z = masked_gaussian(seed, server.mask);
  std::vector<double> scalars;
  scalars.reserve(clients.size());
  for (std::size_t k = 0; k < clients.size(); ++k) {
    ClientState& client = clients[k];
    const Batch& batch = next_batch(client);
    scalars.push_back(projected_gradient(spec_for(specs, k), client.params,
                                         server.mask, z, cfg.zo.epsilon, batch));
  }
  const double g = sequential_mean(scalars);
  apply_masked_update(server.global_params, server.mask, z, g, cfg.zo.eta);
  // Broadcast (g, next seed); every client applies the identical update, so
  // client and server parameters stay equal.
  for (ClientState& client : clients) {
    apply_masked_update(client.params, server.mask, z, g, cfg.zo.eta);
  }
  server.round = round;
}

CommCost communication_cost(const RoundConfig& cfg, Eigen::Index dim,
                            double density) {
  constexpr std::uint64_t kScalar = 8, kSeed = 8;
  CommCost cost;
  const auto t = static_cast<std::uint64_t>(cfg.local_steps);
  const auto sparse_params = static_cast<std::uint64_t>(
      std::floor(density * static_cast<double>(dim)));
  if (cfg.mode == RoundMode::HighFrequency) {
    cost.uplink_bytes = kScalar;
    cost.downlink_bytes = kScalar + kSeed;  // aggregated g + next seed
  } else {
    cost.uplink_bytes = kScalar * t;
    cost.downlink_bytes = kScalar * sparse_params + kSeed * t;
  }
  cost.full_uplink_bytes = kScalar * static_cast<std::uint64_t>(dim);
  cost.full_downlink_bytes = kScalar * static_cast<std::uint64_t>(dim);
  return cost;
}

void dump_round_messages(const std::vector<ProjectedGradientLog>& logs,
                         const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open message dump for write: " + path);
  for (const ProjectedGradientLog& log : logs) {
    const std::uint32_t id = static_cast<std::uint32_t>(log.client_id);
    const std::uint32_t round = static_cast<std::uint32_t>(log.round);
    const std::uint32_t count = static_cast<std::uint32_t>(log.scalars.size());
    out.write(reinterpret_cast<const char*>(&id), 4);
    out.write(reinterpret_cast<const char*>(&round), 4);
    out.write(reinterpret_cast<const char*>(&count), 4);
    out.write(reinterpret_cast<const char*>(log.scalars.data()),
              static_cast<std::streamsize>(8 * log.scalars.size()));
  }
}

std::vector<ProjectedGradientLog> load_round_messages(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open message dump: " + path);
  std::vector<ProjectedGradientLog> logs;
  for (;;) {
    std::uint32_t id, round, count;
    if (!in.read(reinterpret_cast<char*>(&id), 4)) break;
    if (!in.read(reinterpret_cast<char*>(&round), 4) ||
        !in.read(reinterpret_cast<char*>(&count), 4)) {
      throw std::runtime_error("message dump: truncated header");
    }
    ProjectedGradientLog log;
    log.client_id = static_cast<int>(id);
    log.round = static_cast<int>(round);
    log.scalars.resize(count);
    if (!in.read(reinterpret_cast<char*>(log.scalars.data()),
                 static_cast<std::streamsize>(8) * count)) {
      throw std::runtime_error("message dump: truncated payload");
    }
    logs.push_back(std::move(log));
  }
  return logs;
}

namespace {

double global_loss(const FederationSetup& setup, const std::vector<Batch>& eval,
                   const Eigen::VectorXd& w) {
  std::vector<double> losses;
  losses.reserve(eval.size());
  for (std::size_t k = 0; k < eval.size(); ++k) {
    losses.push_back(loss(spec_for(setup.specs, k), w, eval[k]));
  }
  return sequential_mean(losses);
}

Batch concat_batches(const std::vector<Batch>& parts) {
  Eigen::Index rows = 0;
  for (const Batch& b : parts) rows += b.inputs.rows();
  Batch all;
  all.inputs.resize(rows, parts.empty() ? 0 : parts[0].inputs.cols());
  all.labels.resize(rows);
  Eigen::Index pos = 0;
  for (const Batch& b : parts) {
    all.inputs.middleRows(pos, b.inputs.rows()) = b.inputs;
    all.labels.segment(pos, b.labels.size()) = b.labels;
    pos += b.inputs.rows();
  }
  return all;
}

}  // namespace

MetricsSeries run_federation(const FederationSetup& setup, const RoundConfig& cfg,
                             const std::optional<VpConfig>& vp) {
  const int num_clients = cfg.num_clients;
  if (num_clients < 1 || setup.client_data.size() != static_cast<std::size_t>(num_clients)) {
    throw std::invalid_argument("run_federation: client data must match K");
  }
  if (cfg.mode == RoundMode::HighFrequency && cfg.local_steps != 1) {
    throw std::invalid_argument("run_federation: high-frequency mode requires T = 1");
  }

  std::vector<ClientState> clients;
  for (int k = 0; k < num_clients; ++k) {
    ClientState client;
    client.id = k;
    client.params = setup.w0;
    client.data = setup.client_data[static_cast<std::size_t>(k)];
    clients.push_back(std::move(client));
  }
  std::vector<Batch> eval;
  for (const auto& data : setup.client_data) eval.push_back(concat_batches(data));

  MetricsSeries metrics;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t up_total = 0, down_total = 0;
  auto record = [&](int round, const Eigen::VectorXd& w) {
    RoundRecord row;
    row.round = round;
    row.global_loss = global_loss(setup, eval, w);
    row.gap = setup.f_star ? row.global_loss - *setup.f_star : nan;
    row.up_bytes = up_total;
    row.down_bytes = down_total;
    metrics.rounds.push_back(row);
    if (cfg.record_params) metrics.param_history.push_back(w);
  };

  Eigen::VectorXd global = setup.w0;
  record(0, global);

  const CommCost per_round =
      communication_cost(cfg, setup.w0.size(), setup.mask.density);

  // One-shot vp calibration: trajectories are collected from T_cali local
  // steps per client, the classification is frozen, and the calibration
  // updates are discarded (the global model stays at w0).
  if (vp) {
    const Eigen::VectorXd pg =
        pretrain_gradient(spec_for(setup.specs, 0), setup.w0, setup.calib);
    metrics.flags.resize(static_cast<std::size_t>(num_clients));
    for (int k = 0; k < num_clients; ++k) {
      ClientState& client = clients[static_cast<std::size_t>(k)];
      ProjectedGradientLog log =
          client_round(client, global, kCalibrationRound, vp->calibration_steps,
                       spec_for(setup.specs, static_cast<std::size_t>(k)),
                       setup.mask, setup.schedule, cfg.zo);
      GradIPTrajectory traj =
          trace_client(log, setup.mask, setup.schedule, pg, *vp);
      client.flagged = classify(traj, *vp).flagged;
      metrics.flags[static_cast<std::size_t>(k)] = client.flagged;
      metrics.trajectories.push_back(std::move(traj));
      client.params = global;  // calibration updates are not kept
      up_total += 8ull * static_cast<std::uint64_t>(vp->calibration_steps);
      down_total += per_round.downlink_bytes;
    }
  }

  ServerState server{global, setup.mask, setup.schedule, 0};
  for (int r = 1; r <= cfg.rounds; ++r) {
    try {
      if (cfg.mode == RoundMode::HighFrequency) {
        high_frequency_round(server, clients, setup.specs, cfg);
        up_total += per_round.uplink_bytes * static_cast<std::uint64_t>(num_clients);
        down_total += per_round.downlink_bytes * static_cast<std::uint64_t>(num_clients);
      } else {
        std::vector<ProjectedGradientLog> logs;
        std::size_t max_steps = 0;
        for (int k = 0; k < num_clients; ++k) {
          ClientState& client = clients[static_cast<std::size_t>(k)];
          const int steps = client.flagged ? 1 : cfg.local_steps;
          logs.push_back(client_round(
              client, server.global_params, r, steps,
              spec_for(setup.specs, static_cast<std::size_t>(k)), setup.mask,
              setup.schedule, cfg.zo));
          max_steps = std::max(max_steps, logs.back().scalars.size());
          up_total += 8ull * logs.back().scalars.size();
          down_total += per_round.downlink_bytes;
        }
        // Averaged-scalar replay: since every client shares z_t at step t and
        // the update is linear in the scalars, the mean of the reconstructed
        // client paths equals the path replayed with per-step averaged
        // scalars. Clients past their own T (early-stopped) contribute zero.
        for (std::size_t t = 0; t < max_steps; ++t) {
          std::vector<double> step_scalars;
          step_scalars.reserve(logs.size());
          for (const ProjectedGradientLog& log : logs) {
            step_scalars.push_back(t < log.scalars.size() ? log.scalars[t] : 0.0);
          }
          const double g_bar = sequential_mean(step_scalars);
          const std::uint64_t seed =
              derive_seed(setup.schedule, static_cast<std::uint64_t>(r),
                          static_cast<std::uint64_t>(t + 1));
          const Eigen::VectorXd z = masked_gaussian(seed, setup.mask);
          apply_masked_update(server.global_params, setup.mask, z, g_bar,
                              cfg.zo.eta);
        }
        server.round = r;
      }
    } catch (const std::exception& e) {
      metrics.final_params = server.global_params;
      throw FederationError(
          "round " + std::to_string(r) + ": " + e.what(), std::move(metrics));
    }
    record(r, server.global_params);
  }

  metrics.final_params = server.global_params;
  return metrics;
}

}  // namespace meerkat
