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

#ifndef MEERKAT_FED_HPP
#define MEERKAT_FED_HPP

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "meerkat/masking.hpp"
#include "meerkat/model.hpp"
#include "meerkat/prng.hpp"
#include "meerkat/zo.hpp"

namespace meerkat {

struct ClientState {
  int id = 0;
  Eigen::VectorXd params;
  std::vector<Batch> data;
  std::size_t data_pointer = 0;  // cyclic batch cursor
  bool flagged = false;          // early-stopped to T=1
};

struct ServerState {
  Eigen::VectorXd global_params;
  SparseMask mask;
  SeedSchedule schedule;
  int round = 0;
};

/// Ordered per-step projected-gradient scalars a client uploads for one round.
struct ProjectedGradientLog {
  int client_id = 0;
  int round = 0;
  std::vector<double> scalars;
};

enum class RoundMode { MultiStep, HighFrequency };

struct RoundConfig {
  int local_steps = 1;   // T
  int rounds = 1;        // R
  int num_clients = 1;   // K
  RoundMode mode = RoundMode::MultiStep;
  ZOConfig zo;
  bool record_params = false;  // keep the per-round global parameter history
};

/// Runs T sequential local steps from global_params, drawing batches
/// cyclically from the client's data_pointer. Mutates client.params and the
/// pointer; returns the scalar log in step order.
ProjectedGradientLog client_round(ClientState& client,
                                  const Eigen::VectorXd& global_params,
                                  int round, int local_steps,
                                  const ModelSpec& spec, const SparseMask& mask,
                                  const SeedSchedule& schedule,
                                  const ZOConfig& zo);

/// Server-side replay of a client's local update sequence from shared seeds
/// plus the logged scalars. Bit-identical to the client's final parameters.
Eigen::VectorXd reconstruct_virtual_path(const Eigen::VectorXd& global_params,
                                         const ProjectedGradientLog& log,
                                         const SparseMask& mask,
                                         const SeedSchedule& schedule,
                                         double eta);

/// Coordinate-wise mean, summed in ascending client-id (list) order.
Eigen::VectorXd aggregate(const std::vector<Eigen::VectorXd>& params_list);

/// One synchronization round of the T=1 variant: every client computes its
/// projected gradient with the shared seed on its own batch, the server
/// averages the scalars and applies a single masked update, and every client
/// applies the identical update so client and server parameters stay equal.
void high_frequency_round(ServerState& server, std::vector<ClientState>& clients,
                          const std::vector<ModelSpec>& specs,
                          const RoundConfig& cfg);

/// Per-client per-round byte counts under the fixed wire encoding:
/// 8-byte scalars and seeds, sparse parameter download of floor(density*d)
/// values. `full_*` is the full-parameter FedAvg reference (8d up and down).
struct CommCost {
  std::uint64_t uplink_bytes = 0;
  std::uint64_t downlink_bytes = 0;
  std::uint64_t full_uplink_bytes = 0;
  std::uint64_t full_downlink_bytes = 0;
};

CommCost communication_cost(const RoundConfig& cfg, Eigen::Index dim,
                            double density);

/// Binary dump of one round's uploads: per client a little-endian record
/// (client_id: u32, round: u32, count: u32, scalars: f64 x count).
void dump_round_messages(const std::vector<ProjectedGradientLog>& logs,
                         const std::string& path);
std::vector<ProjectedGradientLog> load_round_messages(const std::string& path);

}  // namespace meerkat

#endif  // MEERKAT_FED_HPP
