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

#include <doctest.h>

#include <cstdio>
#include <optional>

#include "meerkat/data.hpp"
#include "meerkat/federation.hpp"
#include "test_util.hpp"

using namespace meerkat;

namespace {

Eigen::VectorXd random_params(Eigen::Index dim, std::uint64_t seed) {
  GaussianStream stream(seed);
  Eigen::VectorXd w(dim);
  for (Eigen::Index i = 0; i < dim; ++i) w[i] = stream.next_normal();
  return w;
}

ModelSpec random_quadratic(Eigen::Index d, std::uint64_t seed, double scale) {
  GaussianStream stream(seed);
  Eigen::MatrixXd g(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) g(i, j) = stream.next_normal();
  return make_quadratic(scale * g * g.transpose() +
                            Eigen::MatrixXd::Identity(d, d),
                        random_params(d, seed + 1));
}

ClientState make_client(int id, const Eigen::VectorXd& w0,
                        std::vector<Batch> data) {
  ClientState c;
  c.id = id;
  c.params = w0;
  c.data = std::move(data);
  return c;
}

}  // namespace

TEST_CASE("client_round at T=1 equals one local step") {
  const Eigen::Index d = 6;
  const ModelSpec spec = random_quadratic(d, 2, 0.2);
  const SparseMask mask = make_mask(d, {0, 2, 3, 5});
  const SeedSchedule schedule{77};
  const Eigen::VectorXd w0 = random_params(d, 4);
  const ZOConfig zo{1e-3, 0.01};

  ClientState client = make_client(0, w0, {Batch{}});
  const ProjectedGradientLog log =
      client_round(client, w0, 3, 1, spec, mask, schedule, zo);
  REQUIRE(log.scalars.size() == 1);

  const auto [expected, g] =
      local_step(spec, w0, mask, derive_seed(schedule, 3, 1), zo, Batch{});
  CHECK(log.scalars[0] == g);
  CHECK(bits_equal(client.params, expected));
}

TEST_CASE("client_round T=3 chains local steps and cycles batches") {
  const Dataset ds = make_blobs(3, 8, 2, 1.0, 5);
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < ds.size(); ++i) idx.push_back(i);
  const std::vector<Batch> data = batches(ds, idx, 4, 9);  // 6 batches

  const ModelSpec spec = make_logistic(2, 3);
  const SparseMask mask = make_mask(spec.dim, {0, 1, 3, 5});
  const SeedSchedule schedule{123};
  const Eigen::VectorXd w0 = random_params(spec.dim, 6);
  const ZOConfig zo{1e-3, 0.05};

  ClientState client = make_client(4, w0, data);
  const ProjectedGradientLog log =
      client_round(client, w0, 7, 3, spec, mask, schedule, zo);
  CHECK(log.client_id == 4);
  CHECK(log.round == 7);
  REQUIRE(log.scalars.size() == 3);
  CHECK(client.data_pointer == 3);

  Eigen::VectorXd w = w0;
  for (int t = 1; t <= 3; ++t) {
    const auto [next, g] = local_step(
        spec, w, mask, derive_seed(schedule, 7, static_cast<std::uint64_t>(t)),
        zo, data[static_cast<std::size_t>(t - 1)]);
    w = next;
    CHECK(log.scalars[static_cast<std::size_t>(t - 1)] == g);
  }
  CHECK(bits_equal(client.params, w));

  // Re-running the round from the same state is bit-identical.
  ClientState again = make_client(4, w0, data);
  const ProjectedGradientLog log2 =
      client_round(again, w0, 7, 3, spec, mask, schedule, zo);
  CHECK(log2.scalars == log.scalars);
  CHECK(bits_equal(again.params, client.params));
}

TEST_CASE("virtual path reconstruction is bit-exact") {
  const Eigen::Index d = 12;
  const ModelSpec spec = random_quadratic(d, 8, 0.1);
  const SparseMask mask = make_mask(d, {1, 4, 6, 7, 10});
  const SeedSchedule schedule{314};
  const Eigen::VectorXd w0 = random_params(d, 9);
  const ZOConfig zo{1e-3, 0.02};

  // Empty log: unchanged parameters.
  CHECK(bits_equal(
      reconstruct_virtual_path(w0, ProjectedGradientLog{}, mask, schedule, zo.eta),
      w0));

  // One step with a hand-supplied scalar: w0 - eta * g * z on the support.
  {
    ProjectedGradientLog log;
    log.round = 2;
    log.scalars = {1.5};
    const Eigen::VectorXd z = masked_gaussian(derive_seed(schedule, 2, 1), mask);
    Eigen::VectorXd expected = w0;
    for (Eigen::Index i = 0; i < mask.support_size(); ++i) {
      expected[mask.support[i]] -= zo.eta * 1.5 * z[i];
    }
    CHECK(bits_equal(reconstruct_virtual_path(w0, log, mask, schedule, zo.eta),
                     expected));
  }

  // Client and server agree bitwise for short and long rounds.
  for (int steps : {1, 10, 100}) {
    ClientState client = make_client(0, w0, {Batch{}});
    const ProjectedGradientLog log =
        client_round(client, w0, steps, steps, spec, mask, schedule, zo);
    const Eigen::VectorXd replayed =
        reconstruct_virtual_path(w0, log, mask, schedule, zo.eta);
    CHECK(bits_equal(replayed, client.params));
  }
}

TEST_CASE("aggregate averages coordinate-wise") {
  Eigen::VectorXd a(2), b(2);
  a << 0.0, 2.0;
  b << 2.0, 0.0;
  const Eigen::VectorXd mean = aggregate({a, b});
  CHECK(mean[0] == 1.0);
  CHECK(mean[1] == 1.0);
  CHECK(bits_equal(aggregate({a}), a));
  CHECK_THROWS_AS(aggregate({}), std::invalid_argument);
  CHECK_THROWS_AS(aggregate({a, Eigen::VectorXd::Zero(3)}),
                  std::invalid_argument);
}

TEST_CASE("high_frequency_round with one client equals a local step") {
  const Eigen::Index d = 5;
  const ModelSpec spec = random_quadratic(d, 11, 0.3);
  const SparseMask mask = make_mask(d, {0, 1, 2, 3, 4});
  const SeedSchedule schedule{55};
  const Eigen::VectorXd w0 = random_params(d, 12);

  RoundConfig cfg;
  cfg.mode = RoundMode::HighFrequency;
  cfg.local_steps = 1;
  cfg.zo = ZOConfig{1e-3, 0.01};

  ServerState server{w0, mask, schedule, 0};
  std::vector<ClientState> clients{make_client(0, w0, {Batch{}})};
  high_frequency_round(server, clients, {spec}, cfg);

  const auto [expected, g] =
      local_step(spec, w0, mask, derive_seed(schedule, 1, 1), cfg.zo, Batch{});
  CHECK(bits_equal(server.global_params, expected));
  CHECK(bits_equal(clients[0].params, expected));
  CHECK(server.round == 1);
  (void)g;
}

TEST_CASE("high_frequency_round applies the averaged scalar") {
  // Affine per-client models f_k = b_k' w: each scalar is <z, b_k> exactly,
  // so the server update uses the mean of those inner products.
  const Eigen::Index d = 4;
  const Eigen::VectorXd b0 = random_params(d, 13);
  const Eigen::VectorXd b1 = random_params(d, 14);
  const std::vector<ModelSpec> specs = {
      make_quadratic(Eigen::MatrixXd::Zero(d, d), -b0),
      make_quadratic(Eigen::MatrixXd::Zero(d, d), -b1)};
  const SparseMask mask = make_mask(d, {0, 1, 2, 3});
  const SeedSchedule schedule{91};
  const Eigen::VectorXd w0 = random_params(d, 15);

  RoundConfig cfg;
  cfg.mode = RoundMode::HighFrequency;
  cfg.num_clients = 2;
  cfg.zo = ZOConfig{1e-3, 0.1};

  ServerState server{w0, mask, schedule, 0};
  std::vector<ClientState> clients{make_client(0, w0, {Batch{}}),
                                   make_client(1, w0, {Batch{}})};
  high_frequency_round(server, clients, specs, cfg);

  const Eigen::VectorXd z = masked_gaussian(derive_seed(schedule, 1, 1), mask);
  const double g0 = support_dot(mask, z, b0);
  const double g1 = support_dot(mask, z, b1);
  const double g_bar = (g0 + g1) / 2.0;
  Eigen::VectorXd expected = w0;
  for (Eigen::Index i = 0; i < mask.support_size(); ++i) {
    expected[mask.support[i]] -= cfg.zo.eta * g_bar * z[i];
  }
  CHECK((server.global_params - expected).norm() < 1e-12);
  CHECK(bits_equal(clients[0].params, server.global_params));
  CHECK(bits_equal(clients[1].params, server.global_params));
}

TEST_CASE("high-frequency and multi-step T=1 runs are bit-identical") {
  const Eigen::Index d = 10;
  const ModelSpec spec = random_quadratic(d, 21, 0.1);
  const SparseMask mask = make_mask(d, {0, 2, 3, 5, 7, 9});
  const Dataset ds = make_blobs(3, 20, 4, 1.0, 22);
  PartitionSpec pspec;
  pspec.kind = PartitionKind::Iid;
  pspec.num_clients = 4;
  pspec.seed = 1;
  const auto parts = partition(ds, pspec);

  FederationSetup setup;
  setup.specs = {spec};
  setup.mask = mask;
  setup.schedule = SeedSchedule{2024};
  setup.w0 = random_params(d, 23);
  for (const auto& part : parts) {
    setup.client_data.push_back(batches(ds, part, 4, 3));
  }

  RoundConfig hf;
  hf.mode = RoundMode::HighFrequency;
  hf.local_steps = 1;
  hf.rounds = 50;
  hf.num_clients = 4;
  hf.zo = ZOConfig{1e-3, 0.01};
  RoundConfig ms = hf;
  ms.mode = RoundMode::MultiStep;

  const MetricsSeries a = run_federation(setup, hf, std::nullopt);
  const MetricsSeries b = run_federation(setup, ms, std::nullopt);
  CHECK(bits_equal(a.final_params, b.final_params));
  REQUIRE(a.rounds.size() == b.rounds.size());
  for (std::size_t i = 0; i < a.rounds.size(); ++i) {
    CHECK(a.rounds[i].global_loss == b.rounds[i].global_loss);
  }
}

TEST_CASE("run_federation with zero rounds records only the start") {
  const Eigen::Index d = 4;
  FederationSetup setup;
  setup.specs = {random_quadratic(d, 31, 0.2)};
  setup.mask = make_mask(d, {0, 1, 2, 3});
  setup.schedule = SeedSchedule{7};
  setup.w0 = random_params(d, 32);
  setup.client_data = {{Batch{}}};
  setup.f_star = quad_optimal_value(setup.specs[0]);

  RoundConfig cfg;
  cfg.rounds = 0;
  const MetricsSeries m = run_federation(setup, cfg, std::nullopt);
  REQUIRE(m.rounds.size() == 1);
  CHECK(m.rounds[0].round == 0);
  CHECK(m.rounds[0].global_loss ==
        loss(setup.specs[0], setup.w0, Batch{}));
  CHECK(m.rounds[0].gap ==
        doctest::Approx(m.rounds[0].global_loss - *setup.f_star));
  CHECK(m.rounds[0].up_bytes == 0);
  CHECK(bits_equal(m.final_params, setup.w0));
}

TEST_CASE("loss decreases monotonically on a well-conditioned quadratic") {
  const Eigen::Index d = 10;
  FederationSetup setup;
  setup.specs = {random_quadratic(d, 41, 0.05)};
  setup.mask = make_mask(d, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  setup.schedule = SeedSchedule{99};
  setup.w0 = random_params(d, 42);
  setup.client_data = {{Batch{}}, {Batch{}}};
  setup.f_star = quad_optimal_value(setup.specs[0]);

  RoundConfig cfg;
  cfg.mode = RoundMode::HighFrequency;
  cfg.rounds = 100;
  cfg.num_clients = 2;
  cfg.zo = ZOConfig{1e-4, 0.02};
  const MetricsSeries m = run_federation(setup, cfg, std::nullopt);
  REQUIRE(m.rounds.size() == 101);
  for (std::size_t i = 1; i < m.rounds.size(); ++i) {
    CHECK(m.rounds[i].gap < m.rounds[i - 1].gap);
  }
  CHECK(m.rounds.back().gap < 0.5 * m.rounds.front().gap);
}

TEST_CASE("communication cost worked examples") {
  RoundConfig hf;
  hf.mode = RoundMode::HighFrequency;
  hf.local_steps = 1;
  const CommCost chf = communication_cost(hf, 1000000, 1e-3);
  CHECK(chf.uplink_bytes == 8);
  CHECK(chf.downlink_bytes == 16);
  CHECK(chf.full_uplink_bytes == 8000000);

  RoundConfig ms;
  ms.mode = RoundMode::MultiStep;
  ms.local_steps = 10;
  const CommCost cms = communication_cost(ms, 1000000, 1e-3);
  CHECK(cms.uplink_bytes == 80);
  CHECK(cms.downlink_bytes == 8 * 1000 + 8 * 10);
  CHECK(cms.full_downlink_bytes == 8000000);
  // Sparse round traffic is ~1000x below the dense reference.
  const double sparse = static_cast<double>(cms.uplink_bytes + cms.downlink_bytes);
  const double dense =
      static_cast<double>(cms.full_uplink_bytes + cms.full_downlink_bytes);
  CHECK(dense / sparse > 990.0);
}

TEST_CASE("round message dump round trip") {
  ProjectedGradientLog a;
  a.client_id = 3;
  a.round = 17;
  a.scalars = {1.25, -2.5, 1e-300};
  ProjectedGradientLog b;
  b.client_id = 4;
  b.round = 17;
  const std::string path = "test_messages_roundtrip.bin";
  dump_round_messages({a, b}, path);
  const auto logs = load_round_messages(path);
  std::remove(path.c_str());
  REQUIRE(logs.size() == 2);
  CHECK(logs[0].client_id == 3);
  CHECK(logs[0].round == 17);
  CHECK(logs[0].scalars == a.scalars);
  CHECK(logs[1].client_id == 4);
  CHECK(logs[1].scalars.empty());
}
