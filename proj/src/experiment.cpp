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

#include "meerkat/experiment.hpp"

#include <Eigen/Dense>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "meerkat/prng.hpp"

namespace meerkat {
namespace {

using nlohmann::json;

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& context) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* key : allowed) {
      if (it.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw ConfigError("unknown key '" + it.key() + "' in " + context);
    }
  }
}

MaskKind parse_mask_kind(const std::string& s) {
  if (s == "meerkat") return MaskKind::Meerkat;
  if (s == "weight-magnitude") return MaskKind::WeightMagnitude;
  if (s == "random") return MaskKind::Random;
  if (s == "full") return MaskKind::Full;
  throw ConfigError("mask.kind: unknown value '" + s + "'");
}

std::string mask_kind_name(MaskKind kind) {
  switch (kind) {
    case MaskKind::Meerkat: return "meerkat";
    case MaskKind::WeightMagnitude: return "weight-magnitude";
    case MaskKind::Random: return "random";
    case MaskKind::Full: return "full";
  }
  return "?";
}

PartitionSpec parse_partition(const json& obj) {
  check_keys(obj, {"kind", "alpha"}, "data.partition");
  PartitionSpec spec;
  const std::string kind = obj.at("kind").get<std::string>();
  if (kind == "iid") {
    spec.kind = PartitionKind::Iid;
  } else if (kind == "dirichlet") {
    spec.kind = PartitionKind::Dirichlet;
    spec.alpha = obj.at("alpha").get<double>();
    if (!(spec.alpha > 0.0)) {
      throw ConfigError("data.partition.alpha: must be > 0");
    }
  } else if (kind == "single-label") {
    spec.kind = PartitionKind::SingleLabel;
  } else {
    throw ConfigError("data.partition.kind: unknown value '" + kind + "'");
  }
  return spec;
}

}  // namespace

namespace {

ExperimentConfig parse_config_checked(const json& root);

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    return parse_config_checked(root);
  } catch (const json::exception& e) {
    // Missing required keys or wrong value types surface here.
    throw ConfigError(std::string("config: ") + e.what());
  }
}

namespace {

ExperimentConfig parse_config_checked(const json& root) {
  check_keys(root,
             {"schema_version", "master_seed", "output_dir", "model", "data",
              "mask", "round", "vp", "baselines"},
             "config");
  ExperimentConfig cfg;
  cfg.schema_version = root.at("schema_version").get<int>();
  if (cfg.schema_version != 1) {
    throw ConfigError("schema_version: only version 1 is supported");
  }
  cfg.master_seed = root.at("master_seed").get<std::uint64_t>();
  if (root.contains("output_dir")) {
    cfg.output_dir = root.at("output_dir").get<std::string>();
  }

  const json& model = root.at("model");
  const std::string kind = model.at("kind").get<std::string>();
  if (kind == "pl-quadratic") {
    check_keys(model, {"kind", "dim", "eig_min", "eig_max", "client_shift"},
               "model");
    cfg.model_kind = ModelKind::PlQuadratic;
    cfg.quadratic.dim = model.at("dim").get<Eigen::Index>();
    if (cfg.quadratic.dim < 1) throw ConfigError("model.dim: must be >= 1");
    if (model.contains("eig_min")) cfg.quadratic.eig_min = model.at("eig_min").get<double>();
    if (model.contains("eig_max")) cfg.quadratic.eig_max = model.at("eig_max").get<double>();
    if (!(cfg.quadratic.eig_min >= 0.0) ||
        cfg.quadratic.eig_max < cfg.quadratic.eig_min) {
      throw ConfigError("model.eig_min/eig_max: need 0 <= eig_min <= eig_max");
    }
    if (model.contains("client_shift")) {
      cfg.quadratic.client_shift = model.at("client_shift").get<double>();
      if (cfg.quadratic.client_shift < 0.0) {
        throw ConfigError("model.client_shift: must be >= 0");
      }
    }
  } else if (kind == "logistic") {
    check_keys(model, {"kind"}, "model");
    cfg.model_kind = ModelKind::Logistic;
  } else if (kind == "mlp") {
    check_keys(model, {"kind", "hidden"}, "model");
    cfg.model_kind = ModelKind::Mlp;
    for (const auto& h : model.at("hidden")) {
      const auto size = h.get<Eigen::Index>();
      if (size < 1) throw ConfigError("model.hidden: layer sizes must be >= 1");
      cfg.mlp_hidden.push_back(size);
    }
  } else {
    throw ConfigError("model.kind: unknown value '" + kind + "'");
  }

  if (root.contains("data")) {
    const json& data = root.at("data");
    check_keys(data,
               {"classes", "per_class", "feature_dim", "spread", "partition",
                "batch_size", "calib_fraction"},
               "data");
    DataConfig dc;
    dc.classes = data.at("classes").get<int>();
    dc.per_class = data.at("per_class").get<Eigen::Index>();
    dc.feature_dim = data.at("feature_dim").get<Eigen::Index>();
    if (dc.classes < 2) throw ConfigError("data.classes: must be >= 2");
    if (dc.per_class < 1) throw ConfigError("data.per_class: must be >= 1");
    if (dc.feature_dim < 1) throw ConfigError("data.feature_dim: must be >= 1");
    if (data.contains("spread")) dc.spread = data.at("spread").get<double>();
    if (dc.spread < 0.0) throw ConfigError("data.spread: must be >= 0");
    dc.partition = parse_partition(data.at("partition"));
    if (data.contains("batch_size")) dc.batch_size = data.at("batch_size").get<Eigen::Index>();
    if (dc.batch_size < 1) throw ConfigError("data.batch_size: must be >= 1");
    if (data.contains("calib_fraction")) {
      dc.calib_fraction = data.at("calib_fraction").get<double>();
    }
    if (!(dc.calib_fraction > 0.0 && dc.calib_fraction < 1.0)) {
      throw ConfigError("data.calib_fraction: must be in (0, 1)");
    }
    cfg.data = dc;
  } else if (cfg.model_kind != ModelKind::PlQuadratic) {
    throw ConfigError("data: required for logistic/mlp models");
  }

  const json& mask = root.at("mask");
  check_keys(mask, {"kind", "density"}, "mask");
  cfg.mask_kind = parse_mask_kind(mask.at("kind").get<std::string>());
  cfg.mask_density = mask.at("density").get<double>();
  if (!(cfg.mask_density > 0.0 && cfg.mask_density <= 1.0)) {
    throw ConfigError("mask.density: must be in (0, 1]");
  }

  const json& round = root.at("round");
  check_keys(round,
             {"mode", "local_steps", "rounds", "clients", "epsilon", "eta"},
             "round");
  const std::string mode = round.at("mode").get<std::string>();
  if (mode == "multi-step") {
    cfg.round.mode = RoundMode::MultiStep;
  } else if (mode == "high-frequency") {
    cfg.round.mode = RoundMode::HighFrequency;
  } else {
    throw ConfigError("round.mode: unknown value '" + mode + "'");
  }
  cfg.round.local_steps = round.at("local_steps").get<int>();
  cfg.round.rounds = round.at("rounds").get<int>();
  cfg.round.num_clients = round.at("clients").get<int>();
  if (cfg.round.local_steps < 1) throw ConfigError("round.local_steps: must be >= 1");
  if (cfg.round.rounds < 0) throw ConfigError("round.rounds: must be >= 0");
  if (cfg.round.num_clients < 1) throw ConfigError("round.clients: must be >= 1");
  if (cfg.round.mode == RoundMode::HighFrequency && cfg.round.local_steps != 1) {
    throw ConfigError("round.mode: high-frequency requires local_steps = 1");
  }
  if (round.contains("epsilon")) cfg.round.zo.epsilon = round.at("epsilon").get<double>();
  if (round.contains("eta")) cfg.round.zo.eta = round.at("eta").get<double>();
  if (!(cfg.round.zo.epsilon > 0.0)) throw ConfigError("round.epsilon: must be > 0");
  if (!(cfg.round.zo.eta > 0.0)) throw ConfigError("round.eta: must be > 0");

  if (root.contains("vp")) {
    const json& vp = root.at("vp");
    check_keys(vp,
               {"calibration_steps", "init_steps", "later_steps", "sigma",
                "rho_later", "rho_quie", "cosine_support_norm"},
               "vp");
    VpConfig vc;
    if (vp.contains("calibration_steps")) vc.calibration_steps = vp.at("calibration_steps").get<int>();
    if (vp.contains("init_steps")) vc.init_steps = vp.at("init_steps").get<int>();
    if (vp.contains("later_steps")) vc.later_steps = vp.at("later_steps").get<int>();
    if (vp.contains("sigma")) vc.sigma = vp.at("sigma").get<double>();
    if (vp.contains("rho_later")) vc.rho_later = vp.at("rho_later").get<double>();
    if (vp.contains("rho_quie")) vc.rho_quie = vp.at("rho_quie").get<double>();
    if (vp.contains("cosine_support_norm")) {
      vc.cosine_support_norm = vp.at("cosine_support_norm").get<bool>();
    }
    if (vc.calibration_steps < 1 || vc.init_steps < 1 || vc.later_steps < 1 ||
        vc.init_steps + vc.later_steps > vc.calibration_steps) {
      throw ConfigError("vp: need init_steps + later_steps <= calibration_steps");
    }
    if (!(vc.sigma > 0.0) || !(vc.rho_later > 0.0) || !(vc.rho_quie > 0.0)) {
      throw ConfigError("vp: thresholds must be positive");
    }
    cfg.vp = vc;
  }

  if (root.contains("baselines")) {
    for (const auto& b : root.at("baselines")) {
      cfg.baselines.push_back(parse_mask_kind(b.get<std::string>()));
    }
    if (cfg.baselines.empty()) {
      throw ConfigError("baselines: must list at least one mask kind");
    }
  }
  return cfg;
}

}  // namespace

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

namespace {

Eigen::MatrixXd random_rotation(Eigen::Index dim, std::uint64_t seed) {
  GaussianStream stream(seed);
  Eigen::MatrixXd g(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    for (Eigen::Index j = 0; j < dim; ++j) g(i, j) = stream.next_normal();
  }
  return Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();
}

struct MaskInputs {
  const ModelSpec& spec;
  const Eigen::VectorXd& w0;
  const std::vector<Batch>& calib;
};

SparseMask build_mask(MaskKind kind, double density, const MaskInputs& in,
                      std::uint64_t seed) {
  switch (kind) {
    case MaskKind::Meerkat:
      return top_k_mask(avg_squared_gradients(in.spec, in.w0, in.calib), density);
    case MaskKind::WeightMagnitude:
      return baseline_mask(BaselineMaskKind::WeightMagnitude, in.w0, density, seed);
    case MaskKind::Random:
      return baseline_mask(BaselineMaskKind::Random, in.w0, density, seed);
    case MaskKind::Full:
      return baseline_mask(BaselineMaskKind::Full, in.w0, 1.0, seed);
  }
  throw std::logic_error("unreachable");
}

BuiltExperiment build_with_mask(const ExperimentConfig& cfg, MaskKind mask_kind) {
  BuiltExperiment built;
  built.round = cfg.round;
  built.vp = cfg.vp;
  FederationSetup& setup = built.setup;
  const std::uint64_t ms = cfg.master_seed;
  const int k = cfg.round.num_clients;

  if (cfg.model_kind == ModelKind::PlQuadratic) {
    const Eigen::Index d = cfg.quadratic.dim;
    Eigen::VectorXd eigs(d);
    for (Eigen::Index i = 0; i < d; ++i) {
      eigs[i] = d == 1 ? cfg.quadratic.eig_min
                       : cfg.quadratic.eig_min +
                             (cfg.quadratic.eig_max - cfg.quadratic.eig_min) *
                                 static_cast<double>(i) / static_cast<double>(d - 1);
    }
    const Eigen::MatrixXd q = random_rotation(d, mix64(ms ^ 0x71));
    const Eigen::MatrixXd a = q * eigs.asDiagonal() * q.transpose();
    // Per-client optimum shifts c_k ~ N(0, shift^2 I); b_k = A c_k.
    GaussianStream shift_stream(mix64(ms ^ 0x72));
    Eigen::VectorXd b_mean = Eigen::VectorXd::Zero(d);
    for (int c = 0; c < k; ++c) {
      Eigen::VectorXd shift(d);
      for (Eigen::Index i = 0; i < d; ++i) {
        shift[i] = cfg.quadratic.client_shift * shift_stream.next_normal();
      }
      setup.specs.push_back(make_quadratic(a, a * shift));
      b_mean += setup.specs.back().quad_b;
      setup.client_data.push_back({Batch{}});
    }
    b_mean /= static_cast<double>(k);
    setup.f_star = quad_optimal_value(make_quadratic(a, b_mean));
    setup.w0 = Eigen::VectorXd::Ones(d);
    setup.calib = {Batch{}};
  } else {
    const DataConfig& dc = *cfg.data;
    Dataset ds = make_blobs(dc.classes, dc.per_class, dc.feature_dim, dc.spread,
                            mix64(ms ^ 0x64));
    // Carve the calibration split before partitioning, disjoint from every
    // client.
    std::vector<Eigen::Index> order(static_cast<std::size_t>(ds.size()));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Eigen::Index>(i);
    GaussianStream split_stream(mix64(ms ^ 0x65));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1],
                order[static_cast<std::size_t>(split_stream.next_u64() % i)]);
    }
    const auto calib_count = static_cast<std::size_t>(
        std::max<Eigen::Index>(1, static_cast<Eigen::Index>(dc.calib_fraction *
                                                            static_cast<double>(ds.size()))));
    std::vector<Eigen::Index> calib_idx(order.begin(),
                                        order.begin() + static_cast<std::ptrdiff_t>(calib_count));
    std::vector<Eigen::Index> train_idx(order.begin() + static_cast<std::ptrdiff_t>(calib_count),
                                        order.end());
    Dataset train;
    {
      Batch gathered = gather(ds, train_idx);
      train.inputs = std::move(gathered.inputs);
      train.labels = std::move(gathered.labels);
      train.num_classes = ds.num_classes;
    }
    ModelSpec spec = cfg.model_kind == ModelKind::Logistic
                         ? make_logistic(dc.feature_dim, dc.classes)
                         : [&] {
                             std::vector<Eigen::Index> layers{dc.feature_dim};
                             layers.insert(layers.end(), cfg.mlp_hidden.begin(),
                                           cfg.mlp_hidden.end());
                             layers.push_back(dc.classes);
                             return make_mlp(layers);
                           }();
    setup.specs.push_back(spec);
    setup.w0 = init_params(spec, mix64(ms ^ 0x77));
    setup.calib = batches(ds, calib_idx, dc.batch_size, mix64(ms ^ 0x66));
    PartitionSpec part = dc.partition;
    part.num_clients = k;
    part.seed = mix64(ms ^ 0x67);
    const auto parts = partition(train, part);
    for (int c = 0; c < k; ++c) {
      setup.client_data.push_back(batches(train, parts[static_cast<std::size_t>(c)],
                                          dc.batch_size,
                                          mix64(ms ^ (0x1000ull + static_cast<std::uint64_t>(c)))));
    }
  }

  setup.schedule.master_seed = ms;
  const MaskInputs inputs{setup.specs[0], setup.w0, setup.calib};
  setup.mask = build_mask(mask_kind, cfg.mask_density, inputs, mix64(ms ^ 0x6D));
  return built;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << content;
}

std::string summary_json(const MetricsSeries& metrics) {
  json out;
  const RoundRecord& last = metrics.rounds.back();
  out["final_loss"] = last.global_loss;
  if (!std::isnan(last.gap)) out["final_gap"] = last.gap;
  out["rounds_completed"] = last.round;
  out["uplink_bytes"] = last.up_bytes;
  out["downlink_bytes"] = last.down_bytes;
  std::vector<int> flagged;
  for (std::size_t c = 0; c < metrics.flags.size(); ++c) {
    if (metrics.flags[c]) flagged.push_back(static_cast<int>(c));
  }
  out["flagged_clients"] = flagged;
  return out.dump(2) + "\n";
}

}  // namespace

BuiltExperiment build_experiment(const ExperimentConfig& cfg) {
  return build_with_mask(cfg, cfg.mask_kind);
}

std::string resolve_output_dir(const ExperimentConfig& cfg) {
  if (const char* env = std::getenv("MEERKAT_OUT")) {
    return env;
  }
  return cfg.output_dir;
}

int cmd_run(const std::string& config_path) {
  ExperimentConfig cfg;
  try {
    cfg = load_config_file(config_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  const std::string out_dir = resolve_output_dir(cfg);
  std::filesystem::create_directories(out_dir);
  try {
    const BuiltExperiment built = build_experiment(cfg);
    MetricsSeries metrics;
    try {
      metrics = run_federation(built.setup, built.round, built.vp);
    } catch (const FederationError& e) {
      write_file(out_dir + "/metrics.csv", e.partial_metrics.to_csv());
      std::cerr << "numerical failure: " << e.what() << "\n";
      return 3;
    }
    write_file(out_dir + "/metrics.csv", metrics.to_csv());
    write_file(out_dir + "/summary.json", summary_json(metrics));
    for (const GradIPTrajectory& traj : metrics.trajectories) {
      save_trajectory_csv(traj, out_dir + "/gradip_client" +
                                    std::to_string(traj.client_id) + ".csv");
    }
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  }
}

int cmd_mask(const std::string& config_path, const std::string& out_path) {
  try {
    const ExperimentConfig cfg = load_config_file(config_path);
    const BuiltExperiment built = build_experiment(cfg);
    save_mask_file(built.setup.mask, out_path);
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  }
}

int cmd_compare(const std::string& config_path) {
  ExperimentConfig cfg;
  try {
    cfg = load_config_file(config_path);
    if (cfg.baselines.empty()) {
      throw ConfigError("baselines: required for compare");
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  const std::string out_dir = resolve_output_dir(cfg);
  std::filesystem::create_directories(out_dir);
  try {
    std::ostringstream table;
    table << "mask_kind,final_loss,final_gap,up_bytes,down_bytes\n";
    for (MaskKind kind : cfg.baselines) {
      const BuiltExperiment built = build_with_mask(cfg, kind);
      const MetricsSeries metrics = run_federation(built.setup, built.round, built.vp);
      const RoundRecord& last = metrics.rounds.back();
      table << mask_kind_name(kind) << "," << format_double(last.global_loss)
            << "," << format_double(last.gap) << "," << last.up_bytes << ","
            << last.down_bytes << "\n";
    }
    write_file(out_dir + "/compare.csv", table.str());
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  }
}

int cmd_gradip(const std::string& config_path) {
  ExperimentConfig cfg;
  try {
    cfg = load_config_file(config_path);
    if (!cfg.vp) {
      throw ConfigError("vp: section required for gradip");
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  const std::string out_dir = resolve_output_dir(cfg);
  std::filesystem::create_directories(out_dir);
  try {
    BuiltExperiment built = build_experiment(cfg);
    built.round.rounds = 0;  // calibration phase only
    const MetricsSeries metrics = run_federation(built.setup, built.round, built.vp);
    std::ostringstream cls;
    cls << "client_id,flagged,init_avg,later_avg,rho_later,rho_quie\n";
    for (const GradIPTrajectory& traj : metrics.trajectories) {
      save_trajectory_csv(traj, out_dir + "/gradip_client" +
                                    std::to_string(traj.client_id) + ".csv");
      const Classification c = classify(traj, *built.vp);
      cls << traj.client_id << "," << (c.flagged ? 1 : 0) << ","
          << format_double(c.init_avg) << "," << format_double(c.later_avg) << ","
          << format_double(c.rho_later_client) << ","
          << format_double(c.rho_quie_client) << "\n";
    }
    write_file(out_dir + "/classification.csv", cls.str());
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace meerkat
