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

#include <string>

#include <CLI11.hpp>

#include "meerkat/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Federated sparse zeroth-order optimization simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string mask_out;

  CLI::App* run = app.add_subcommand("run", "Run a federation experiment");
  run->add_option("config", config_path, "JSON experiment config")->required();

  CLI::App* mask = app.add_subcommand("mask", "Compute and dump the sparse mask");
  mask->add_option("config", config_path, "JSON experiment config")->required();
  mask->add_option("-o,--output", mask_out, "Mask output path")->required();

  CLI::App* compare = app.add_subcommand("compare", "Sweep the configured mask baselines");
  compare->add_option("config", config_path, "JSON experiment config")->required();

  CLI::App* gradip = app.add_subcommand("gradip", "Calibration phase only: trajectories + classification");
  gradip->add_option("config", config_path, "JSON experiment config")->required();

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) return meerkat::cmd_run(config_path);
  if (mask->parsed()) return meerkat::cmd_mask(config_path, mask_out);
  if (compare->parsed()) return meerkat::cmd_compare(config_path);
  if (gradip->parsed()) return meerkat::cmd_gradip(config_path);
  return 1;
}
