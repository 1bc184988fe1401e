// Copyright 2026 The cacc-takeover Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdint>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cacc/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "cacc-takeover: shared-control takeover simulation for a CACC platoon"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string grid_spec;
  std::string param = "alpha_h";
  std::string suite = "all";
  std::string csv_path;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::uint64_t validate_seed = 20260815ULL;
  double inject_gain_error = 0.0;

  CLI::App* run_cmd = app.add_subcommand(
      "run", "Simulate one scenario; writes trajectory CSV, metric report "
             "JSON, and a run manifest");
  run_cmd->add_option("--config", config_path, "JSON scenario config file")
      ->required();
  run_cmd->add_option("--out-dir", out_dir,
                      "output directory (default: $CACC_TAKEOVER_OUT_DIR or "
                      "./out)");
  run_cmd->add_option("--override", overrides,
                      "dotted-path config override, e.g. "
                      "scenario.planner.horizon=40");
  run_cmd->add_option("--seed", seed, "override scenario.seed")
      ->trigger_on_parse()
      ->each([&](const std::string&) { seed_given = true; });

  CLI::App* sweep_cmd = app.add_subcommand(
      "sweep", "Sweep the constant human-authority share and locate the "
               "damping threshold");
  sweep_cmd->add_option("--config", config_path, "JSON scenario config file")
      ->required();
  sweep_cmd->add_option("--out-dir", out_dir, "output directory");
  sweep_cmd->add_option("--override", overrides, "dotted-path config override");
  sweep_cmd->add_option("--grid", grid_spec,
                        "grid as start:step:stop or comma list (falls back to "
                        "the config's sweep.grid)");
  sweep_cmd->add_option("--param", param, "swept parameter (alpha_h)");
  sweep_cmd->add_option("--seed", seed, "override scenario.seed")
      ->trigger_on_parse()
      ->each([&](const std::string&) { seed_given = true; });

  CLI::App* validate_cmd = app.add_subcommand(
      "validate", "Run the randomized solver cross-check suites");
  validate_cmd->add_option(
      "--suite", suite,
      "all | human | stacked | machine | optimality | degenerate");
  validate_cmd->add_option("--seed", validate_seed, "suite base seed");
  validate_cmd
      ->add_option("--inject-gain-error", inject_gain_error,
                   "corrupt the first feedback gain by this amount (negative "
                   "control; must fail)")
      ->group("");

  CLI::App* metrics_cmd = app.add_subcommand(
      "metrics", "Recompute the metric report from an existing trajectory CSV");
  metrics_cmd->add_option("--csv", csv_path, "trajectory CSV file")->required();
  metrics_cmd->add_option("--config", config_path,
                          "optional config supplying the metrics section");
  metrics_cmd->add_option("--override", overrides,
                          "dotted-path config override");

  CLI11_PARSE(app, argc, argv);

  if (seed_given) {
    overrides.push_back("scenario.seed=" + std::to_string(seed));
  }

  if (run_cmd->parsed()) {
    return cacc::cmd_run(config_path, overrides, out_dir);
  }
  if (sweep_cmd->parsed()) {
    return cacc::cmd_sweep(config_path, overrides, out_dir, param, grid_spec);
  }
  if (validate_cmd->parsed()) {
    return cacc::cmd_validate(suite, validate_seed, inject_gain_error);
  }
  return cacc::cmd_metrics(csv_path, config_path, overrides);
}
