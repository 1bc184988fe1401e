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

#ifndef CACC_CLI_HPP_
#define CACC_CLI_HPP_

// Subcommand implementations behind the command-line front end. Exit codes:
// 0 success, 1 configuration error, 2 run completed but a collision was
// detected (artifacts still written), 3 validation tolerance breach.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "cacc/config_io.hpp"
#include "cacc/metrics.hpp"
#include "cacc/output.hpp"
#include "cacc/simulator.hpp"
#include "cacc/validation.hpp"

namespace cacc {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 1;
constexpr int kExitCollision = 2;
constexpr int kExitValidationFailure = 3;

namespace detail {

inline std::string resolve_out_dir(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("CACC_TAKEOVER_OUT_DIR")) {
    if (*env) return env;
  }
  return "out";
}

inline std::string config_stem(const std::string& config_path) {
  const std::filesystem::path p(config_path);
  const std::string stem = p.stem().string();
  return stem.empty() ? "run" : stem;
}

inline nlohmann::json load_config_with_overrides(
    const std::string& config_path, const std::vector<std::string>& overrides) {
  nlohmann::json root =
      config_path.empty() ? nlohmann::json::object() : load_json_file(config_path);
  for (const auto& o : overrides) apply_override(root, o);
  return root;
}

// Parses "start:step:stop" (inclusive, within rounding) or "a,b,c".
inline std::vector<double> parse_grid_spec(const std::string& spec) {
  std::vector<double> grid;
  try {
    if (spec.find(':') != std::string::npos) {
      std::istringstream in(spec);
      std::string a, b, c;
      if (!std::getline(in, a, ':') || !std::getline(in, b, ':') ||
          !std::getline(in, c, ':')) {
        throw ConfigError("grid spec '" + spec + "' must be start:step:stop");
      }
      const double start = std::stod(a);
      const double step = std::stod(b);
      const double stop = std::stod(c);
      if (!(step > 0.0) || stop < start) {
        throw ConfigError("grid spec '" + spec +
                          "' needs step > 0 and stop >= start");
      }
      for (int k = 0;; ++k) {
        const double v = start + k * step;
        if (v > stop + 1e-12) break;
        grid.push_back(std::min(v, stop));
      }
    } else {
      std::istringstream in(spec);
      std::string cell;
      while (std::getline(in, cell, ',')) {
        if (!cell.empty()) grid.push_back(std::stod(cell));
      }
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    throw ConfigError("grid spec '" + spec + "' is not numeric");
  }
  if (grid.empty()) {
    throw ConfigError("grid spec '" + spec + "' yields no points");
  }
  return grid;
}

inline std::filesystem::path prepare_out_dir(const std::string& out_dir) {
  const std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace detail

inline int cmd_run(const std::string& config_path,
                   const std::vector<std::string>& overrides,
                   const std::string& out_dir_flag, std::ostream& err = std::cerr,
                   std::ostream& out = std::cout) {
  try {
    const auto t_begin = std::chrono::steady_clock::now();
    const nlohmann::json root =
        detail::load_config_with_overrides(config_path, overrides);
    const ScenarioConfig scenario = parse_scenario(root);
    const MetricsConfig metrics_cfg = parse_metrics(root);

    const TrajectoryLog log = run(scenario);
    const MoeReport report = compute_moe_report(log, metrics_cfg);

    const auto dir = detail::prepare_out_dir(
        detail::resolve_out_dir(out_dir_flag));
    const std::string stem = detail::config_stem(config_path);
    const std::string csv_path = (dir / (stem + "_trajectory.csv")).string();
    const std::string moe_path = (dir / (stem + "_moe.json")).string();
    const std::string manifest_path =
        (dir / (stem + "_manifest.json")).string();

    write_trajectory_csv(csv_path, log);
    write_json_file(moe_path, moe_report_to_json(report));

    RunManifest manifest;
    manifest.resolved_config = scenario_to_json(scenario);
    manifest.resolved_config["metrics"] = metrics_to_json(metrics_cfg);
    manifest.outputs = {csv_path, moe_path};
    manifest.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      t_begin)
            .count();
    write_json_file(manifest_path, manifest_to_json(manifest));

    out << "wrote " << csv_path << "\nwrote " << moe_path << "\nwrote "
        << manifest_path << "\n";
    if (report.collision) {
      err << "collision detected during the run (artifacts written)\n";
      return kExitCollision;
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    err << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfigError;
  }
}

inline int cmd_sweep(const std::string& config_path,
                     const std::vector<std::string>& overrides,
                     const std::string& out_dir_flag, const std::string& param,
                     const std::string& grid_spec,
                     std::ostream& err = std::cerr,
                     std::ostream& out = std::cout) {
  try {
    const auto t_begin = std::chrono::steady_clock::now();
    if (param != "alpha_h") {
      throw ConfigError("unsupported sweep parameter '" + param +
                        "' (only alpha_h is swept)");
    }
    const nlohmann::json root =
        detail::load_config_with_overrides(config_path, overrides);
    const ScenarioConfig scenario = parse_scenario(root);
    const MetricsConfig metrics_cfg = parse_metrics(root);
    std::vector<double> grid = grid_spec.empty() ? parse_sweep_grid(root)
                                                 : detail::parse_grid_spec(grid_spec);
    if (grid.empty()) {
      throw ConfigError(
          "no sweep grid: pass --grid or a sweep.grid config array");
    }

    const SweepResult sweep = odd_sweep(scenario, grid, metrics_cfg);

    const auto dir = detail::prepare_out_dir(
        detail::resolve_out_dir(out_dir_flag));
    const std::string stem = detail::config_stem(config_path);
    const std::string csv_path = (dir / (stem + "_sweep.csv")).string();
    const std::string threshold_path =
        (dir / (stem + "_threshold.json")).string();
    const std::string manifest_path =
        (dir / (stem + "_sweep_manifest.json")).string();

    write_sweep_csv(csv_path, sweep);
    write_json_file(threshold_path, sweep_threshold_to_json(sweep));

    RunManifest manifest;
    manifest.resolved_config = scenario_to_json(scenario);
    manifest.resolved_config["metrics"] = metrics_to_json(metrics_cfg);
    manifest.resolved_config["sweep"] = {{"grid", grid}, {"param", param}};
    manifest.outputs = {csv_path, threshold_path};
    manifest.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      t_begin)
            .count();
    write_json_file(manifest_path, manifest_to_json(manifest));

    out << "wrote " << csv_path << "\nwrote " << threshold_path << "\nwrote "
        << manifest_path << "\n";
    for (const auto& note : sweep.notes) out << "note: " << note << "\n";
    if (sweep.threshold_found) {
      out << "threshold alpha_h = " << sweep.threshold << " (bracket ["
          << sweep.threshold_low << ", " << sweep.threshold_high << "])\n";
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    err << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfigError;
  }
}

inline int cmd_validate(const std::string& suite, std::uint64_t seed,
                        double gain_perturbation = 0.0,
                        std::ostream& err = std::cerr,
                        std::ostream& out = std::cout) {
  try {
    ValidationOptions options;
    options.seed = seed;
    options.gain_perturbation = gain_perturbation;
    const std::vector<SuiteResult> results = run_validation(options, suite);
    bool all_pass = true;
    for (const auto& r : results) {
      out << (r.pass ? "PASS" : "FAIL") << "  " << r.name << "  instances="
          << r.instances << "  worst=" << r.worst << "  tolerance="
          << r.tolerance << "\n";
      if (!r.pass) {
        all_pass = false;
        err << "  worst instance: " << r.worst_instance << "\n";
      }
    }
    if (!all_pass) {
      err << "validation tolerances breached\n";
      return kExitValidationFailure;
    }
    return kExitOk;
  } catch (const std::invalid_argument& e) {
    err << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfigError;
  }
}

inline int cmd_metrics(const std::string& csv_path,
                       const std::string& config_path,
                       const std::vector<std::string>& overrides,
                       std::ostream& err = std::cerr,
                       std::ostream& out = std::cout) {
  try {
    MetricsConfig metrics_cfg;
    if (!config_path.empty() || !overrides.empty()) {
      metrics_cfg = parse_metrics(
          detail::load_config_with_overrides(config_path, overrides));
    }
    const TrajectoryLog log = read_trajectory_csv(csv_path);
    const MoeReport report = compute_moe_report(log, metrics_cfg);
    out << moe_report_to_json(report).dump(2) << "\n";
    return kExitOk;
  } catch (const ConfigError& e) {
    err << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfigError;
  }
}

}  // namespace cacc

#endif  // CACC_CLI_HPP_
