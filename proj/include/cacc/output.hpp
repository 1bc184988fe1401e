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

#ifndef CACC_OUTPUT_HPP_
#define CACC_OUTPUT_HPP_

// Plot-ready artifact emission: trajectory CSV (with a self-describing meta
// comment line so metrics can be recomputed from the file alone), metric
// report JSON, sweep CSV, threshold JSON, and the run manifest that ties the
// emitted files to the resolved configuration. All numeric output is printed
// with round-trip precision so repeated runs are byte-identical.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cacc/metrics.hpp"
#include "cacc/simulator.hpp"

namespace cacc {

constexpr int kCsvSchemaVersion = 1;
constexpr const char* kArtifactVersion = "0.1.0";
constexpr const char* kTrajectoryHeader =
    "t,vehicle_id,position_m,speed_mps,accel_mps2,gap_m,dv_mps,u_h,u_m,"
    "u_fused,alpha_h,flags";

class OutputError : public std::runtime_error {
 public:
  explicit OutputError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline void write_trajectory_csv(const std::string& path,
                                 const TrajectoryLog& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw OutputError("cannot open '" + path + "' for writing");
  }
  out << "# meta schema=" << kCsvSchemaVersion << " dt="
      << detail::format_double(log.dt)
      << " duration=" << detail::format_double(log.duration)
      << " n_followers=" << log.n_followers << " disturbance_onset="
      << detail::format_double(log.disturbance_onset)
      << " forcing_period=" << detail::format_double(log.forcing_period)
      << " initial_speed=" << detail::format_double(log.initial_speed) << "\n";
  out << kTrajectoryHeader << "\n";
  for (int k = 0; k < log.steps(); ++k) {
    for (std::size_t i = 0; i < log.vehicles.size(); ++i) {
      const VehicleTrace& v = log.vehicles[i];
      out << detail::format_double(log.time[k]) << ',' << i << ','
          << detail::format_double(v.position[k]) << ','
          << detail::format_double(v.speed[k]) << ','
          << detail::format_double(v.accel[k]) << ','
          << detail::format_double(v.gap[k]) << ','
          << detail::format_double(v.dv[k]) << ','
          << detail::format_double(v.u_h[k]) << ','
          << detail::format_double(v.u_m[k]) << ','
          << detail::format_double(v.u_fused[k]) << ','
          << detail::format_double(v.alpha_h[k]) << ','
          << static_cast<int>(v.flags[k]) << "\n";
    }
  }
  if (!out) {
    throw OutputError("write failed for '" + path + "'");
  }
}

inline TrajectoryLog read_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw OutputError("cannot open '" + path + "' for reading");
  }
  TrajectoryLog log;
  std::string line;
  bool meta_seen = false;
  bool header_seen = false;
  int max_vehicle = -1;

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      // "# meta key=value ..." written by write_trajectory_csv.
      std::istringstream meta(line.substr(1));
      std::string token;
      while (meta >> token) {
        const std::size_t eq = token.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = token.substr(0, eq);
        const std::string value = token.substr(eq + 1);
        try {
          if (key == "dt") log.dt = std::stod(value);
          else if (key == "duration") log.duration = std::stod(value);
          else if (key == "n_followers") log.n_followers = std::stoi(value);
          else if (key == "disturbance_onset")
            log.disturbance_onset = std::stod(value);
          else if (key == "forcing_period")
            log.forcing_period = std::stod(value);
          else if (key == "initial_speed")
            log.initial_speed = std::stod(value);
        } catch (const std::exception&) {
          throw OutputError("malformed meta line in '" + path + "'");
        }
      }
      meta_seen = true;
      continue;
    }
    if (!header_seen) {
      if (line != kTrajectoryHeader) {
        throw OutputError("unexpected CSV header in '" + path + "'");
      }
      header_seen = true;
      continue;
    }

    std::istringstream row(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (cells.size() != 12) {
      throw OutputError("malformed CSV row in '" + path + "': " + line);
    }
    try {
      const double t = std::stod(cells[0]);
      const int vid = std::stoi(cells[1]);
      if (vid > max_vehicle) {
        max_vehicle = vid;
        log.vehicles.resize(vid + 1);
      }
      if (vid == 0) log.time.push_back(t);
      VehicleTrace& v = log.vehicles[vid];
      v.position.push_back(std::stod(cells[2]));
      v.speed.push_back(std::stod(cells[3]));
      v.accel.push_back(std::stod(cells[4]));
      v.gap.push_back(std::stod(cells[5]));
      v.dv.push_back(std::stod(cells[6]));
      v.u_h.push_back(std::stod(cells[7]));
      v.u_m.push_back(std::stod(cells[8]));
      v.u_fused.push_back(std::stod(cells[9]));
      v.alpha_h.push_back(std::stod(cells[10]));
      v.flags.push_back(static_cast<std::uint8_t>(std::stoi(cells[11])));
    } catch (const std::exception&) {
      throw OutputError("malformed CSV row in '" + path + "': " + line);
    }
  }
  if (!header_seen || log.vehicles.empty()) {
    throw OutputError("'" + path + "' holds no trajectory data");
  }
  for (auto& v : log.vehicles) {
    if (v.position.size() != log.time.size()) {
      throw OutputError("'" + path + "' has ragged per-vehicle series");
    }
    for (const auto f : v.flags) {
      if (f & flag::kCollision) {
        v.collided = true;
        break;
      }
    }
  }
  if (!meta_seen) {
    // Legacy file without the meta line: reconstruct what is recoverable.
    log.n_followers = max_vehicle;
    log.dt = log.time.size() > 1 ? log.time[1] - log.time[0] : 0.0;
    log.duration = log.time.empty() ? 0.0 : log.time.back();
    log.initial_speed =
        log.vehicles[0].speed.empty() ? 0.0 : log.vehicles[0].speed.front();
    log.disturbance_onset = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < log.vehicles[0].accel.size(); ++k) {
      if (std::abs(log.vehicles[0].accel[k]) > 1e-12) {
        log.disturbance_onset = log.time[k];
        break;
      }
    }
    log.forcing_period = 0.0;
  }
  return log;
}

namespace detail {

inline nlohmann::json finite_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

}  // namespace detail

inline nlohmann::json moe_report_to_json(const MoeReport& report) {
  nlohmann::json per_follower = nlohmann::json::array();
  for (std::size_t i = 0; i < report.theta.size(); ++i) {
    per_follower.push_back(
        {{"vehicle_id", i + 1},
         {"theta", detail::finite_or_null(report.theta[i])},
         {"accel_range_mps2", report.accel_range[i]},
         {"gap_range_m", report.gap_range[i]},
         {"min_gap_m", report.min_gap[i]}});
  }
  return {{"window", {{"t0", report.window.t0}, {"t1", report.window.t1}}},
          {"per_follower", per_follower},
          {"max_theta", detail::finite_or_null(report.max_theta)},
          {"string_stable", report.string_stable},
          {"influence_duration_s", report.influence_seconds},
          {"influence_censored", report.influence_censored},
          {"collision", report.collision}};
}

inline void write_json_file(const std::string& path,
                            const nlohmann::json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw OutputError("cannot open '" + path + "' for writing");
  }
  out << doc.dump(2) << "\n";
  if (!out) {
    throw OutputError("write failed for '" + path + "'");
  }
}

inline void write_sweep_csv(const std::string& path,
                            const SweepResult& sweep) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw OutputError("cannot open '" + path + "' for writing");
  }
  const std::size_t followers =
      sweep.rows.empty() ? 0 : sweep.rows.front().theta.size();
  out << "alpha_h";
  for (std::size_t i = 2; i <= followers; ++i) out << ",theta_" << i;
  out << ",max_theta,stable,collision\n";
  for (const auto& row : sweep.rows) {
    out << detail::format_double(row.alpha_h);
    for (std::size_t i = 1; i < row.theta.size(); ++i) {
      out << ',' << detail::format_double(row.theta[i]);
    }
    out << ',' << detail::format_double(row.max_theta) << ','
        << (row.stable ? 1 : 0) << ',' << (row.collision ? 1 : 0) << "\n";
  }
  if (!out) {
    throw OutputError("write failed for '" + path + "'");
  }
}

inline nlohmann::json sweep_threshold_to_json(const SweepResult& sweep) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : sweep.rows) {
    rows.push_back({{"alpha_h", row.alpha_h},
                    {"max_theta", detail::finite_or_null(row.max_theta)},
                    {"stable", row.stable}});
  }
  return {{"threshold_found", sweep.threshold_found},
          {"threshold", detail::finite_or_null(sweep.threshold)},
          {"threshold_low", detail::finite_or_null(sweep.threshold_low)},
          {"threshold_high", detail::finite_or_null(sweep.threshold_high)},
          {"transitions", sweep.transitions},
          {"notes", sweep.notes},
          {"grid", rows}};
}

struct RunManifest {
  nlohmann::json resolved_config;
  std::vector<std::string> outputs;
  double runtime_seconds{0.0};
};

inline nlohmann::json manifest_to_json(const RunManifest& manifest) {
  return {{"artifact_version", kArtifactVersion},
          {"csv_schema_version", kCsvSchemaVersion},
          {"resolved_config", manifest.resolved_config},
          {"outputs", manifest.outputs},
          {"runtime_seconds", manifest.runtime_seconds}};
}

}  // namespace cacc

#endif  // CACC_OUTPUT_HPP_
