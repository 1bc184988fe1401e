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

#ifndef CACC_CONFIG_IO_HPP_
#define CACC_CONFIG_IO_HPP_

// JSON configuration ingestion and emission. Every field is optional with a
// shipped default; parse errors name the full dotted path of the offending
// field. The emitted form round-trips: feeding a serialized config back in
// reproduces the same resolved configuration.

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cacc/metrics.hpp"
#include "cacc/simulator.hpp"

namespace cacc {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

// Typed field access with dotted-path error reporting.
class JsonCursor {
 public:
  JsonCursor(const nlohmann::json& node, std::string path)
      : node_(&node), path_(std::move(path)) {}

  bool has(const char* key) const { return node_->contains(key); }

  JsonCursor child(const char* key) const {
    const auto it = node_->find(key);
    if (it == node_->end() || !it->is_object()) {
      throw ConfigError("config error at " + join(key) +
                        ": expected an object");
    }
    return JsonCursor(*it, join(key));
  }

  template <typename T>
  T get(const char* key, T fallback) const {
    const auto it = node_->find(key);
    if (it == node_->end()) return fallback;
    return convert<T>(*it, join(key));
  }

  template <typename T>
  T require(const char* key) const {
    const auto it = node_->find(key);
    if (it == node_->end()) {
      throw ConfigError("config error at " + join(key) + ": field is required");
    }
    return convert<T>(*it, join(key));
  }

  const nlohmann::json& raw() const { return *node_; }
  const std::string& path() const { return path_; }
  std::string join(const char* key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  template <typename T>
  static T convert(const nlohmann::json& j, const std::string& where) {
    try {
      return j.get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("config error at " + where + ": cannot read value " +
                        j.dump() + " as the expected type");
    }
  }

 private:
  const nlohmann::json* node_;
  std::string path_;
};

inline CostWeights parse_weights(const JsonCursor& c, const CostWeights& dft) {
  return CostWeights{c.get<double>("q_v", dft.q_v),
                     c.get<double>("q_g", dft.q_g), c.get<double>("r", dft.r)};
}

inline nlohmann::json weights_to_json(const CostWeights& w) {
  return {{"q_v", w.q_v}, {"q_g", w.q_g}, {"r", w.r}};
}

inline LeaderProfile parse_leader(const JsonCursor& c) {
  const std::string type = c.get<std::string>("type", "constant");
  if (type == "constant") {
    return LeaderConstant{c.get<double>("v", 10.0)};
  }
  if (type == "sinusoid") {
    return LeaderSinusoid{c.get<double>("v0", 10.0),
                          c.get<double>("amplitude", 2.0),
                          c.get<double>("period", 20.0),
                          c.get<double>("t_start", 0.0),
                          c.get<int>("cycles", 0)};
  }
  if (type == "hard_brake") {
    return LeaderHardBrake{
        c.get<double>("v0", 10.0), c.get<double>("decel", -4.0),
        c.get<double>("t_start", 0.0), c.get<double>("v_final", 2.0)};
  }
  throw ConfigError("config error at " + c.join("type") +
                    ": unknown leader profile '" + type +
                    "' (expected constant, sinusoid, hard_brake)");
}

inline nlohmann::json leader_to_json(const LeaderProfile& p) {
  if (const auto* c = std::get_if<LeaderConstant>(&p)) {
    return {{"type", "constant"}, {"v", c->v}};
  }
  if (const auto* s = std::get_if<LeaderSinusoid>(&p)) {
    return {{"type", "sinusoid"},   {"v0", s->v0},
            {"amplitude", s->amplitude}, {"period", s->period},
            {"t_start", s->t_start}, {"cycles", s->cycles}};
  }
  const auto& b = std::get<LeaderHardBrake>(p);
  return {{"type", "hard_brake"},
          {"v0", b.v0},
          {"decel", b.decel},
          {"t_start", b.t_start},
          {"v_final", b.v_final}};
}

inline AuthoritySchedule parse_schedule(const JsonCursor& c) {
  const std::string type = c.get<std::string>("type", "constant");
  if (type == "constant") {
    return ConstantAuthority{c.get<double>("alpha_h", 0.0)};
  }
  if (type == "linear_gradient") {
    return LinearGradientAuthority{c.get<double>("t_start", 0.0),
                                   c.get<double>("duration", 10.0)};
  }
  if (type == "direct") {
    return DirectTakeoverAuthority{c.get<double>("t_start", 0.0)};
  }
  throw ConfigError("config error at " + c.join("type") +
                    ": unknown authority schedule '" + type +
                    "' (expected constant, linear_gradient, direct)");
}

inline nlohmann::json schedule_to_json(const AuthoritySchedule& s) {
  if (const auto* c = std::get_if<ConstantAuthority>(&s)) {
    return {{"type", "constant"}, {"alpha_h", c->alpha_h}};
  }
  if (const auto* g = std::get_if<LinearGradientAuthority>(&s)) {
    return {{"type", "linear_gradient"},
            {"t_start", g->t_start},
            {"duration", g->duration}};
  }
  const auto& d = std::get<DirectTakeoverAuthority>(s);
  return {{"type", "direct"}, {"t_start", d.t_start}};
}

template <typename Enum>
Enum parse_enum(const JsonCursor& c, const char* key,
                std::initializer_list<std::pair<const char*, Enum>> table,
                Enum fallback) {
  std::string dft;
  for (const auto& [name, value] : table) {
    if (value == fallback) dft = name;
  }
  const std::string text = c.get<std::string>(key, dft);
  for (const auto& [name, value] : table) {
    if (text == name) return value;
  }
  std::string expected;
  for (const auto& [name, value] : table) {
    if (!expected.empty()) expected += ", ";
    expected += name;
  }
  throw ConfigError("config error at " + c.join(key) + ": unknown value '" +
                    text + "' (expected one of: " + expected + ")");
}

}  // namespace detail

inline ScenarioConfig parse_scenario(const nlohmann::json& root) {
  const detail::JsonCursor top(root, "");
  ScenarioConfig sc;
  if (!top.has("scenario")) return sc;
  const detail::JsonCursor s = top.child("scenario");

  sc.n_followers = s.get<int>("n_followers", sc.n_followers);
  sc.initial_speed = s.get<double>("initial_speed", sc.initial_speed);
  sc.gap_init = detail::parse_enum(s, "gap_init",
                                   {{"cacc_time_gap", GapInit::CaccTimeGap},
                                    {"human_time_gap", GapInit::HumanTimeGap},
                                    {"explicit", GapInit::Explicit}},
                                   sc.gap_init);
  sc.explicit_gap = s.get<double>("explicit_gap", sc.explicit_gap);
  sc.cacc_time_gap = s.get<double>("cacc_time_gap", sc.cacc_time_gap);
  sc.cacc_standstill = s.get<double>("cacc_standstill", sc.cacc_standstill);
  sc.duration = s.get<double>("duration", sc.duration);
  sc.dt = s.get<double>("dt", sc.dt);
  sc.human_mode = detail::parse_enum(
      s, "human_mode",
      {{"modeled", HumanMode::Modeled},
       {"baseline_delayed", HumanMode::BaselineDelayed}},
      sc.human_mode);
  sc.baseline_delay = s.get<double>("baseline_delay", sc.baseline_delay);
  sc.seed = s.get<std::uint64_t>("seed", sc.seed);

  if (s.has("leader")) sc.leader = detail::parse_leader(s.child("leader"));

  if (s.has("authority")) {
    const auto& arr = s.raw().at("authority");
    if (!arr.is_array() || arr.empty()) {
      throw ConfigError("config error at " + s.join("authority") +
                        ": expected a non-empty array of schedules");
    }
    sc.schedules.clear();
    for (std::size_t k = 0; k < arr.size(); ++k) {
      sc.schedules.push_back(detail::parse_schedule(detail::JsonCursor(
          arr[k], s.join("authority") + "[" + std::to_string(k) + "]")));
    }
  }

  if (s.has("planner")) {
    const detail::JsonCursor p = s.child("planner");
    sc.planner.horizon = p.get<int>("horizon", sc.planner.horizon);
    if (p.has("weights")) {
      sc.planner.weights =
          detail::parse_weights(p.child("weights"), sc.planner.weights);
    }
    sc.planner.u_min = p.get<double>("u_min", sc.planner.u_min);
    sc.planner.u_max = p.get<double>("u_max", sc.planner.u_max);
    sc.planner.g_min = p.get<double>("g_min", sc.planner.g_min);
    sc.planner.replan_period =
        p.get<int>("replan_period", sc.planner.replan_period);
    sc.planner.hv_forecast_hold =
        p.get<double>("hv_forecast_hold", sc.planner.hv_forecast_hold);
  }
  sc.planner.dt = sc.dt;  // one clock for plant and planner

  if (s.has("human")) {
    const detail::JsonCursor h = s.child("human");
    if (h.has("weights")) {
      sc.human.weights =
          detail::parse_weights(h.child("weights"), sc.human.weights);
    }
    sc.human.time_gap = h.get<double>("time_gap", sc.human.time_gap);
    sc.human.standstill = h.get<double>("standstill", sc.human.standstill);
    sc.human.g_ref_mode = detail::parse_enum(
        h, "g_ref_mode",
        {{"initial_speed", GapRefMode::InitialSpeed},
         {"planning_speed", GapRefMode::PlanningSpeed}},
        sc.human.g_ref_mode);
  }

  try {
    sc.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config error at scenario: ") + e.what());
  }
  return sc;
}

inline MetricsConfig parse_metrics(const nlohmann::json& root) {
  const detail::JsonCursor top(root, "");
  MetricsConfig mc;
  if (!top.has("metrics")) return mc;
  const detail::JsonCursor m = top.child("metrics");
  mc.skip_periods = m.get<double>("skip_periods", mc.skip_periods);
  mc.eval_periods = m.get<double>("eval_periods", mc.eval_periods);
  mc.influence_threshold =
      m.get<double>("influence_threshold", mc.influence_threshold);
  mc.denominator_floor =
      m.get<double>("denominator_floor", mc.denominator_floor);
  mc.stable_cutoff = m.get<double>("stable_cutoff", mc.stable_cutoff);
  mc.bisection_tol = m.get<double>("bisection_tol", mc.bisection_tol);
  if (!(mc.skip_periods >= 0.0) || !(mc.eval_periods > 0.0) ||
      !(mc.influence_threshold > 0.0) || !(mc.bisection_tol > 0.0)) {
    throw ConfigError(
        "config error at metrics: periods, threshold, and tolerance must be "
        "positive");
  }
  return mc;
}

inline std::vector<double> parse_sweep_grid(const nlohmann::json& root) {
  const detail::JsonCursor top(root, "");
  if (!top.has("sweep")) return {};
  const auto& sweep = root.at("sweep");
  if (!sweep.is_object() || !sweep.contains("grid")) return {};
  const auto& grid = sweep.at("grid");
  if (!grid.is_array()) {
    throw ConfigError("config error at sweep.grid: expected an array");
  }
  std::vector<double> out;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    out.push_back(detail::JsonCursor::convert<double>(
        grid[k], "sweep.grid[" + std::to_string(k) + "]"));
  }
  return out;
}

inline nlohmann::json scenario_to_json(const ScenarioConfig& sc) {
  nlohmann::json s;
  s["n_followers"] = sc.n_followers;
  s["initial_speed"] = sc.initial_speed;
  s["gap_init"] = sc.gap_init == GapInit::CaccTimeGap    ? "cacc_time_gap"
                  : sc.gap_init == GapInit::HumanTimeGap ? "human_time_gap"
                                                         : "explicit";
  s["explicit_gap"] = sc.explicit_gap;
  s["cacc_time_gap"] = sc.cacc_time_gap;
  s["cacc_standstill"] = sc.cacc_standstill;
  s["duration"] = sc.duration;
  s["dt"] = sc.dt;
  s["human_mode"] = sc.human_mode == HumanMode::Modeled ? "modeled"
                                                        : "baseline_delayed";
  s["baseline_delay"] = sc.baseline_delay;
  s["seed"] = sc.seed;
  s["leader"] = detail::leader_to_json(sc.leader);
  nlohmann::json auth = nlohmann::json::array();
  for (const auto& sched : sc.schedules) {
    auth.push_back(detail::schedule_to_json(sched));
  }
  s["authority"] = auth;
  s["planner"] = {{"horizon", sc.planner.horizon},
                  {"weights", detail::weights_to_json(sc.planner.weights)},
                  {"u_min", sc.planner.u_min},
                  {"u_max", sc.planner.u_max},
                  {"g_min", sc.planner.g_min},
                  {"replan_period", sc.planner.replan_period},
                  {"hv_forecast_hold", sc.planner.hv_forecast_hold}};
  s["human"] = {{"weights", detail::weights_to_json(sc.human.weights)},
                {"time_gap", sc.human.time_gap},
                {"standstill", sc.human.standstill},
                {"g_ref_mode", sc.human.g_ref_mode == GapRefMode::InitialSpeed
                                   ? "initial_speed"
                                   : "planning_speed"}};
  return {{"scenario", s}};
}

inline nlohmann::json metrics_to_json(const MetricsConfig& mc) {
  return {{"skip_periods", mc.skip_periods},
          {"eval_periods", mc.eval_periods},
          {"influence_threshold", mc.influence_threshold},
          {"denominator_floor", mc.denominator_floor},
          {"stable_cutoff", mc.stable_cutoff},
          {"bisection_tol", mc.bisection_tol}};
}

inline nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("config error: cannot open file '" + path + "'");
  }
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config error in '" + path + "': " + e.what());
  }
}

// Applies "dotted.path=value" overrides onto the raw JSON tree before
// parsing. Values are parsed as JSON when possible and fall back to strings.
inline void apply_override(nlohmann::json& root, const std::string& spec) {
  const std::size_t eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("config error: override '" + spec +
                      "' must look like path.to.field=value");
  }
  const std::string path = spec.substr(0, eq);
  const std::string text = spec.substr(eq + 1);
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    value = text;  // bare strings are allowed unquoted
  }

  nlohmann::json* node = &root;
  std::istringstream keys(path);
  std::string key;
  std::vector<std::string> parts;
  while (std::getline(keys, key, '.')) {
    if (key.empty()) {
      throw ConfigError("config error: override path '" + path +
                        "' has an empty segment");
    }
    parts.push_back(key);
  }
  for (std::size_t k = 0; k + 1 < parts.size(); ++k) {
    node = &(*node)[parts[k]];
    if (!node->is_object() && !node->is_null()) {
      throw ConfigError("config error: override path '" + path +
                        "' crosses a non-object field at '" + parts[k] + "'");
    }
  }
  (*node)[parts.back()] = value;
}

}  // namespace cacc

#endif  // CACC_CONFIG_IO_HPP_
