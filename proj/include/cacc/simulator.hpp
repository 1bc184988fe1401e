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

#ifndef CACC_SIMULATOR_HPP_
#define CACC_SIMULATOR_HPP_

// Platoon simulation: one human-driven lead vehicle followed by n connected
// followers in predecessor-following topology. Per step and per follower:
// observe the predecessor, forecast its acceleration, let the machine plan
// against the anticipated human reaction, evaluate the human's reaction to
// that plan, fuse the two commands by the current authority split, then
// integrate all absolute kinematics with forward Euler (speeds floored at
// zero). Followers publish their fused command plan for the next vehicle's
// forecast one step later.
//
// A collision (gap <= 0 at a step boundary) stops the rear vehicle of the
// pair: its speed drops to zero, its position freezes, and its commands are
// zeroed from then on while the rest of the platoon keeps running.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "cacc/dynamics.hpp"
#include "cacc/fusion.hpp"
#include "cacc/human_model.hpp"
#include "cacc/machine_controller.hpp"

namespace cacc {

// Per-sample event bits in the trajectory log.
namespace flag {
constexpr std::uint8_t kMachineSaturated = 1;   // raw machine command clipped
constexpr std::uint8_t kPlannedGapBound = 2;    // planned gap under g_min
constexpr std::uint8_t kHumanOutOfBounds = 4;   // human command outside limits
constexpr std::uint8_t kCollision = 8;
constexpr std::uint8_t kHalted = 16;
}  // namespace flag

struct LeaderConstant {
  double v{10.0};
};

// Sinusoidal speed around v0 starting at t_start. cycles = 0 keeps the
// oscillation running for the rest of the scenario; a positive count ends
// the episode after that many full periods (the speed returns to v0).
struct LeaderSinusoid {
  double v0{10.0};
  double amplitude{2.0};
  double period{20.0};
  double t_start{0.0};
  int cycles{0};
};

struct LeaderHardBrake {
  double v0{10.0};
  double decel{-4.0};
  double t_start{0.0};
  double v_final{2.0};
};

using LeaderProfile =
    std::variant<LeaderConstant, LeaderSinusoid, LeaderHardBrake>;

inline void validate(const LeaderProfile& profile) {
  if (const auto* c = std::get_if<LeaderConstant>(&profile)) {
    if (!(c->v >= 0.0) || !std::isfinite(c->v)) {
      throw std::invalid_argument("LeaderConstant: speed must be >= 0");
    }
  } else if (const auto* s = std::get_if<LeaderSinusoid>(&profile)) {
    if (!(s->period > 0.0) || !(s->amplitude >= 0.0) ||
        !(s->v0 - s->amplitude >= 0.0) || s->t_start < 0.0 || s->cycles < 0) {
      throw std::invalid_argument(
          "LeaderSinusoid: need period > 0 and 0 <= amplitude <= v0");
    }
  } else if (const auto* b = std::get_if<LeaderHardBrake>(&profile)) {
    if (!(b->decel < 0.0) || !(b->v_final >= 0.0) || !(b->v0 >= b->v_final) ||
        b->t_start < 0.0) {
      throw std::invalid_argument(
          "LeaderHardBrake: need decel < 0 and 0 <= v_final <= v0");
    }
  }
}

inline double leader_speed(const LeaderProfile& profile, double t) {
  if (const auto* c = std::get_if<LeaderConstant>(&profile)) {
    return c->v;
  }
  if (const auto* s = std::get_if<LeaderSinusoid>(&profile)) {
    if (t < s->t_start) return s->v0;
    if (s->cycles > 0 && t >= s->t_start + s->cycles * s->period) return s->v0;
    constexpr double kTwoPi = 6.283185307179586476925286766559;
    return s->v0 + s->amplitude * std::sin(kTwoPi * (t - s->t_start) / s->period);
  }
  const auto& b = std::get<LeaderHardBrake>(profile);
  if (t < b.t_start) return b.v0;
  return std::max(b.v_final, b.v0 + b.decel * (t - b.t_start));
}

// Time the leader first deviates from steady cruising; +inf when it never
// does. Anchors the metrics windows.
inline double disturbance_onset(const LeaderProfile& profile) {
  if (std::holds_alternative<LeaderConstant>(profile)) {
    return std::numeric_limits<double>::infinity();
  }
  if (const auto* s = std::get_if<LeaderSinusoid>(&profile)) return s->t_start;
  return std::get<LeaderHardBrake>(profile).t_start;
}

// Period of the periodic forcing, 0 when the profile is not periodic.
inline double forcing_period(const LeaderProfile& profile) {
  if (const auto* s = std::get_if<LeaderSinusoid>(&profile)) return s->period;
  return 0.0;
}

enum class GapInit { CaccTimeGap, HumanTimeGap, Explicit };
enum class HumanMode { Modeled, BaselineDelayed };

// How the human's desired gap tracks speed: anchored once per run to the
// scenario's initial speed (the gap the driver was accustomed to at takeover),
// or recomputed from the ego speed at every planning instant.
enum class GapRefMode { InitialSpeed, PlanningSpeed };

struct HumanParams {
  CostWeights weights{0.0, 1.0, 3.0};
  double time_gap{1.5};     // s
  double standstill{2.0};   // m
  GapRefMode g_ref_mode{GapRefMode::InitialSpeed};

  void validate() const {
    weights.validate();
    if (!(time_gap >= 0.0) || !(standstill >= 0.0)) {
      throw std::invalid_argument("HumanParams: negative gap policy constants");
    }
  }

  double desired_gap(double speed) const {
    return time_gap * speed + standstill;
  }
};

struct ScenarioConfig {
  int n_followers{6};
  double initial_speed{10.0};
  GapInit gap_init{GapInit::CaccTimeGap};
  double explicit_gap{10.0};
  double cacc_time_gap{0.5};   // s
  double cacc_standstill{2.0}; // m
  LeaderProfile leader{LeaderConstant{10.0}};
  std::vector<AuthoritySchedule> schedules{AuthoritySchedule{ConstantAuthority{0.0}}};
  PlannerConfig planner{};
  HumanParams human{};
  double duration{100.0};
  double dt{0.1};
  HumanMode human_mode{HumanMode::Modeled};
  double baseline_delay{0.5};
  std::uint64_t seed{0};

  double initial_gap() const {
    switch (gap_init) {
      case GapInit::CaccTimeGap:
        return cacc_time_gap * initial_speed + cacc_standstill;
      case GapInit::HumanTimeGap:
        return human.desired_gap(initial_speed);
      case GapInit::Explicit:
        return explicit_gap;
    }
    return explicit_gap;
  }

  void validate() const {
    planner.validate();
    human.validate();
    cacc::validate(leader);
    if (n_followers < 1) {
      throw std::invalid_argument("ScenarioConfig: need at least one follower");
    }
    if (!(duration > 0.0) || !(dt > 0.0)) {
      throw std::invalid_argument("ScenarioConfig: duration and dt must be > 0");
    }
    if (dt != planner.dt) {
      throw std::invalid_argument(
          "ScenarioConfig: simulation dt must match the planner dt");
    }
    if (!(initial_speed >= 0.0) || !(initial_gap() > 0.0)) {
      throw std::invalid_argument(
          "ScenarioConfig: initial speed/gap must be non-negative/positive");
    }
    if (schedules.size() != 1 &&
        schedules.size() != static_cast<std::size_t>(n_followers)) {
      throw std::invalid_argument(
          "ScenarioConfig: provide one shared authority schedule or one per "
          "follower");
    }
    for (const auto& s : schedules) cacc::validate(s);
    if (baseline_delay < 0.0) {
      throw std::invalid_argument("ScenarioConfig: negative baseline delay");
    }
  }

  const AuthoritySchedule& schedule_for(int follower) const {
    return schedules.size() == 1 ? schedules[0]
                                 : schedules[static_cast<std::size_t>(follower - 1)];
  }
};

struct VehicleTrace {
  std::vector<double> position;
  std::vector<double> speed;
  std::vector<double> accel;
  std::vector<double> gap;
  std::vector<double> dv;
  std::vector<double> u_h;
  std::vector<double> u_m;
  std::vector<double> u_fused;
  std::vector<double> alpha_h;
  std::vector<std::uint8_t> flags;
  double initial_gap{0.0};
  bool collided{false};
  double collision_time{std::numeric_limits<double>::quiet_NaN()};

  void reserve_and_zero(std::size_t n) {
    for (auto* v : {&position, &speed, &accel, &gap, &dv, &u_h, &u_m, &u_fused,
                    &alpha_h}) {
      v->assign(n, 0.0);
    }
    flags.assign(n, 0);
  }
};

struct TrajectoryLog {
  double dt{0.0};
  double duration{0.0};
  int n_followers{0};
  double disturbance_onset{std::numeric_limits<double>::infinity()};
  double forcing_period{0.0};
  double initial_speed{0.0};
  std::vector<double> time;
  std::vector<VehicleTrace> vehicles;  // index 0 is the leader

  int steps() const { return static_cast<int>(time.size()); }
  bool any_collision() const {
    for (const auto& v : vehicles) {
      if (v.collided) return true;
    }
    return false;
  }
};

inline TrajectoryLog run(const ScenarioConfig& scenario) {
  scenario.validate();
  const int n = scenario.n_followers;
  const int horizon = scenario.planner.horizon;
  const int plan_steps = horizon - 1;
  const double dt = scenario.dt;
  const int total = static_cast<int>(std::llround(scenario.duration / dt)) + 1;
  const bool baseline = scenario.human_mode == HumanMode::BaselineDelayed;
  const int delay_steps =
      static_cast<int>(std::llround(scenario.baseline_delay / dt));

  TrajectoryLog log;
  log.dt = dt;
  log.duration = scenario.duration;
  log.n_followers = n;
  log.disturbance_onset = disturbance_onset(scenario.leader);
  log.forcing_period = forcing_period(scenario.leader);
  log.initial_speed = scenario.initial_speed;
  log.time.resize(total);
  log.vehicles.resize(n + 1);
  for (auto& trace : log.vehicles) trace.reserve_and_zero(total);

  // Absolute kinematics. The leader sits at the origin; followers line up
  // behind it at the configured initial gap.
  std::vector<double> pos(n + 1), vel(n + 1);
  const double gap0 = scenario.initial_gap();
  pos[0] = 0.0;
  vel[0] = leader_speed(scenario.leader, 0.0);
  for (int i = 1; i <= n; ++i) {
    pos[i] = pos[i - 1] - gap0;
    vel[i] = scenario.initial_speed;
    log.vehicles[i].initial_gap = gap0;
  }

  // Machine reference: zero speed difference, gap left to the human.
  const ReferenceTrajectory machine_refs(
      horizon, RefPoint{0.0, 0.0, true, false});

  // Per-follower solver state plus a snapshot of the last plan so steps
  // between plan refreshes (replan_period > 1) replay the stored plan with
  // the gains that produced it.
  struct FollowerRuntime {
    MachinePlan plan;
    Eigen::VectorXd uh_plan;
    GainSequence gains;
    FeedforwardSequence ff;
    int age{-1};  // steps since the plan was solved, -1 before the first
  };
  std::vector<Planner> planners;
  std::vector<FollowerRuntime> runtimes(n + 1);
  if (!baseline) {
    planners.reserve(n);
    for (int i = 0; i < n; ++i) {
      planners.emplace_back(scenario.planner, scenario.human.weights);
    }
  }

  // Full-authority gains for the delayed-baseline human. Reference masking
  // depends only on the active pattern, so these are valid for every step.
  GainSequence baseline_gains;
  std::vector<CostWeights> baseline_weights_eff;
  if (baseline) {
    const std::vector<AuthorityPair> full(plan_steps, AuthorityPair(1.0));
    const ReferenceTrajectory probe(
        horizon, RefPoint{0.0, scenario.human.desired_gap(scenario.initial_speed),
                          false, true});
    baseline_weights_eff = effective_weights(
        std::vector<CostWeights>(horizon, scenario.human.weights), probe);
    baseline_gains = compute_gains(discretize(dt), full, baseline_weights_eff,
                                   horizon);
  }
  const std::vector<double> zero_plan(plan_steps, 0.0);

  std::vector<std::vector<double>> published_prev(n + 1), published_next(n + 1);
  std::vector<std::vector<double>> uh_history(n + 1);
  std::vector<bool> halted(n + 1, false);
  double prev_leader_speed = vel[0];

  for (int k = 0; k < total; ++k) {
    const double t = k * dt;
    log.time[k] = t;

    // Leader row: speed follows the profile, acceleration is the value the
    // followers can measure over the elapsed interval.
    const double leader_accel_observed =
        k == 0 ? 0.0 : (vel[0] - prev_leader_speed) / dt;
    prev_leader_speed = vel[0];
    log.vehicles[0].position[k] = pos[0];
    log.vehicles[0].speed[k] = vel[0];
    log.vehicles[0].accel[k] =
        (leader_speed(scenario.leader, t + dt) - vel[0]) / dt;

    std::vector<double> accel(n + 1, 0.0);
    for (int i = 1; i <= n; ++i) {
      VehicleTrace& trace = log.vehicles[i];
      const VehicleState x{vel[i - 1] - vel[i], pos[i - 1] - pos[i]};
      trace.position[k] = pos[i];
      trace.speed[k] = vel[i];
      trace.gap[k] = x.g;
      trace.dv[k] = x.dv;

      if (halted[i]) {
        trace.flags[k] = flag::kCollision | flag::kHalted;
        continue;
      }

      std::uint8_t flags = 0;
      double u_h = 0.0;
      double u_m = 0.0;
      double fused = 0.0;
      double alpha_now = 1.0;

      const double g_ref =
          scenario.human.g_ref_mode == GapRefMode::InitialSpeed
              ? scenario.human.desired_gap(scenario.initial_speed)
              : scenario.human.desired_gap(vel[i]);
      const ReferenceTrajectory human_refs(
          horizon, RefPoint{0.0, g_ref, false, true});

      if (baseline) {
        const FeedforwardSequence ff = compute_feedforward(
            baseline_gains, baseline_weights_eff, human_refs, zero_plan);
        const double raw = human_reaction(baseline_gains, ff, 0, x, 0.0);
        uh_history[i].push_back(raw);
        u_h = k >= delay_steps ? uh_history[i][k - delay_steps] : 0.0;
        fused = u_h;
      } else {
        const AuthorityPair auth_now =
            authority_at(scenario.schedule_for(i), t);
        alpha_now = auth_now.human();
        FollowerRuntime& rt = runtimes[i];
        if (rt.age >= 0) ++rt.age;
        const bool replan = rt.age < 0 ||
                            rt.age >= scenario.planner.replan_period ||
                            rt.age >= plan_steps;
        if (replan) {
          std::vector<AuthorityPair> auth_seq;
          auth_seq.reserve(plan_steps);
          for (int j = 0; j < plan_steps; ++j) {
            auth_seq.push_back(
                authority_at(scenario.schedule_for(i), t + j * dt));
          }
          const std::vector<double> forecast =
              i == 1 ? forecast_predecessor(PredecessorKind::HumanDriven,
                                            leader_accel_observed, {},
                                            scenario.planner)
                     : forecast_predecessor(PredecessorKind::Connected, 0.0,
                                            published_prev[i - 1],
                                            scenario.planner);

          Planner& planner = planners[i - 1];
          rt.plan = planner.plan_step(x, auth_seq, human_refs, machine_refs,
                                      forecast);
          rt.gains = planner.gains();
          rt.ff = compute_feedforward(rt.gains,
                                      planner.human_weights_effective(),
                                      human_refs, rt.plan.plan);
          rt.uh_plan =
              planner.law().human_controls(rt.plan.solution.X,
                                           rt.plan.solution.Um);
          rt.age = 0;
        }

        const int idx = rt.age;
        const double um_raw = rt.plan.plan[idx];
        u_m = std::clamp(um_raw, scenario.planner.u_min, scenario.planner.u_max);
        u_h = human_reaction(rt.gains, rt.ff, idx, x, um_raw);
        fused = fuse(u_h, u_m, auth_now);

        if (um_raw < scenario.planner.u_min || um_raw > scenario.planner.u_max) {
          flags |= flag::kMachineSaturated;
        }
        if (rt.plan.gap_bound_violated) flags |= flag::kPlannedGapBound;

        // Share the current view of the fused horizon plan for the
        // follower's next forecast; a stale plan is published from its
        // current offset.
        std::vector<double> fused_plan(plan_steps, 0.0);
        for (int j = 0; j + idx < plan_steps && j < plan_steps; ++j) {
          const AuthorityPair a =
              authority_at(scenario.schedule_for(i), t + j * dt);
          fused_plan[j] = a.human() * rt.uh_plan(idx + j) +
                          a.machine() * rt.plan.plan[idx + j];
        }
        published_next[i] = std::move(fused_plan);
      }

      if (u_h < scenario.planner.u_min || u_h > scenario.planner.u_max) {
        flags |= flag::kHumanOutOfBounds;
      }

      double a = fused;
      if (vel[i] + dt * a < 0.0) a = -vel[i] / dt;  // no rolling backwards
      accel[i] = a;

      trace.accel[k] = a;
      trace.u_h[k] = u_h;
      trace.u_m[k] = u_m;
      trace.u_fused[k] = fused;
      trace.alpha_h[k] = alpha_now;
      trace.flags[k] = flags;
    }

    if (k + 1 < total) {
      pos[0] += dt * vel[0];
      vel[0] = leader_speed(scenario.leader, t + dt);
      for (int i = 1; i <= n; ++i) {
        pos[i] += dt * vel[i];
        vel[i] = halted[i] ? 0.0 : std::max(0.0, vel[i] + dt * accel[i]);
      }
      for (int i = 1; i <= n; ++i) {
        if (!halted[i] && pos[i - 1] - pos[i] <= 0.0) {
          halted[i] = true;
          vel[i] = 0.0;
          log.vehicles[i].collided = true;
          log.vehicles[i].collision_time = t + dt;
        }
      }
    }

    published_prev.swap(published_next);
    for (auto& p : published_next) p.clear();
  }
  return log;
}

// Reference pipeline without machine assistance: the human holds full
// authority from the start, reacts without any predecessor preview, and its
// commands reach the vehicle after the configured reaction delay.
inline TrajectoryLog run_baseline_human(const ScenarioConfig& scenario) {
  ScenarioConfig sc = scenario;
  sc.human_mode = HumanMode::BaselineDelayed;
  return run(sc);
}

}  // namespace cacc

#endif  // CACC_SIMULATOR_HPP_
