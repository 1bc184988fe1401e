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

#ifndef CACC_METRICS_HPP_
#define CACC_METRICS_HPP_

// Evaluation metrics over trajectory logs: oscillation propagation rate
// between consecutive followers, acceleration range, gap extremes, and the
// duration for which the platoon keeps disturbing traffic behind it. Also
// the authority sweep that brackets the largest human share that still
// damps oscillations along the string.

#include <cmath>
#include <future>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cacc/simulator.hpp"

namespace cacc {

struct MetricsConfig {
  double skip_periods{2.0};       // transient periods dropped before scoring
  double eval_periods{3.0};       // periods included in the scoring window
  double influence_threshold{0.1};  // m/s speed deviation considered settled
  double denominator_floor{1e-9};
  double stable_cutoff{1.0};      // max ratio below this counts as damping
  double bisection_tol{0.005};
};

struct TimeWindow {
  double t0{0.0};
  double t1{0.0};
};

namespace detail {

inline std::pair<int, int> window_indices(const TrajectoryLog& log,
                                          const TimeWindow& window) {
  constexpr double kEps = 1e-9;
  if (!(window.t0 < window.t1)) {
    throw std::invalid_argument("window: need t0 < t1");
  }
  if (log.time.empty() || window.t0 < log.time.front() - kEps ||
      window.t1 > log.time.back() + kEps) {
    throw std::invalid_argument("window: outside the logged time range");
  }
  int first = 0;
  while (first < log.steps() && log.time[first] < window.t0 - kEps) ++first;
  int last = log.steps() - 1;
  while (last >= 0 && log.time[last] > window.t1 + kEps) --last;
  if (first > last) {
    throw std::invalid_argument("window: contains no samples");
  }
  return {first, last};
}

// Equilibrium value a series held before the disturbance started: the mean
// of the pre-onset samples, or the first sample when the disturbance starts
// immediately.
inline double pre_disturbance_mean(const TrajectoryLog& log,
                                   const std::vector<double>& series) {
  double sum = 0.0;
  int count = 0;
  for (int k = 0; k < log.steps(); ++k) {
    if (log.time[k] >= log.disturbance_onset - 1e-9) break;
    sum += series[k];
    ++count;
  }
  if (count == 0) return series.empty() ? 0.0 : series.front();
  return sum / count;
}

inline double windowed_deviation_norm(const TrajectoryLog& log,
                                      const std::vector<double>& series,
                                      double equilibrium,
                                      const TimeWindow& window) {
  const auto [first, last] = window_indices(log, window);
  double acc = 0.0;
  for (int k = first; k <= last; ++k) {
    const double d = series[k] - equilibrium;
    acc += d * d;
  }
  return std::sqrt(acc);
}

inline void check_vehicle_index(const TrajectoryLog& log, int i, int lowest) {
  if (i < lowest || i > log.n_followers) {
    throw std::invalid_argument("vehicle index out of range for this metric");
  }
}

}  // namespace detail

// Ratio of gap-deviation energy between follower i and the follower ahead of
// it, both measured against their pre-disturbance equilibrium gaps. Values
// below one mean the oscillation shrinks while passing this hop. Returns
// +infinity when the upstream vehicle shows no oscillation to compare with.
inline double propagation_rate(const TrajectoryLog& log, int i,
                               const TimeWindow& window,
                               double denominator_floor = 1e-9) {
  detail::check_vehicle_index(log, i, 2);
  const auto& own = log.vehicles[i].gap;
  const auto& ahead = log.vehicles[i - 1].gap;
  const double own_eq = detail::pre_disturbance_mean(log, own);
  const double ahead_eq = detail::pre_disturbance_mean(log, ahead);
  const double num = detail::windowed_deviation_norm(log, own, own_eq, window);
  const double den =
      detail::windowed_deviation_norm(log, ahead, ahead_eq, window);
  if (den < denominator_floor) {
    return std::numeric_limits<double>::infinity();
  }
  return num / den;
}

// Spread of the applied acceleration over the window. Defined for the leader
// as well as the followers.
inline double acceleration_range(const TrajectoryLog& log, int i,
                                 const TimeWindow& window) {
  detail::check_vehicle_index(log, i, 0);
  const auto [first, last] = detail::window_indices(log, window);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (int k = first; k <= last; ++k) {
    lo = std::min(lo, log.vehicles[i].accel[k]);
    hi = std::max(hi, log.vehicles[i].accel[k]);
  }
  return hi - lo;
}

struct GapStats {
  double min_gap{0.0};
  double gap_range{0.0};
  bool collided{false};
};

inline GapStats min_gap_and_distribution(const TrajectoryLog& log, int i,
                                         const TimeWindow& window) {
  detail::check_vehicle_index(log, i, 1);
  const auto [first, last] = detail::window_indices(log, window);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (int k = first; k <= last; ++k) {
    lo = std::min(lo, log.vehicles[i].gap[k]);
    hi = std::max(hi, log.vehicles[i].gap[k]);
  }
  return GapStats{lo, hi - lo, log.vehicles[i].collided};
}

struct InfluenceResult {
  double seconds{0.0};
  bool censored{false};
};

// How long, past the disturbance onset, the last follower's speed keeps
// deviating from its pre-disturbance level by more than the threshold. The
// deviation must stay quiet for a full forcing period (or one second when
// the forcing is aperiodic) before the platoon counts as settled; when the
// log ends before that can be confirmed the result is censored at the log
// duration.
inline InfluenceResult influence_duration(const TrajectoryLog& log,
                                          double amplitude_threshold,
                                          double quiet_window = -1.0) {
  if (!(amplitude_threshold > 0.0)) {
    throw std::invalid_argument("influence_duration: threshold must be > 0");
  }
  if (!std::isfinite(log.disturbance_onset)) return {0.0, false};
  if (quiet_window <= 0.0) {
    quiet_window = log.forcing_period > 0.0 ? log.forcing_period : 1.0;
  }
  const auto& speed = log.vehicles[log.n_followers].speed;
  const double equilibrium = detail::pre_disturbance_mean(log, speed);
  int last_exceed = -1;
  for (int k = 0; k < log.steps(); ++k) {
    if (log.time[k] < log.disturbance_onset - 1e-9) continue;
    if (std::abs(speed[k] - equilibrium) >= amplitude_threshold) {
      last_exceed = k;
    }
  }
  if (last_exceed < 0) return {0.0, false};
  const double settle = log.time[last_exceed] + log.dt;
  if (settle + quiet_window > log.time.back() + 1e-9) {
    return {log.duration, true};
  }
  return {settle - log.disturbance_onset, false};
}

// Default scoring window: skip the transient periods after the disturbance
// starts, then evaluate over an integer number of forcing periods. Aperiodic
// or quiet scenarios fall back to everything from the onset (or the whole
// log) to the end.
inline TimeWindow default_evaluation_window(const TrajectoryLog& log,
                                            const MetricsConfig& cfg = {}) {
  const double end = log.time.empty() ? 0.0 : log.time.back();
  double t0 = 0.0;
  double t1 = end;
  if (std::isfinite(log.disturbance_onset)) {
    t0 = log.disturbance_onset;
    if (log.forcing_period > 0.0) {
      t0 += cfg.skip_periods * log.forcing_period;
      t1 = t0 + cfg.eval_periods * log.forcing_period;
    }
  }
  if (t1 > end) t1 = end;
  if (!(t0 < t1)) {
    t0 = 0.0;
    t1 = end;
  }
  return {t0, t1};
}

struct MoeReport {
  TimeWindow window{};
  // Indexed by follower (entry 0 is follower 1). theta is NaN for the first
  // follower, where no upstream follower exists to compare against.
  std::vector<double> theta;
  std::vector<double> accel_range;
  std::vector<double> gap_range;
  std::vector<double> min_gap;
  double influence_seconds{0.0};
  bool influence_censored{false};
  double max_theta{std::numeric_limits<double>::quiet_NaN()};
  bool string_stable{true};
  bool collision{false};
};

inline MoeReport compute_moe_report(const TrajectoryLog& log,
                                    const MetricsConfig& cfg = {}) {
  MoeReport report;
  report.window = default_evaluation_window(log, cfg);
  report.collision = log.any_collision();
  const int n = log.n_followers;
  report.theta.assign(n, std::numeric_limits<double>::quiet_NaN());
  report.accel_range.resize(n);
  report.gap_range.resize(n);
  report.min_gap.resize(n);
  double worst = -std::numeric_limits<double>::infinity();
  bool any_finite = false;
  for (int i = 1; i <= n; ++i) {
    if (i >= 2) {
      const double th =
          propagation_rate(log, i, report.window, cfg.denominator_floor);
      report.theta[i - 1] = th;
      if (std::isfinite(th)) {
        any_finite = true;
        worst = std::max(worst, th);
      }
    }
    report.accel_range[i - 1] = acceleration_range(log, i, report.window);
    const GapStats gs = min_gap_and_distribution(log, i, report.window);
    report.gap_range[i - 1] = gs.gap_range;
    report.min_gap[i - 1] = gs.min_gap;
  }
  if (any_finite) {
    report.max_theta = worst;
    report.string_stable = worst < cfg.stable_cutoff;
  } else {
    // Nothing oscillates upstream of any hop; trivially no amplification.
    report.max_theta = std::numeric_limits<double>::quiet_NaN();
    report.string_stable = true;
  }
  const InfluenceResult inf =
      influence_duration(log, cfg.influence_threshold);
  report.influence_seconds = inf.seconds;
  report.influence_censored = inf.censored;
  return report;
}

struct SweepRow {
  double alpha_h{0.0};
  std::vector<double> theta;  // per follower, NaN where undefined
  double max_theta{std::numeric_limits<double>::quiet_NaN()};
  bool stable{true};
  bool collision{false};
};

struct SweepResult {
  std::vector<SweepRow> rows;
  bool threshold_found{false};
  double threshold_low{std::numeric_limits<double>::quiet_NaN()};
  double threshold_high{std::numeric_limits<double>::quiet_NaN()};
  double threshold{std::numeric_limits<double>::quiet_NaN()};
  int transitions{0};
  std::vector<std::string> notes;
};

namespace detail {

inline SweepRow evaluate_authority_point(const ScenarioConfig& base,
                                         double alpha_h,
                                         const MetricsConfig& cfg) {
  ScenarioConfig sc = base;
  sc.schedules = {AuthoritySchedule{ConstantAuthority{alpha_h}}};
  const TrajectoryLog log = run(sc);
  const MoeReport report = compute_moe_report(log, cfg);
  SweepRow row;
  row.alpha_h = alpha_h;
  row.theta = report.theta;
  row.max_theta = report.max_theta;
  row.stable = report.string_stable;
  row.collision = report.collision;
  return row;
}

}  // namespace detail

// Sweeps the constant human-authority share over a grid, scoring each run by
// the worst per-hop propagation rate, then bisects the largest bracketing
// interval where damping flips to amplification.
inline SweepResult odd_sweep(const ScenarioConfig& base,
                             const std::vector<double>& alpha_grid,
                             const MetricsConfig& cfg = {},
                             bool concurrent = true) {
  if (alpha_grid.empty()) {
    throw std::invalid_argument("odd_sweep: empty authority grid");
  }
  for (double a : alpha_grid) {
    if (!(a >= 0.0 && a <= 1.0)) {
      throw std::invalid_argument("odd_sweep: grid values must lie in [0,1]");
    }
  }
  SweepResult result;
  result.rows.resize(alpha_grid.size());
  if (concurrent && alpha_grid.size() > 1) {
    std::vector<std::future<SweepRow>> jobs;
    jobs.reserve(alpha_grid.size());
    for (double a : alpha_grid) {
      jobs.push_back(std::async(std::launch::async,
                                detail::evaluate_authority_point, std::cref(base),
                                a, std::cref(cfg)));
    }
    for (std::size_t j = 0; j < jobs.size(); ++j) {
      result.rows[j] = jobs[j].get();
    }
  } else {
    for (std::size_t j = 0; j < alpha_grid.size(); ++j) {
      result.rows[j] = detail::evaluate_authority_point(base, alpha_grid[j], cfg);
    }
  }

  if (alpha_grid.size() < 2) {
    result.notes.emplace_back("no threshold in range");
    return result;
  }

  int last_stable = -1;
  int first_unstable = -1;
  for (std::size_t j = 1; j < result.rows.size(); ++j) {
    if (result.rows[j - 1].stable != result.rows[j].stable) {
      ++result.transitions;
      if (result.rows[j - 1].stable && first_unstable < 0) {
        last_stable = static_cast<int>(j - 1);
        first_unstable = static_cast<int>(j);
      }
    }
  }
  if (result.transitions > 1) {
    result.notes.emplace_back(
        "stability flips more than once across the grid; reported threshold "
        "uses the first transition");
  }
  if (first_unstable < 0) {
    result.notes.emplace_back("no threshold in range");
    return result;
  }

  double lo = result.rows[last_stable].alpha_h;
  double hi = result.rows[first_unstable].alpha_h;
  while (hi - lo > cfg.bisection_tol) {
    const double mid = 0.5 * (lo + hi);
    const SweepRow probe = detail::evaluate_authority_point(base, mid, cfg);
    if (probe.stable) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  result.threshold_found = true;
  result.threshold_low = lo;
  result.threshold_high = hi;
  result.threshold = 0.5 * (lo + hi);
  return result;
}

}  // namespace cacc

#endif  // CACC_METRICS_HPP_
