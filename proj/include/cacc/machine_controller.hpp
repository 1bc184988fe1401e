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

#ifndef CACC_MACHINE_CONTROLLER_HPP_
#define CACC_MACHINE_CONTROLLER_HPP_

// The machine side of the shared controller: a leader MPC that anticipates
// the human's reaction. The stacked human law is substituted into the
// horizon dynamics, which leaves an equality-constrained QP in z = (X; U_m):
//
//   min 0.5 z^T Dm z + Fm^T z   s.t.  Wm z = Zm
//
// solved exactly through its KKT saddle system. Inequality limits are not
// part of the solve: the applied first command is saturated to the
// configured bounds and violations (command or planned gap) are surfaced as
// flags. A small receding-horizon planner caches the factorization while
// the authority schedule and references seen over the horizon stay the
// same, so steady phases cost one back-substitution per step.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cacc/dynamics.hpp"
#include "cacc/human_model.hpp"
#include "cacc/stacked_ops.hpp"

namespace cacc {

// Raised when the saddle-point system cannot be solved reliably.
class IllPosedError : public std::runtime_error {
 public:
  explicit IllPosedError(const std::string& what) : std::runtime_error(what) {}
};

struct PlannerConfig {
  int horizon{30};             // steps, >= 2
  double dt{0.1};              // s
  CostWeights weights{1.0, 0.01, 2.0};  // machine q_v, q_g, r
  double u_min{-6.0};          // m/s^2
  double u_max{3.0};           // m/s^2
  double g_min{1.0};           // m, planned-gap lower bound (flag only)
  int replan_period{1};        // steps between plan refreshes
  double hv_forecast_hold{0.0};  // s an observed HV acceleration is held

  void validate() const {
    weights.validate();
    if (horizon < 2) {
      throw std::invalid_argument("PlannerConfig: horizon must be >= 2");
    }
    if (!(weights.q_v > 0.0)) {
      throw std::invalid_argument("PlannerConfig: q_v must be positive");
    }
    if (!(dt > 0.0) || !std::isfinite(dt)) {
      throw std::invalid_argument("PlannerConfig: dt must be positive");
    }
    if (!(u_min < u_max)) {
      throw std::invalid_argument("PlannerConfig: need u_min < u_max");
    }
    if (replan_period < 1) {
      throw std::invalid_argument("PlannerConfig: replan_period must be >= 1");
    }
    if (hv_forecast_hold < 0.0) {
      throw std::invalid_argument("PlannerConfig: negative forecast hold");
    }
  }
};

struct QpProblem {
  int horizon{0};
  Eigen::MatrixXd Dm;  // (3K-1) x (3K-1) block diagonal
  Eigen::VectorXd Fm;  // 3K-1
  Eigen::MatrixXd Wm;  // 2K x (3K-1)
  Eigen::VectorXd Zm;  // 2K
};

struct KktDiagnostics {
  double stationarity_residual{0.0};
  double feasibility_residual{0.0};
  double condition_estimate{0.0};
};

struct KktSolution {
  Eigen::VectorXd X;       // 2K
  Eigen::VectorXd Um;      // K-1
  Eigen::VectorXd lambda;  // 2K
  double objective{0.0};
  KktDiagnostics diagnostics;
};

// Stacked single-vehicle plant operators over the horizon: X stacks
// x_0..x_{K-1}, and block row k+1 of each operator advances step k.
struct StackedPlant {
  Eigen::MatrixXd Am;   // 2K x 2K, A on the block subdiagonal
  Eigen::MatrixXd Bhm;  // 2K x (K-1)
  Eigen::MatrixXd Bmm;  // 2K x (K-1)
};

inline StackedPlant build_stacked_plant(const StackedHumanLaw& law) {
  const int horizon = law.horizon;
  const int steps = horizon - 1;
  StackedPlant plant;
  plant.Am = Eigen::MatrixXd::Zero(2 * horizon, 2 * horizon);
  plant.Bhm = Eigen::MatrixXd::Zero(2 * horizon, steps);
  plant.Bmm = Eigen::MatrixXd::Zero(2 * horizon, steps);
  for (int k = 0; k < steps; ++k) {
    plant.Am.block<2, 2>(2 * (k + 1), 2 * k) = law.A;
    plant.Bhm.block<2, 1>(2 * (k + 1), k) = law.Bh[k];
    plant.Bmm.block<2, 1>(2 * (k + 1), k) = law.Bm[k];
  }
  return plant;
}

// Constraint right-hand side: first block injects the measured state, block
// k+1 injects the forecast predecessor acceleration through C.
inline Eigen::VectorXd assemble_constraint_rhs(
    const StackedHumanLaw& law, const StackedPlant& plant,
    const VehicleState& x0, const std::vector<double>& ap_forecast,
    double dt) {
  const int horizon = law.horizon;
  const int steps = horizon - 1;
  if (ap_forecast.size() != static_cast<std::size_t>(steps)) {
    throw std::invalid_argument(
        "assemble_constraint_rhs: forecast length must be horizon-1");
  }
  const Eigen::Vector2d c(dt, 0.0);
  Eigen::VectorXd cm = Eigen::VectorXd::Zero(2 * horizon);
  cm.head<2>() = x0.vec();
  for (int k = 0; k < steps; ++k) {
    cm.segment<2>(2 * (k + 1)) = c * ap_forecast[k];
  }
  return cm + plant.Bhm * (law.Jh * law.Sh2);
}

inline QpProblem assemble_qp(const VehicleState& x0,
                             const std::vector<double>& ap_forecast,
                             const StackedHumanLaw& stacked,
                             const PlannerConfig& cfg,
                             const ReferenceTrajectory& refs_m) {
  const int horizon = stacked.horizon;
  const int steps = horizon - 1;
  if (cfg.horizon != horizon ||
      refs_m.size() != static_cast<std::size_t>(horizon) ||
      ap_forecast.size() != static_cast<std::size_t>(steps)) {
    throw std::invalid_argument("assemble_qp: horizon/sequence mismatch");
  }

  const std::vector<CostWeights> weights = effective_weights(
      std::vector<CostWeights>(horizon, cfg.weights), refs_m);

  QpProblem qp;
  qp.horizon = horizon;
  qp.Dm = Eigen::MatrixXd::Zero(2 * horizon + steps, 2 * horizon + steps);
  qp.Fm = Eigen::VectorXd::Zero(2 * horizon + steps);
  for (int k = 0; k < horizon; ++k) {
    qp.Dm.block<2, 2>(2 * k, 2 * k) = weights[k].state_weight();
    qp.Fm.segment<2>(2 * k) = -weights[k].state_weight() * refs_m[k].vec();
  }
  for (int k = 0; k < steps; ++k) {
    qp.Dm(2 * horizon + k, 2 * horizon + k) = weights[k].r;
  }

  const StackedPlant plant = build_stacked_plant(stacked);
  qp.Wm.resize(2 * horizon, 2 * horizon + steps);
  qp.Wm.leftCols(2 * horizon) =
      Eigen::MatrixXd::Identity(2 * horizon, 2 * horizon) - plant.Am -
      plant.Bhm * stacked.Kh;
  qp.Wm.rightCols(steps) = -plant.Bhm * (stacked.Ph + stacked.Jh * stacked.Sh1) -
                           plant.Bmm;
  qp.Zm = assemble_constraint_rhs(stacked, plant, x0, ap_forecast, cfg.dt);
  return qp;
}

namespace detail {

inline Eigen::MatrixXd build_saddle(const QpProblem& qp) {
  const Eigen::Index n = qp.Dm.rows();
  const Eigen::Index m = qp.Wm.rows();
  Eigen::MatrixXd saddle = Eigen::MatrixXd::Zero(n + m, n + m);
  saddle.topLeftCorner(n, n) = qp.Dm;
  saddle.topRightCorner(n, m) = qp.Wm.transpose();
  saddle.bottomLeftCorner(m, n) = qp.Wm;
  return saddle;
}

inline KktSolution extract_solution(const QpProblem& qp,
                                    const Eigen::VectorXd& sol,
                                    double condition_estimate) {
  const Eigen::Index n = qp.Dm.rows();
  const Eigen::Index m = qp.Wm.rows();
  KktSolution out;
  out.X = sol.segment(0, 2 * qp.horizon);
  out.Um = sol.segment(2 * qp.horizon, qp.horizon - 1);
  out.lambda = sol.tail(m);
  const Eigen::VectorXd z = sol.head(n);
  out.objective = 0.5 * z.dot(qp.Dm * z) + qp.Fm.dot(z);
  out.diagnostics.condition_estimate = condition_estimate;
  out.diagnostics.stationarity_residual =
      (qp.Dm * z + qp.Fm + qp.Wm.transpose() * out.lambda).norm() /
      (1.0 + qp.Fm.norm());
  out.diagnostics.feasibility_residual =
      (qp.Wm * z - qp.Zm).norm() / (1.0 + qp.Zm.norm());
  if (out.diagnostics.stationarity_residual > 1e-8 ||
      out.diagnostics.feasibility_residual > 1e-8) {
    throw IllPosedError(
        "solve_kkt: KKT residuals exceed 1e-8; the problem is numerically "
        "ill-posed (check for vanishing weights)");
  }
  return out;
}

}  // namespace detail

inline KktSolution solve_kkt(const QpProblem& qp) {
  const Eigen::MatrixXd saddle = detail::build_saddle(qp);
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(saddle);
  const double rcond = lu.rcond();
  const double cond = rcond > 0.0 ? 1.0 / rcond
                                  : std::numeric_limits<double>::infinity();
  if (!(cond < 1e12)) {
    throw IllPosedError(
        "solve_kkt: saddle-point matrix condition estimate above 1e12 "
        "(e.g. all-zero machine state and effort weights)");
  }
  Eigen::VectorXd rhs(saddle.rows());
  rhs.head(qp.Dm.rows()) = -qp.Fm;
  rhs.tail(qp.Wm.rows()) = qp.Zm;
  return detail::extract_solution(qp, lu.solve(rhs), cond);
}

// Result of one receding-horizon planning step. `command` is the applied
// (saturated) first machine command; `plan` keeps the raw horizon sequence
// for plan sharing and the human's feedforward computation.
struct MachinePlan {
  double command{0.0};
  std::vector<double> plan;
  KktSolution solution;
  bool saturated{false};
  bool gap_bound_violated{false};
};

namespace detail {

inline MachinePlan finalize_plan(KktSolution&& solution,
                                 const PlannerConfig& cfg) {
  MachinePlan out;
  out.solution = std::move(solution);
  out.plan.assign(out.solution.Um.data(),
                  out.solution.Um.data() + out.solution.Um.size());
  const double raw = out.plan.front();
  out.command = std::clamp(raw, cfg.u_min, cfg.u_max);
  out.saturated = raw < cfg.u_min || raw > cfg.u_max;
  for (Eigen::Index k = 0; 2 * k + 1 < out.solution.X.size(); ++k) {
    if (out.solution.X(2 * k + 1) < cfg.g_min) {
      out.gap_bound_violated = true;
      break;
    }
  }
  return out;
}

}  // namespace detail

inline MachinePlan plan(const VehicleState& x0,
                        const std::vector<double>& predecessor_forecast,
                        const PlannerConfig& cfg,
                        const ReferenceTrajectory& refs_m,
                        const StackedHumanLaw& stacked) {
  return detail::finalize_plan(
      solve_kkt(assemble_qp(x0, predecessor_forecast, stacked, cfg, refs_m)),
      cfg);
}

enum class PredecessorKind { HumanDriven, Connected };

// Acceleration preview for the predecessor over the next K-1 steps. A
// connected predecessor supplies its previously published command plan,
// consumed shifted by one step and zero-padded; a human-driven one gets its
// observed acceleration held for the configured time and then ramped
// linearly to zero at the end of the horizon.
inline std::vector<double> forecast_predecessor(
    PredecessorKind kind, double observed_accel,
    const std::vector<double>& shared_plan, const PlannerConfig& cfg) {
  const std::size_t steps = static_cast<std::size_t>(cfg.horizon) - 1;
  std::vector<double> forecast(steps, 0.0);
  if (kind == PredecessorKind::Connected) {
    for (std::size_t j = 0; j + 1 < shared_plan.size() && j < steps; ++j) {
      forecast[j] = shared_plan[j + 1];
    }
    return forecast;
  }
  const std::size_t hold =
      std::min(steps, static_cast<std::size_t>(
                          std::llround(cfg.hv_forecast_hold / cfg.dt)));
  for (std::size_t j = 0; j < hold; ++j) forecast[j] = observed_accel;
  const std::size_t ramp = steps - hold;
  for (std::size_t i = 0; i < ramp; ++i) {
    forecast[hold + i] =
        observed_accel * (1.0 - static_cast<double>(i + 1) / ramp);
  }
  return forecast;
}

// Receding-horizon wrapper holding the per-vehicle solver state. The gain
// sequence, stacked law, constraint matrix, and saddle factorization are
// rebuilt only when the authority schedule or either player's references
// change over the lookahead; otherwise a step costs one back-substitution.
class Planner {
 public:
  Planner(const PlannerConfig& cfg, CostWeights human_weights)
      : cfg_(cfg), human_weights_(human_weights), dyn_(discretize(cfg.dt)) {
    cfg_.validate();
    human_weights_.validate();
  }

  const PlannerConfig& config() const { return cfg_; }
  const DiscreteDynamics& dynamics() const { return dyn_; }
  const GainSequence& gains() const { return cache_->gains; }
  const StackedHumanLaw& law() const { return cache_->law; }
  const std::vector<CostWeights>& human_weights_effective() const {
    return cache_->human_weights_eff;
  }

  MachinePlan plan_step(const VehicleState& x0,
                        const std::vector<AuthorityPair>& auth_seq,
                        const ReferenceTrajectory& human_refs,
                        const ReferenceTrajectory& machine_refs,
                        const std::vector<double>& ap_forecast) {
    refresh_cache(auth_seq, human_refs, machine_refs);
    Cache& c = *cache_;

    c.qp.Zm = assemble_constraint_rhs(c.law, c.plant, x0, ap_forecast, cfg_.dt);
    Eigen::VectorXd rhs(c.saddle_dim);
    rhs.head(c.qp.Dm.rows()) = -c.qp.Fm;
    rhs.tail(c.qp.Wm.rows()) = c.qp.Zm;
    return detail::finalize_plan(
        detail::extract_solution(c.qp, c.lu.solve(rhs), c.cond), cfg_);
  }

 private:
  struct Cache {
    std::vector<double> alphas;
    ReferenceTrajectory human_refs;
    ReferenceTrajectory machine_refs;
    GainSequence gains;
    std::vector<CostWeights> human_weights_eff;
    StackedHumanLaw law;
    StackedPlant plant;
    QpProblem qp;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu;
    double cond{0.0};
    Eigen::Index saddle_dim{0};
  };

  static bool refs_equal(const ReferenceTrajectory& a,
                         const ReferenceTrajectory& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t k = 0; k < a.size(); ++k) {
      if (a[k].dv_active != b[k].dv_active || a[k].g_active != b[k].g_active ||
          a[k].dv_value() != b[k].dv_value() ||
          a[k].g_value() != b[k].g_value()) {
        return false;
      }
    }
    return true;
  }

  void refresh_cache(const std::vector<AuthorityPair>& auth_seq,
                     const ReferenceTrajectory& human_refs,
                     const ReferenceTrajectory& machine_refs) {
    std::vector<double> alphas(auth_seq.size());
    for (std::size_t k = 0; k < auth_seq.size(); ++k) {
      alphas[k] = auth_seq[k].human();
    }
    if (cache_ && cache_->alphas == alphas &&
        refs_equal(cache_->human_refs, human_refs) &&
        refs_equal(cache_->machine_refs, machine_refs)) {
      return;
    }

    auto cache = std::make_unique<Cache>();
    cache->alphas = std::move(alphas);
    cache->human_refs = human_refs;
    cache->machine_refs = machine_refs;
    cache->human_weights_eff = effective_weights(
        std::vector<CostWeights>(cfg_.horizon, human_weights_), human_refs);
    cache->gains =
        compute_gains(dyn_, auth_seq, cache->human_weights_eff, cfg_.horizon);
    cache->law = assemble_stacked_human_law(
        cache->gains, cache->human_weights_eff, human_refs, dyn_, auth_seq);
    cache->plant = build_stacked_plant(cache->law);
    cache->qp = assemble_qp(VehicleState{},
                            std::vector<double>(cfg_.horizon - 1, 0.0),
                            cache->law, cfg_, machine_refs);
    const Eigen::MatrixXd saddle = detail::build_saddle(cache->qp);
    cache->saddle_dim = saddle.rows();
    cache->lu.compute(saddle);
    const double rcond = cache->lu.rcond();
    cache->cond = rcond > 0.0 ? 1.0 / rcond
                              : std::numeric_limits<double>::infinity();
    if (!(cache->cond < 1e12)) {
      throw IllPosedError(
          "plan_step: saddle-point matrix condition estimate above 1e12 "
          "(e.g. all-zero machine state and effort weights)");
    }
    cache_ = std::move(cache);
  }

  PlannerConfig cfg_;
  CostWeights human_weights_;
  DiscreteDynamics dyn_;
  std::unique_ptr<Cache> cache_;
};

}  // namespace cacc

#endif  // CACC_MACHINE_CONTROLLER_HPP_
