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

#ifndef CACC_VALIDATION_HPP_
#define CACC_VALIDATION_HPP_

// Randomized cross-checks of the closed-form human reaction, the stacked
// human law, and the machine's KKT planner against the brute-force oracles.
// Each suite draws a family of small instances from a seeded generator so a
// failure can be reproduced from the printed instance description.

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cacc/dynamics.hpp"
#include "cacc/fusion.hpp"
#include "cacc/human_model.hpp"
#include "cacc/machine_controller.hpp"
#include "cacc/oracle.hpp"
#include "cacc/stacked_ops.hpp"

namespace cacc {

struct ValidationInstance {
  std::uint64_t base_seed{0};
  int index{0};
  DiscreteDynamics dyn;
  int horizon{2};
  std::vector<AuthorityPair> auths;
  std::vector<CostWeights> human_weights;  // raw, per step; mask before use
  ReferenceTrajectory human_refs;
  VehicleState x0;
  std::vector<double> u_m;
  std::vector<double> ap;
  CostWeights machine_weights{1.0, 0.0, 1.0};
  ReferenceTrajectory machine_refs;

  std::string describe() const {
    std::ostringstream os;
    os << "instance " << index << " (base seed " << base_seed << "): K="
       << horizon << " dt=" << dyn.dt << " alpha_h=[";
    for (std::size_t k = 0; k < auths.size(); ++k) {
      os << (k ? "," : "") << auths[k].human();
    }
    os << "] x0=(" << x0.dv << "," << x0.g << ")";
    return os.str();
  }
};

namespace detail {

// Whether the machine keeps any authority anywhere on the horizon. With
// alpha_h pinned at 1 everywhere the machine's command column vanishes and
// its quadratic loses identifiability, so those draws are resampled for the
// machine-side suites.
inline bool machine_has_authority(const std::vector<AuthorityPair>& auths) {
  for (const auto& a : auths) {
    if (a.machine() > 1e-3) return true;
  }
  return false;
}

}  // namespace detail

// Deterministic per-instance generator. The Stackelberg (machine-side)
// family allows alpha_h = 0 and randomizes the machine cost; the human-only
// family keeps the human's share strictly positive.
inline ValidationInstance make_validation_instance(std::uint64_t base_seed,
                                                   int index,
                                                   bool machine_side) {
  std::mt19937_64 rng(base_seed + 1000003ULL * static_cast<std::uint64_t>(index));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) {
    return lo + (hi - lo) * unit(rng);
  };

  ValidationInstance inst;
  inst.base_seed = base_seed;
  inst.index = index;
  inst.horizon = 2 + static_cast<int>(rng() % 7);  // K in [2, 8]
  const double dts[3] = {0.05, 0.1, 0.2};
  inst.dyn = discretize(dts[rng() % 3]);
  const int steps = inst.horizon - 1;

  inst.human_weights.resize(inst.horizon);
  inst.human_refs.resize(inst.horizon);
  for (int k = 0; k < inst.horizon; ++k) {
    inst.human_weights[k] = CostWeights{uniform(0.0, 5.0), uniform(0.0, 5.0),
                                        uniform(0.1, 10.0)};
    inst.human_refs[k] = RefPoint{uniform(-5.0, 5.0), uniform(0.0, 20.0),
                                  unit(rng) < 0.5, unit(rng) < 0.7};
  }

  do {
    inst.auths.clear();
    for (int k = 0; k < steps; ++k) {
      const double lo = machine_side ? 0.0 : 0.01;
      inst.auths.push_back(AuthorityPair(uniform(lo, 1.0)));
    }
  } while (machine_side && !detail::machine_has_authority(inst.auths));

  inst.x0 = VehicleState{uniform(-5.0, 5.0), uniform(0.0, 20.0)};
  inst.u_m.resize(steps);
  inst.ap.resize(steps);
  for (int k = 0; k < steps; ++k) {
    inst.u_m[k] = uniform(-3.0, 3.0);
    inst.ap[k] = uniform(-4.0, 4.0);
  }

  inst.machine_weights =
      CostWeights{uniform(0.1, 5.0), uniform(0.0, 2.0), uniform(0.1, 10.0)};
  inst.machine_refs.resize(inst.horizon);
  for (int k = 0; k < inst.horizon; ++k) {
    inst.machine_refs[k] =
        RefPoint{uniform(-5.0, 5.0), uniform(0.0, 20.0), true, unit(rng) < 0.3};
  }
  return inst;
}

struct SuiteResult {
  std::string name;
  double tolerance{0.0};
  double worst{0.0};
  int instances{0};
  bool pass{true};
  std::string worst_instance;

  SuiteResult() = default;
  SuiteResult(std::string suite_name, double tol)
      : name(std::move(suite_name)), tolerance(tol) {}

  void record(double value, const ValidationInstance& inst) {
    ++instances;
    if (value > worst) {
      worst = value;
      worst_instance = inst.describe();
    }
    if (value > tolerance) pass = false;
  }
};

namespace detail {

// Rolls the human-only plant (no predecessor term) under explicit human
// controls and returns the tracking cost.
inline double human_cost_of(const ValidationInstance& inst,
                            const std::vector<CostWeights>& eff,
                            const Eigen::VectorXd& u_h) {
  const int steps = inst.horizon - 1;
  std::vector<VehicleState> states(inst.horizon);
  std::vector<double> controls(steps);
  states[0] = inst.x0;
  for (int k = 0; k < steps; ++k) {
    controls[k] = u_h(k);
    states[k + 1] =
        step(inst.dyn, states[k], u_h(k), inst.u_m[k], inst.auths[k], 0.0);
  }
  return tracking_objective(eff, inst.human_refs, states, controls);
}

// Rolls the coupled plant (human reacting by its closed form, predecessor
// acceleration driving the gap) under a machine plan; returns stacked states
// and the machine's tracking cost.
inline std::pair<Eigen::VectorXd, double> machine_cost_of(
    const ValidationInstance& inst, const GainSequence& gains,
    const std::vector<CostWeights>& eff_h,
    const std::vector<CostWeights>& eff_m, const std::vector<double>& um) {
  const int steps = inst.horizon - 1;
  const FeedforwardSequence ff =
      compute_feedforward(gains, eff_h, inst.human_refs, um);
  std::vector<VehicleState> states(inst.horizon);
  std::vector<double> controls(steps);
  states[0] = inst.x0;
  for (int k = 0; k < steps; ++k) {
    const double uh = human_reaction(gains, ff, k, states[k], um[k]);
    controls[k] = um[k];
    states[k + 1] =
        step(inst.dyn, states[k], uh, um[k], inst.auths[k], inst.ap[k]);
  }
  const double cost =
      tracking_objective(eff_m, inst.machine_refs, states, controls);
  return {stack_states(states), cost};
}

inline PlannerConfig planner_config_for(const ValidationInstance& inst) {
  PlannerConfig cfg;
  cfg.horizon = inst.horizon;
  cfg.dt = inst.dyn.dt;
  cfg.weights = inst.machine_weights;
  cfg.u_min = -1e9;  // saturation out of the way for pure solver checks
  cfg.u_max = 1e9;
  cfg.g_min = -1e9;
  return cfg;
}

}  // namespace detail

// Closed-form human reaction vs the dense QP oracle, plus gradient, cost
// curvature, and cost value checks. `gain_perturbation` is a negative-control
// hook: a nonzero value corrupts the first feedback gain and must make the
// suite fail.
inline std::vector<SuiteResult> run_human_reaction_checks(
    std::uint64_t seed, int count, double gain_perturbation = 0.0) {
  SuiteResult match{"human-reaction-vs-qp-oracle", 1e-8};
  SuiteResult gradient{"human-optimum-gradient", 1e-5};
  SuiteResult curvature{"human-cost-curvature-psd", 1e-12};
  SuiteResult value{"human-cost-value-match", 1e-8};

  for (int i = 0; i < count; ++i) {
    const ValidationInstance inst = make_validation_instance(seed, i, false);
    const int steps = inst.horizon - 1;
    const std::vector<CostWeights> eff =
        effective_weights(inst.human_weights, inst.human_refs);

    GainSequence gains =
        compute_gains(inst.dyn, inst.auths, eff, inst.horizon);
    if (gain_perturbation != 0.0) {
      gains.K[0](0) += gain_perturbation;
    }
    const FeedforwardSequence ff =
        compute_feedforward(gains, eff, inst.human_refs, inst.u_m);
    const std::vector<VehicleState> states =
        simulate_human_closed_loop(inst.dyn, gains, ff, inst.x0, inst.u_m);
    Eigen::VectorXd u_ours(steps);
    for (int k = 0; k < steps; ++k) {
      u_ours(k) = human_reaction(gains, ff, k, states[k], inst.u_m[k]);
    }

    const DenseQp qp = build_human_qp(inst.dyn, inst.auths, eff,
                                      inst.human_refs, inst.x0, inst.u_m);
    const DenseQpSolution oracle = solve_dense_qp(qp);

    const double scale = 1.0 + oracle.z.lpNorm<Eigen::Infinity>();
    match.record((u_ours - oracle.z).lpNorm<Eigen::Infinity>() / scale, inst);

    const auto cost = [&](const Eigen::VectorXd& u) {
      return detail::human_cost_of(inst, eff, u);
    };
    gradient.record(finite_difference_gradient(cost, u_ours).norm(), inst);

    double worst_eig = 0.0;
    for (const auto& d : gains.D) {
      const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(d);
      const double floor_scale = 1.0 + d.norm();
      worst_eig = std::max(worst_eig,
                           std::max(0.0, -es.eigenvalues().minCoeff()) /
                               floor_scale);
    }
    curvature.record(worst_eig, inst);

    const double j_ours = cost(u_ours);
    const double j_oracle = cost(oracle.z);
    value.record(std::abs(j_ours - j_oracle) / (1.0 + std::abs(j_oracle)),
                 inst);
  }
  return {match, gradient, curvature, value};
}

// The one-shot stacked human law vs the per-step reaction path, on both the
// consistent coupled trajectory and an arbitrary state stack.
inline std::vector<SuiteResult> run_stacked_law_checks(std::uint64_t seed,
                                                       int count) {
  SuiteResult equiv{"stacked-human-law-equivalence", 1e-9};

  for (int i = 0; i < count; ++i) {
    const ValidationInstance inst = make_validation_instance(seed, i, false);
    const int steps = inst.horizon - 1;
    const std::vector<CostWeights> eff =
        effective_weights(inst.human_weights, inst.human_refs);
    const GainSequence gains =
        compute_gains(inst.dyn, inst.auths, eff, inst.horizon);
    const StackedHumanLaw law = assemble_stacked_human_law(
        gains, eff, inst.human_refs, inst.dyn, inst.auths);
    const FeedforwardSequence ff =
        compute_feedforward(gains, eff, inst.human_refs, inst.u_m);
    const Eigen::VectorXd um =
        Eigen::Map<const Eigen::VectorXd>(inst.u_m.data(), steps);

    // Consistent trajectory: roll the coupled plant with the predecessor
    // term active so the law is exercised off the human-only manifold too.
    std::vector<VehicleState> states(inst.horizon);
    states[0] = inst.x0;
    for (int k = 0; k < steps; ++k) {
      const double uh = human_reaction(gains, ff, k, states[k], inst.u_m[k]);
      states[k + 1] = step(inst.dyn, states[k], uh, inst.u_m[k],
                           inst.auths[k], inst.ap[k]);
    }
    Eigen::VectorXd per_step(steps);
    for (int k = 0; k < steps; ++k) {
      per_step(k) = human_reaction(gains, ff, k, states[k], inst.u_m[k]);
    }
    equiv.record((law.human_controls(stack_states(states), um) - per_step)
                     .lpNorm<Eigen::Infinity>(),
                 inst);

    // Arbitrary stack: the law is affine in (X, U_m) and must agree with the
    // per-step evaluation at any state values, consistent or not.
    std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ULL + i));
    std::uniform_real_distribution<double> span(-10.0, 10.0);
    Eigen::VectorXd x_random(2 * inst.horizon);
    for (Eigen::Index j = 0; j < x_random.size(); ++j) {
      x_random(j) = span(rng);
    }
    Eigen::VectorXd per_step_random(steps);
    for (int k = 0; k < steps; ++k) {
      const VehicleState xk{x_random(2 * k), x_random(2 * k + 1)};
      per_step_random(k) = human_reaction(gains, ff, k, xk, inst.u_m[k]);
    }
    equiv.record((law.human_controls(x_random, um) - per_step_random)
                     .lpNorm<Eigen::Infinity>(),
                 inst);
  }
  return {equiv};
}

// Machine-side planner vs the perturbation-rollout oracle: KKT residuals,
// objective agreement, and consistency of the planned states with a forward
// simulation of the coupled plant under the planned commands.
inline std::vector<SuiteResult> run_machine_planner_checks(std::uint64_t seed,
                                                           int count) {
  SuiteResult residuals{"machine-kkt-residuals", 1e-8};
  SuiteResult objective{"machine-objective-vs-oracle", 1e-6};
  SuiteResult forward{"machine-forward-consistency", 1e-8};

  for (int i = 0; i < count; ++i) {
    const ValidationInstance inst = make_validation_instance(seed, i, true);
    const int steps = inst.horizon - 1;
    const std::vector<CostWeights> eff_h =
        effective_weights(inst.human_weights, inst.human_refs);
    const std::vector<CostWeights> eff_m = effective_weights(
        std::vector<CostWeights>(inst.horizon, inst.machine_weights),
        inst.machine_refs);
    const GainSequence gains =
        compute_gains(inst.dyn, inst.auths, eff_h, inst.horizon);
    const StackedHumanLaw law = assemble_stacked_human_law(
        gains, eff_h, inst.human_refs, inst.dyn, inst.auths);
    const PlannerConfig cfg = detail::planner_config_for(inst);

    const KktSolution sol =
        solve_kkt(assemble_qp(inst.x0, inst.ap, law, cfg, inst.machine_refs));
    residuals.record(std::max(sol.diagnostics.stationarity_residual,
                              sol.diagnostics.feasibility_residual),
                     inst);

    const AffineTrajectoryMap map = coupled_trajectory_map(
        inst.dyn, gains, eff_h, inst.human_refs, inst.x0, inst.ap);
    const DenseQp oracle_qp =
        build_machine_qp(map, eff_m, inst.machine_refs);
    const DenseQpSolution oracle = solve_dense_qp(oracle_qp);

    std::vector<double> um_ours(steps), um_oracle(steps);
    for (int k = 0; k < steps; ++k) {
      um_ours[k] = sol.Um(k);
      um_oracle[k] = oracle.z(k);
    }
    const auto [x_ours, j_ours] =
        detail::machine_cost_of(inst, gains, eff_h, eff_m, um_ours);
    const auto [x_oracle, j_oracle] =
        detail::machine_cost_of(inst, gains, eff_h, eff_m, um_oracle);
    objective.record(std::abs(j_ours - j_oracle) / (1.0 + std::abs(j_oracle)),
                     inst);
    forward.record((x_ours - sol.X).lpNorm<Eigen::Infinity>() /
                       (1.0 + x_ours.lpNorm<Eigen::Infinity>()),
                   inst);
  }
  return {residuals, objective, forward};
}

// At the planner's output, random command perturbations (with the human
// response re-derived each time) must not lower the machine's cost.
inline std::vector<SuiteResult> run_leader_optimality_checks(
    std::uint64_t seed, int count, int perturbations_per_instance = 5,
    double scale = 1e-2) {
  SuiteResult opt{"machine-local-optimality", 1e-9};

  for (int i = 0; i < count; ++i) {
    const ValidationInstance inst = make_validation_instance(seed, i, true);
    const int steps = inst.horizon - 1;
    const std::vector<CostWeights> eff_h =
        effective_weights(inst.human_weights, inst.human_refs);
    const std::vector<CostWeights> eff_m = effective_weights(
        std::vector<CostWeights>(inst.horizon, inst.machine_weights),
        inst.machine_refs);
    const GainSequence gains =
        compute_gains(inst.dyn, inst.auths, eff_h, inst.horizon);
    const StackedHumanLaw law = assemble_stacked_human_law(
        gains, eff_h, inst.human_refs, inst.dyn, inst.auths);
    const KktSolution sol = solve_kkt(assemble_qp(
        inst.x0, inst.ap, law, detail::planner_config_for(inst),
        inst.machine_refs));

    std::vector<double> um_opt(steps);
    for (int k = 0; k < steps; ++k) um_opt[k] = sol.Um(k);
    const double j_opt =
        detail::machine_cost_of(inst, gains, eff_h, eff_m, um_opt).second;

    std::mt19937_64 rng(seed ^ (0xda942042e4dd58b5ULL + i));
    std::normal_distribution<double> gauss(0.0, 1.0);
    double worst_drop = 0.0;
    for (int p = 0; p < perturbations_per_instance; ++p) {
      std::vector<double> um = um_opt;
      for (int k = 0; k < steps; ++k) um[k] += scale * gauss(rng);
      const double j =
          detail::machine_cost_of(inst, gains, eff_h, eff_m, um).second;
      worst_drop = std::max(worst_drop, j_opt - j);
    }
    opt.record(worst_drop, inst);
  }
  return {opt};
}

// Authority-extreme reductions: with no human share the planner must match a
// machine-only receding-horizon solve; with full human share and no machine
// state cost the fused command must collapse to the pure human law.
inline std::vector<SuiteResult> run_degenerate_authority_checks(
    std::uint64_t seed, int count) {
  SuiteResult machine_only{"authority-zero-machine-only", 1e-8};
  SuiteResult pure_human{"authority-one-pure-human", 1e-8};

  for (int i = 0; i < count; ++i) {
    ValidationInstance inst = make_validation_instance(seed, i, true);
    const int steps = inst.horizon - 1;

    // All-machine: nothing of the human's reaction can enter the loop.
    for (auto& a : inst.auths) a = AuthorityPair(0.0);
    const std::vector<CostWeights> eff_h =
        effective_weights(inst.human_weights, inst.human_refs);
    const std::vector<CostWeights> eff_m = effective_weights(
        std::vector<CostWeights>(inst.horizon, inst.machine_weights),
        inst.machine_refs);
    {
      const GainSequence gains =
          compute_gains(inst.dyn, inst.auths, eff_h, inst.horizon);
      const StackedHumanLaw law = assemble_stacked_human_law(
          gains, eff_h, inst.human_refs, inst.dyn, inst.auths);
      const KktSolution sol = solve_kkt(assemble_qp(
          inst.x0, inst.ap, law, detail::planner_config_for(inst),
          inst.machine_refs));

      // Independent machine-only solve from the plain rollout map.
      const RolloutMap map =
          build_rollout_map(inst.dyn, inst.auths, inst.horizon);
      const Eigen::VectorXd ap =
          Eigen::Map<const Eigen::VectorXd>(inst.ap.data(), steps);
      const Eigen::VectorXd x_free = map.Phi * inst.x0.vec() + map.Tp * ap;
      const Eigen::MatrixXd qbar =
          stacked_state_weight(eff_m, inst.horizon);
      Eigen::MatrixXd rbar = Eigen::MatrixXd::Zero(steps, steps);
      for (int k = 0; k < steps; ++k) rbar(k, k) = eff_m[k].r;
      const DenseQp mpc(map.Tm.transpose() * qbar * map.Tm + rbar,
                        map.Tm.transpose() * qbar *
                            (x_free - stacked_reference(inst.machine_refs)),
                        Eigen::MatrixXd(0, steps), Eigen::VectorXd(0));
      const DenseQpSolution ref = solve_dense_qp(mpc);
      const double scale = 1.0 + ref.z.lpNorm<Eigen::Infinity>();
      machine_only.record((sol.Um - ref.z).lpNorm<Eigen::Infinity>() / scale,
                          inst);
    }

    // All-human with no machine tracking cost: the machine plans zero effort
    // and the fused command is exactly the human's.
    for (auto& a : inst.auths) a = AuthorityPair(1.0);
    {
      const GainSequence gains =
          compute_gains(inst.dyn, inst.auths, eff_h, inst.horizon);
      const StackedHumanLaw law = assemble_stacked_human_law(
          gains, eff_h, inst.human_refs, inst.dyn, inst.auths);
      PlannerConfig cfg = detail::planner_config_for(inst);
      cfg.weights = CostWeights{0.0, 0.0, inst.machine_weights.r};
      const KktSolution sol = solve_kkt(
          assemble_qp(inst.x0, inst.ap, law, cfg, inst.machine_refs));

      std::vector<double> um(steps);
      for (int k = 0; k < steps; ++k) um[k] = sol.Um(k);
      const FeedforwardSequence ff =
          compute_feedforward(gains, eff_h, inst.human_refs, um);
      const FeedforwardSequence ff_pure = compute_feedforward(
          gains, eff_h, inst.human_refs, std::vector<double>(steps, 0.0));

      double worst = sol.Um.lpNorm<Eigen::Infinity>();
      VehicleState x = inst.x0;
      for (int k = 0; k < steps; ++k) {
        const double uh = human_reaction(gains, ff, k, x, um[k]);
        const double fused = fuse(uh, um[k], inst.auths[k]);
        const double pure = human_reaction(gains, ff_pure, k, x, 0.0);
        worst = std::max(worst, std::abs(fused - pure));
        x = step(inst.dyn, x, uh, um[k], inst.auths[k], inst.ap[k]);
      }
      pure_human.record(worst, inst);
    }
  }
  return {machine_only, pure_human};
}

struct ValidationOptions {
  std::uint64_t seed{20260815};
  int human_instances{200};
  int stacked_instances{200};
  int machine_instances{200};
  int optimality_instances{50};
  int degenerate_instances{50};
  double gain_perturbation{0.0};  // negative-control hook
};

inline std::vector<SuiteResult> run_validation(const ValidationOptions& opt,
                                               const std::string& suite = "all") {
  std::vector<SuiteResult> results;
  const auto want = [&](const char* name) {
    return suite == "all" || suite == name;
  };
  const auto append = [&](std::vector<SuiteResult> rows) {
    for (auto& r : rows) results.push_back(std::move(r));
  };
  if (want("human")) {
    append(run_human_reaction_checks(opt.seed, opt.human_instances,
                                     opt.gain_perturbation));
  }
  if (want("stacked")) {
    append(run_stacked_law_checks(opt.seed, opt.stacked_instances));
  }
  if (want("machine")) {
    append(run_machine_planner_checks(opt.seed, opt.machine_instances));
  }
  if (want("optimality")) {
    append(run_leader_optimality_checks(opt.seed, opt.optimality_instances));
  }
  if (want("degenerate")) {
    append(run_degenerate_authority_checks(opt.seed, opt.degenerate_instances));
  }
  if (results.empty()) {
    throw std::invalid_argument(
        "run_validation: unknown suite '" + suite +
        "' (expected all, human, stacked, machine, optimality, degenerate)");
  }
  return results;
}

}  // namespace cacc

#endif  // CACC_VALIDATION_HPP_
