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

#include "cacc/machine_controller.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <catch2/catch_amalgamated.hpp>

#include "cacc/dynamics.hpp"
#include "cacc/human_model.hpp"
#include "cacc/stacked_ops.hpp"

using Catch::Matchers::WithinAbs;

namespace {

cacc::PlannerConfig short_config() {
  cacc::PlannerConfig cfg;
  cfg.horizon = 10;
  return cfg;
}

struct PlanningFixture {
  cacc::PlannerConfig cfg;
  cacc::CostWeights human_weights{0.0, 1.0, 3.0};
  std::vector<cacc::AuthorityPair> auth_seq;
  cacc::ReferenceTrajectory human_refs;
  cacc::ReferenceTrajectory machine_refs;
  std::vector<double> forecast;
};

PlanningFixture make_fixture(double alpha_h, double g_ref) {
  PlanningFixture f;
  f.cfg = short_config();
  f.auth_seq.assign(f.cfg.horizon - 1, cacc::AuthorityPair(alpha_h));
  f.human_refs.assign(f.cfg.horizon, cacc::RefPoint{0.0, g_ref, false, true});
  f.machine_refs.assign(f.cfg.horizon, cacc::RefPoint{0.0, 0.0, true, false});
  f.forecast.assign(f.cfg.horizon - 1, 0.0);
  return f;
}

}  // namespace

TEST_CASE("planner config validation catches bad entries",
          "[machine_controller]") {
  CHECK_NOTHROW(cacc::PlannerConfig{}.validate());

  cacc::PlannerConfig cfg;
  cfg.horizon = 1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

  cfg = {};
  cfg.weights.q_v = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

  cfg = {};
  cfg.u_min = 3.0;
  cfg.u_max = -6.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

  cfg = {};
  cfg.replan_period = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

  cfg = {};
  cfg.hv_forecast_hold = -0.1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("saddle solve recovers a textbook equality QP",
          "[machine_controller]") {
  // minimize 0.5 ||z||^2 subject to z0 + z1 = 2 -> z = (1,1), multiplier -1.
  cacc::QpProblem qp;
  qp.horizon = 1;
  qp.Dm = Eigen::MatrixXd::Identity(2, 2);
  qp.Fm = Eigen::VectorXd::Zero(2);
  qp.Wm = Eigen::MatrixXd::Ones(1, 2);
  qp.Zm = Eigen::VectorXd::Constant(1, 2.0);

  const cacc::KktSolution sol = cacc::solve_kkt(qp);
  REQUIRE(sol.X.size() == 2);
  REQUIRE(sol.Um.size() == 0);
  REQUIRE(sol.lambda.size() == 1);
  CHECK_THAT(sol.X(0), WithinAbs(1.0, 1e-12));
  CHECK_THAT(sol.X(1), WithinAbs(1.0, 1e-12));
  CHECK_THAT(sol.lambda(0), WithinAbs(-1.0, 1e-12));
  CHECK_THAT(sol.objective, WithinAbs(1.0, 1e-12));
  CHECK(sol.diagnostics.stationarity_residual <= 1e-12);
  CHECK(sol.diagnostics.feasibility_residual <= 1e-12);
  CHECK(std::isfinite(sol.diagnostics.condition_estimate));
}

TEST_CASE("singular saddle systems raise the ill-posed error",
          "[machine_controller]") {
  cacc::QpProblem qp;
  qp.horizon = 1;
  qp.Dm = Eigen::MatrixXd::Zero(2, 2);
  qp.Fm = Eigen::VectorXd::Zero(2);
  qp.Wm = Eigen::MatrixXd::Zero(1, 2);
  qp.Zm = Eigen::VectorXd::Zero(1);
  CHECK_THROWS_AS(cacc::solve_kkt(qp), cacc::IllPosedError);
}

TEST_CASE("planning from equilibrium commands nothing",
          "[machine_controller]") {
  auto f = make_fixture(0.5, 17.0);
  cacc::Planner planner(f.cfg, f.human_weights);
  const cacc::MachinePlan plan = planner.plan_step(
      cacc::VehicleState{0.0, 17.0}, f.auth_seq, f.human_refs, f.machine_refs,
      f.forecast);
  CHECK_THAT(plan.command, WithinAbs(0.0, 1e-9));
  CHECK_FALSE(plan.saturated);
  CHECK_FALSE(plan.gap_bound_violated);
  for (double u : plan.plan) CHECK_THAT(u, WithinAbs(0.0, 1e-9));
}

TEST_CASE("closing speed difference triggers braking that decays",
          "[machine_controller]") {
  auto f = make_fixture(0.5, 30.0);
  cacc::Planner planner(f.cfg, f.human_weights);
  const cacc::MachinePlan plan = planner.plan_step(
      cacc::VehicleState{-2.0, 30.0}, f.auth_seq, f.human_refs, f.machine_refs,
      f.forecast);
  CHECK(plan.command < 0.0);
  // The planned speed difference recovers toward zero without overshoot.
  double prev = plan.solution.X(0);
  CHECK_THAT(prev, WithinAbs(-2.0, 1e-12));
  for (int k = 1; k < f.cfg.horizon; ++k) {
    const double dv = plan.solution.X(2 * k);
    CHECK(dv >= prev - 1e-9);
    CHECK(dv <= 1e-6);
    prev = dv;
  }
  // Deterministic terminal value under the default weighting.
  CHECK_THAT(plan.solution.X(2 * (f.cfg.horizon - 1)),
             WithinAbs(-1.8795910320255167, 1e-9));
}

TEST_CASE("first command saturates against the configured bounds",
          "[machine_controller]") {
  auto f = make_fixture(0.2, 30.0);
  f.cfg.u_min = -1.0;
  f.cfg.u_max = 1.0;
  cacc::Planner planner(f.cfg, f.human_weights);
  const cacc::MachinePlan plan = planner.plan_step(
      cacc::VehicleState{-5.0, 30.0}, f.auth_seq, f.human_refs, f.machine_refs,
      f.forecast);
  CHECK(plan.saturated);
  CHECK(plan.command == -1.0);
  CHECK(plan.plan.front() < -1.0);  // the raw plan keeps the unclipped value
}

TEST_CASE("planned gap dipping under the bound sets the flag",
          "[machine_controller]") {
  auto f = make_fixture(0.5, 1.5);
  cacc::Planner planner(f.cfg, f.human_weights);
  const cacc::MachinePlan plan = planner.plan_step(
      cacc::VehicleState{-3.0, 1.5}, f.auth_seq, f.human_refs, f.machine_refs,
      f.forecast);
  CHECK(plan.gap_bound_violated);
}

TEST_CASE("connected predecessor forecast consumes the shared plan shifted",
          "[machine_controller]") {
  cacc::PlannerConfig cfg;
  cfg.horizon = 4;
  const auto fc = cacc::forecast_predecessor(cacc::PredecessorKind::Connected,
                                             9.9, {1.0, 2.0, 3.0}, cfg);
  REQUIRE(fc.size() == 3);
  CHECK(fc[0] == 2.0);
  CHECK(fc[1] == 3.0);
  CHECK(fc[2] == 0.0);

  const auto empty = cacc::forecast_predecessor(
      cacc::PredecessorKind::Connected, 9.9, {}, cfg);
  for (double v : empty) CHECK(v == 0.0);
}

TEST_CASE("human-driven forecast holds then ramps the observed acceleration",
          "[machine_controller]") {
  cacc::PlannerConfig cfg;
  cfg.horizon = 11;
  cfg.hv_forecast_hold = 0.5;
  const auto fc = cacc::forecast_predecessor(cacc::PredecessorKind::HumanDriven,
                                             -4.0, {}, cfg);
  REQUIRE(fc.size() == 10);
  for (int j = 0; j < 5; ++j) CHECK(fc[j] == -4.0);
  CHECK_THAT(fc[5], WithinAbs(-3.2, 1e-12));
  CHECK_THAT(fc[6], WithinAbs(-2.4, 1e-12));
  CHECK_THAT(fc[7], WithinAbs(-1.6, 1e-12));
  CHECK_THAT(fc[8], WithinAbs(-0.8, 1e-12));
  CHECK_THAT(fc[9], WithinAbs(0.0, 1e-12));
}

TEST_CASE("human-driven forecast without hold ramps immediately",
          "[machine_controller]") {
  cacc::PlannerConfig cfg;
  cfg.horizon = 6;
  const auto fc = cacc::forecast_predecessor(cacc::PredecessorKind::HumanDriven,
                                             -4.0, {}, cfg);
  REQUIRE(fc.size() == 5);
  CHECK_THAT(fc[0], WithinAbs(-3.2, 1e-12));
  CHECK_THAT(fc[1], WithinAbs(-2.4, 1e-12));
  CHECK_THAT(fc[2], WithinAbs(-1.6, 1e-12));
  CHECK_THAT(fc[3], WithinAbs(-0.8, 1e-12));
  CHECK_THAT(fc[4], WithinAbs(0.0, 1e-12));
}

TEST_CASE("receding-horizon wrapper reuses its factorization and matches the "
          "one-shot path",
          "[machine_controller]") {
  auto f = make_fixture(0.4, 20.0);
  cacc::Planner planner(f.cfg, f.human_weights);
  const cacc::VehicleState x0{-1.0, 20.5};

  const cacc::MachinePlan first = planner.plan_step(
      x0, f.auth_seq, f.human_refs, f.machine_refs, f.forecast);
  const cacc::MachinePlan second = planner.plan_step(
      x0, f.auth_seq, f.human_refs, f.machine_refs, f.forecast);
  CHECK(first.command == second.command);

  const cacc::DiscreteDynamics dyn = cacc::discretize(f.cfg.dt);
  const auto eff = cacc::effective_weights(
      std::vector<cacc::CostWeights>(f.cfg.horizon, f.human_weights),
      f.human_refs);
  const auto gains = cacc::compute_gains(dyn, f.auth_seq, eff, f.cfg.horizon);
  const auto law = cacc::assemble_stacked_human_law(gains, eff, f.human_refs,
                                                    dyn, f.auth_seq);
  const cacc::MachinePlan direct =
      cacc::plan(x0, f.forecast, f.cfg, f.machine_refs, law);
  CHECK_THAT(first.command, WithinAbs(direct.command, 1e-10));

  // A different authority split must reroute through fresh gains.
  std::vector<cacc::AuthorityPair> other(f.cfg.horizon - 1,
                                         cacc::AuthorityPair(0.9));
  const cacc::MachinePlan third =
      planner.plan_step(x0, other, f.human_refs, f.machine_refs, f.forecast);
  CHECK(third.command != first.command);
}

TEST_CASE("plan rejects forecasts of the wrong length", "[machine_controller]") {
  auto f = make_fixture(0.5, 20.0);
  const cacc::DiscreteDynamics dyn = cacc::discretize(f.cfg.dt);
  const auto eff = cacc::effective_weights(
      std::vector<cacc::CostWeights>(f.cfg.horizon, f.human_weights),
      f.human_refs);
  const auto gains = cacc::compute_gains(dyn, f.auth_seq, eff, f.cfg.horizon);
  const auto law = cacc::assemble_stacked_human_law(gains, eff, f.human_refs,
                                                    dyn, f.auth_seq);
  CHECK_THROWS_AS(cacc::plan(cacc::VehicleState{0, 20}, {0.0, 0.0}, f.cfg,
                             f.machine_refs, law),
                  std::invalid_argument);
}
