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

#include "cacc/oracle.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <catch2/catch_amalgamated.hpp>

#include "cacc/dynamics.hpp"
#include "cacc/human_model.hpp"
#include "cacc/machine_controller.hpp"
#include "cacc/stacked_ops.hpp"

using Catch::Matchers::WithinAbs;

namespace {

struct Instance {
  cacc::DiscreteDynamics dyn;
  std::vector<cacc::AuthorityPair> auths;
  cacc::ReferenceTrajectory refs;
  std::vector<cacc::CostWeights> eff;
  cacc::GainSequence gains;
};

Instance make_instance(int horizon) {
  Instance inst{cacc::discretize(0.1), {}, {}, {}, {}};
  const double alphas[] = {0.3, 0.8, 0.5, 0.65, 0.2, 0.45, 0.7};
  for (int k = 0; k + 1 < horizon; ++k) inst.auths.emplace_back(alphas[k % 7]);
  inst.refs.assign(horizon, cacc::RefPoint{0.0, 12.0, false, true});
  inst.refs[1] = cacc::RefPoint{0.5, 0.0, true, false};
  inst.eff = cacc::effective_weights(
      std::vector<cacc::CostWeights>(horizon, cacc::CostWeights{0.8, 1.3, 2.2}),
      inst.refs);
  inst.gains = cacc::compute_gains(inst.dyn, inst.auths, inst.eff, horizon);
  return inst;
}

}  // namespace

TEST_CASE("dense QP solver finds the unconstrained minimum", "[oracle]") {
  cacc::DenseQp p(Eigen::MatrixXd::Constant(1, 1, 2.0),
                  Eigen::VectorXd::Constant(1, -4.0), Eigen::MatrixXd(0, 1),
                  Eigen::VectorXd(0));
  const cacc::DenseQpSolution sol = cacc::solve_dense_qp(p);
  REQUIRE(sol.z.size() == 1);
  CHECK_THAT(sol.z(0), WithinAbs(2.0, 1e-12));
  CHECK(sol.multipliers.size() == 0);
  CHECK(sol.stationarity_residual <= 1e-12);
  CHECK_THAT(p.objective(sol.z), WithinAbs(-4.0, 1e-12));
}

TEST_CASE("dense QP solver honors equality constraints", "[oracle]") {
  cacc::DenseQp p(Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2),
                  Eigen::MatrixXd::Ones(1, 2), Eigen::VectorXd::Constant(1, 2.0));
  const cacc::DenseQpSolution sol = cacc::solve_dense_qp(p);
  CHECK_THAT(sol.z(0), WithinAbs(1.0, 1e-12));
  CHECK_THAT(sol.z(1), WithinAbs(1.0, 1e-12));
  REQUIRE(sol.multipliers.size() == 1);
  CHECK_THAT(sol.multipliers(0), WithinAbs(-1.0, 1e-12));
  CHECK(sol.feasibility_residual <= 1e-12);
}

TEST_CASE("dense QP construction symmetrizes and validates", "[oracle]") {
  Eigen::MatrixXd h(2, 2);
  h << 1.0, 1.0, 0.0, 1.0;
  cacc::DenseQp p(h, Eigen::VectorXd::Zero(2), Eigen::MatrixXd(0, 2),
                  Eigen::VectorXd(0));
  CHECK(p.H(0, 1) == 0.5);
  CHECK(p.H(1, 0) == 0.5);

  CHECK_THROWS_AS(cacc::DenseQp(Eigen::MatrixXd::Identity(2, 2),
                                Eigen::VectorXd::Zero(3), Eigen::MatrixXd(0, 2),
                                Eigen::VectorXd(0)),
                  std::invalid_argument);
  CHECK_THROWS_AS(cacc::DenseQp(Eigen::MatrixXd::Identity(2, 2),
                                Eigen::VectorXd::Zero(2),
                                Eigen::MatrixXd::Ones(3, 2),
                                Eigen::VectorXd::Zero(3)),
                  std::invalid_argument);
}

TEST_CASE("singular problems are rejected instead of silently solved",
          "[oracle]") {
  cacc::DenseQp p(Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Constant(1, 1.0),
                  Eigen::MatrixXd(0, 1), Eigen::VectorXd(0));
  CHECK_THROWS_AS(cacc::solve_dense_qp(p), std::runtime_error);
}

TEST_CASE("finite-difference gradient matches a quadratic's exact gradient",
          "[oracle]") {
  Eigen::MatrixXd h(2, 2);
  h << 3.0, 1.0, 1.0, 2.0;
  const Eigen::Vector2d f(-1.0, 2.0);
  const auto objective = [&](const Eigen::VectorXd& z) {
    return 0.5 * z.dot(h * z) + f.dot(z);
  };
  const Eigen::Vector2d point(0.7, -0.3);
  const Eigen::VectorXd grad = cacc::finite_difference_gradient(objective, point);
  const Eigen::Vector2d exact = h * point + f;
  CHECK_THAT(grad(0), WithinAbs(exact(0), 1e-6));
  CHECK_THAT(grad(1), WithinAbs(exact(1), 1e-6));

  const auto broken = [](const Eigen::VectorXd&) {
    return std::numeric_limits<double>::infinity();
  };
  CHECK_THROWS_AS(cacc::finite_difference_gradient(broken, point),
                  std::runtime_error);
}

TEST_CASE("rollout map reproduces forward propagation", "[oracle]") {
  const int horizon = 4;
  Instance inst = make_instance(horizon);
  const cacc::RolloutMap map =
      cacc::build_rollout_map(inst.dyn, inst.auths, horizon);

  const Eigen::Vector2d x0(1.2, 9.0);
  Eigen::Vector3d uh(0.5, -0.8, 0.2);
  Eigen::Vector3d um(-0.3, 0.4, 0.1);
  Eigen::Vector3d ap(0.2, 0.0, -0.5);

  const Eigen::VectorXd stacked =
      map.Phi * x0 + map.Th * uh + map.Tm * um + map.Tp * ap;

  cacc::VehicleState x{x0(0), x0(1)};
  CHECK_THAT(stacked(0), WithinAbs(x.dv, 1e-12));
  CHECK_THAT(stacked(1), WithinAbs(x.g, 1e-12));
  for (int k = 0; k + 1 < horizon; ++k) {
    x = cacc::step(inst.dyn, x, uh(k), um(k), inst.auths[k], ap(k));
    CHECK_THAT(stacked(2 * (k + 1)), WithinAbs(x.dv, 1e-12));
    CHECK_THAT(stacked(2 * (k + 1) + 1), WithinAbs(x.g, 1e-12));
  }

  CHECK_THROWS_AS(cacc::build_rollout_map(inst.dyn, inst.auths, 1),
                  std::invalid_argument);
}

TEST_CASE("follower QP oracle agrees with the gain recursion", "[oracle]") {
  const int horizon = 5;
  Instance inst = make_instance(horizon);
  const cacc::VehicleState x0{1.4, 10.0};
  const std::vector<double> u_m{0.3, -0.5, 0.2, 0.0};

  const cacc::DenseQp qp = cacc::build_human_qp(inst.dyn, inst.auths, inst.eff,
                                                inst.refs, x0, u_m);
  const cacc::DenseQpSolution sol = cacc::solve_dense_qp(qp);
  REQUIRE(sol.z.size() == horizon - 1);

  const auto ff = cacc::compute_feedforward(inst.gains, inst.eff, inst.refs,
                                            u_m);
  cacc::VehicleState x = x0;
  for (int k = 0; k + 1 < horizon; ++k) {
    const double u_h = cacc::human_reaction(inst.gains, ff, k, x, u_m[k]);
    CHECK_THAT(sol.z(k), WithinAbs(u_h, 1e-7));
    const Eigen::Vector2d next = inst.gains.A * x.vec() +
                                 inst.gains.Bh[k] * u_h +
                                 inst.gains.Bm[k] * u_m[k];
    x = cacc::VehicleState::from_vec(next);
  }
}

TEST_CASE("coupled trajectory map predicts the closed-loop response",
          "[oracle]") {
  const int horizon = 5;
  Instance inst = make_instance(horizon);
  const cacc::VehicleState x0{-0.8, 14.0};
  const std::vector<double> ap{0.4, -0.2, 0.0, 0.3};

  const cacc::AffineTrajectoryMap map = cacc::coupled_trajectory_map(
      inst.dyn, inst.gains, inst.eff, inst.refs, x0, ap);
  REQUIRE(map.G.rows() == 2 * horizon);
  REQUIRE(map.G.cols() == horizon - 1);

  const std::vector<double> u_m{0.6, -0.4, 0.25, -0.1};
  const Eigen::VectorXd um =
      Eigen::Map<const Eigen::VectorXd>(u_m.data(), horizon - 1);
  const Eigen::VectorXd predicted = map.G * um + map.X0;

  const auto ff = cacc::compute_feedforward(inst.gains, inst.eff, inst.refs,
                                            u_m);
  cacc::VehicleState x = x0;
  CHECK_THAT(predicted(0), WithinAbs(x.dv, 1e-8));
  CHECK_THAT(predicted(1), WithinAbs(x.g, 1e-8));
  for (int k = 0; k + 1 < horizon; ++k) {
    const double u_h = cacc::human_reaction(inst.gains, ff, k, x, u_m[k]);
    x = cacc::step(inst.dyn, x, u_h, u_m[k], inst.auths[k], ap[k]);
    CHECK_THAT(predicted(2 * (k + 1)), WithinAbs(x.dv, 1e-8));
    CHECK_THAT(predicted(2 * (k + 1) + 1), WithinAbs(x.g, 1e-8));
  }
}

TEST_CASE("reduced machine QP matches the saddle-point planner", "[oracle]") {
  const int horizon = 5;
  Instance inst = make_instance(horizon);
  const cacc::VehicleState x0{-0.8, 14.0};
  const std::vector<double> ap{0.4, -0.2, 0.0, 0.3};

  cacc::PlannerConfig cfg;
  cfg.horizon = horizon;
  const cacc::ReferenceTrajectory machine_refs(
      horizon, cacc::RefPoint{0.0, 0.0, true, false});
  const auto machine_eff = cacc::effective_weights(
      std::vector<cacc::CostWeights>(horizon, cfg.weights), machine_refs);

  const cacc::AffineTrajectoryMap map = cacc::coupled_trajectory_map(
      inst.dyn, inst.gains, inst.eff, inst.refs, x0, ap);
  const cacc::DenseQp reduced =
      cacc::build_machine_qp(map, machine_eff, machine_refs);
  const cacc::DenseQpSolution oracle = cacc::solve_dense_qp(reduced);

  const auto law = cacc::assemble_stacked_human_law(inst.gains, inst.eff,
                                                    inst.refs, inst.dyn,
                                                    inst.auths);
  const cacc::MachinePlan kkt = cacc::plan(x0, ap, cfg, machine_refs, law);

  REQUIRE(oracle.z.size() == kkt.solution.Um.size());
  for (Eigen::Index k = 0; k < oracle.z.size(); ++k) {
    CHECK_THAT(oracle.z(k), WithinAbs(kkt.solution.Um(k), 1e-7));
  }
}
