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

#include "cacc/stacked_ops.hpp"

#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <catch2/catch_amalgamated.hpp>

#include "cacc/dynamics.hpp"
#include "cacc/human_model.hpp"

using Catch::Matchers::WithinAbs;

namespace {

struct LawFixture {
  cacc::DiscreteDynamics dyn;
  std::vector<cacc::AuthorityPair> auths;
  cacc::ReferenceTrajectory refs;
  std::vector<cacc::CostWeights> weights;
  cacc::GainSequence gains;
  cacc::StackedHumanLaw law;
};

LawFixture make_fixture(int horizon, std::vector<double> alphas,
                        cacc::ReferenceTrajectory refs,
                        cacc::CostWeights base) {
  LawFixture f{cacc::discretize(0.1), {}, std::move(refs), {}, {}, {}};
  for (double a : alphas) f.auths.emplace_back(a);
  f.weights = cacc::effective_weights(
      std::vector<cacc::CostWeights>(horizon, base), f.refs);
  f.gains = cacc::compute_gains(f.dyn, f.auths, f.weights, horizon);
  f.law = cacc::assemble_stacked_human_law(f.gains, f.weights, f.refs, f.dyn,
                                           f.auths);
  return f;
}

}  // namespace

TEST_CASE("two-step law reduces to the scalar gains", "[stacked_ops]") {
  auto f = make_fixture(
      2, {1.0}, cacc::ReferenceTrajectory(2, cacc::RefPoint{0, 0, true, true}),
      cacc::CostWeights{1.0, 1.0, 1.0});

  REQUIRE(f.law.horizon == 2);
  REQUIRE(f.law.Kh.rows() == 1);
  REQUIRE(f.law.Kh.cols() == 4);
  CHECK_THAT(f.law.Kh(0, 0), WithinAbs(0.1 / 1.01, 1e-15));
  CHECK(f.law.Kh(0, 1) == 0.0);
  CHECK(f.law.Kh(0, 2) == 0.0);  // no control acts on the terminal state
  CHECK(f.law.Kh(0, 3) == 0.0);

  CHECK(f.law.Ph(0, 0) == 0.0);
  CHECK_THAT(f.law.Jh(0, 0), WithinAbs(0.1 / 1.01, 1e-15));
  CHECK(f.law.Jh(0, 1) == 0.0);
  CHECK(f.law.Sh1.isZero(0.0));  // one block row leaves nothing above it
  CHECK(f.law.Sh2.isZero(1e-15));

  Eigen::VectorXd x(4);
  x << 1.0, 0.0, 0.3, 9.0;
  Eigen::VectorXd um(1);
  um << 0.0;
  const Eigen::VectorXd uh = f.law.human_controls(x, um);
  REQUIRE(uh.size() == 1);
  CHECK_THAT(uh(0), WithinAbs(0.1 / 1.01, 1e-14));
}

TEST_CASE("stacked operators carry the expected sparsity", "[stacked_ops]") {
  const int horizon = 6;
  cacc::ReferenceTrajectory refs(horizon, cacc::RefPoint{0.0, 14.0, false, true});
  auto f = make_fixture(horizon, {0.7, 0.5, 0.3, 0.9, 0.2}, refs,
                        cacc::CostWeights{0.8, 1.2, 2.0});
  const int steps = horizon - 1;

  REQUIRE(f.law.Kh.rows() == steps);
  REQUIRE(f.law.Kh.cols() == 2 * horizon);
  for (int k = 0; k < steps; ++k) {
    for (int j = 0; j < 2 * horizon; ++j) {
      if (j == 2 * k || j == 2 * k + 1) {
        CHECK(f.law.Kh(k, j) == f.gains.K[k](j - 2 * k));
      } else {
        CHECK(f.law.Kh(k, j) == 0.0);
      }
    }
  }

  for (int k = 0; k < steps; ++k) {
    for (int j = 0; j < steps; ++j) {
      if (k == j) {
        CHECK(f.law.Ph(k, j) == f.gains.P[k]);
      } else {
        CHECK(f.law.Ph(k, j) == 0.0);
      }
    }
  }

  // Block row k of Sh1 may only reference machine inputs later than step k.
  for (int k = 0; k < steps; ++k) {
    for (int j = 0; j <= k; ++j) {
      CHECK(f.law.Sh1(2 * k, j) == 0.0);
      CHECK(f.law.Sh1(2 * k + 1, j) == 0.0);
    }
  }

  // Jh is block diagonal with 1x2 blocks -H_k Bh_k'.
  for (int k = 0; k < steps; ++k) {
    for (int j = 0; j < 2 * steps; ++j) {
      if (j == 2 * k || j == 2 * k + 1) {
        const Eigen::RowVector2d expect =
            -f.gains.H[k] * f.gains.Bh[k].transpose();
        CHECK_THAT(f.law.Jh(k, j), WithinAbs(expect(j - 2 * k), 1e-15));
      } else {
        CHECK(f.law.Jh(k, j) == 0.0);
      }
    }
  }
}

TEST_CASE("stacked law reproduces the per-step reaction along a rollout",
          "[stacked_ops]") {
  const int horizon = 6;
  cacc::ReferenceTrajectory refs(horizon, cacc::RefPoint{0.0, 15.0, false, true});
  refs[2] = cacc::RefPoint{0.5, 0.0, true, false};
  refs[4] = cacc::RefPoint{0.2, 16.0, true, true};
  auto f = make_fixture(horizon, {0.7, 0.5, 0.3, 0.9, 0.2}, refs,
                        cacc::CostWeights{0.8, 1.2, 2.0});

  const std::vector<double> u_m{0.5, -1.0, 0.3, 0.8, -0.2};
  const auto ff = cacc::compute_feedforward(f.gains, f.weights, f.refs, u_m);

  cacc::VehicleState x{1.5, 12.0};
  Eigen::VectorXd stacked_x(2 * horizon);
  Eigen::VectorXd expected_uh(horizon - 1);
  stacked_x.segment<2>(0) = x.vec();
  for (int k = 0; k + 1 < horizon; ++k) {
    const double u_h = cacc::human_reaction(f.gains, ff, k, x, u_m[k]);
    expected_uh(k) = u_h;
    const Eigen::Vector2d next =
        f.gains.A * x.vec() + f.gains.Bh[k] * u_h + f.gains.Bm[k] * u_m[k];
    x = cacc::VehicleState::from_vec(next);
    stacked_x.segment<2>(2 * (k + 1)) = x.vec();
  }

  const Eigen::VectorXd um =
      Eigen::Map<const Eigen::VectorXd>(u_m.data(), horizon - 1);
  const Eigen::VectorXd uh = f.law.human_controls(stacked_x, um);
  REQUIRE(uh.size() == horizon - 1);
  for (int k = 0; k + 1 < horizon; ++k) {
    CHECK_THAT(uh(k), WithinAbs(expected_uh(k), 1e-9));
  }
}

TEST_CASE("stacked law rejects mismatched vector sizes", "[stacked_ops]") {
  auto f = make_fixture(
      3, {0.5, 0.5},
      cacc::ReferenceTrajectory(3, cacc::RefPoint{0, 0, true, true}),
      cacc::CostWeights{1.0, 1.0, 1.0});
  CHECK_THROWS_AS(
      f.law.human_controls(Eigen::VectorXd::Zero(4), Eigen::VectorXd::Zero(2)),
      std::invalid_argument);
  CHECK_THROWS_AS(
      f.law.human_controls(Eigen::VectorXd::Zero(6), Eigen::VectorXd::Zero(1)),
      std::invalid_argument);
}
