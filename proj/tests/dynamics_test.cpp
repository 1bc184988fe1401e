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

#include "cacc/dynamics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <catch2/catch_amalgamated.hpp>

using Catch::Matchers::WithinAbs;

TEST_CASE("discretize fills the relative-state matrices", "[dynamics]") {
  const cacc::DiscreteDynamics dyn = cacc::discretize(0.1);
  CHECK(dyn.dt == 0.1);

  CHECK(dyn.A(0, 0) == 1.0);
  CHECK(dyn.A(0, 1) == 0.0);
  CHECK(dyn.A(1, 0) == 0.1);  // gap integrates the speed difference
  CHECK(dyn.A(1, 1) == 1.0);

  CHECK(dyn.B(0) == -0.1);  // ego acceleration closes the speed difference
  CHECK(dyn.B(1) == 0.0);
  CHECK(dyn.C(0) == 0.1);   // predecessor acceleration opens it
  CHECK(dyn.C(1) == 0.0);
}

TEST_CASE("discretize rejects non-positive steps", "[dynamics]") {
  CHECK_THROWS_AS(cacc::discretize(0.0), std::invalid_argument);
  CHECK_THROWS_AS(cacc::discretize(-0.1), std::invalid_argument);
}

TEST_CASE("authority pair keeps the shares complementary", "[dynamics]") {
  const cacc::AuthorityPair auth(0.3);
  CHECK(auth.human() == 0.3);
  CHECK(auth.machine() == 0.7);
  CHECK(auth.human() + auth.machine() == 1.0);

  CHECK(cacc::AuthorityPair(0.0).machine() == 1.0);
  CHECK(cacc::AuthorityPair(1.0).machine() == 0.0);
  CHECK(cacc::AuthorityPair(0.3) == cacc::AuthorityPair(0.3));
  CHECK_FALSE(cacc::AuthorityPair(0.3) == cacc::AuthorityPair(0.4));
}

TEST_CASE("authority pair rejects shares outside the unit interval",
          "[dynamics]") {
  CHECK_THROWS_AS(cacc::AuthorityPair(-0.01), std::invalid_argument);
  CHECK_THROWS_AS(cacc::AuthorityPair(1.01), std::invalid_argument);
  CHECK_THROWS_AS(cacc::AuthorityPair(std::nan("")), std::invalid_argument);
}

TEST_CASE("effective input matrices scale with the authority split",
          "[dynamics]") {
  const cacc::DiscreteDynamics dyn = cacc::discretize(0.1);
  const auto [bh, bm] =
      cacc::effective_input_matrices(dyn, cacc::AuthorityPair(0.3));
  CHECK_THAT(bh(0), WithinAbs(-0.03, 1e-15));
  CHECK(bh(1) == 0.0);
  CHECK_THAT(bm(0), WithinAbs(-0.07, 1e-15));
  CHECK(bm(1) == 0.0);
}

TEST_CASE("step matches the hand-computed update", "[dynamics]") {
  const cacc::DiscreteDynamics dyn = cacc::discretize(0.1);
  const cacc::VehicleState x{1.0, 5.0};
  const cacc::VehicleState next =
      cacc::step(dyn, x, 0.5, -0.25, cacc::AuthorityPair(0.4), 0.2);
  // dv' = dv - dt*(0.4*0.5 + 0.6*(-0.25)) + dt*0.2
  CHECK_THAT(next.dv, WithinAbs(1.015, 1e-15));
  // g' = g + dt*dv uses the pre-update speed difference
  CHECK_THAT(next.g, WithinAbs(5.1, 1e-15));
}

TEST_CASE("step propagates only the human input at full human authority",
          "[dynamics]") {
  const cacc::DiscreteDynamics dyn = cacc::discretize(0.1);
  const cacc::VehicleState x{0.0, 10.0};
  const cacc::VehicleState next =
      cacc::step(dyn, x, 1.0, -99.0, cacc::AuthorityPair(1.0), 0.0);
  CHECK_THAT(next.dv, WithinAbs(-0.1, 1e-15));
  CHECK(next.g == 10.0);
}

TEST_CASE("step rejects non-finite inputs", "[dynamics]") {
  const cacc::DiscreteDynamics dyn = cacc::discretize(0.1);
  const cacc::VehicleState x{0.0, 10.0};
  const double inf = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(cacc::step(dyn, x, inf, 0.0, cacc::AuthorityPair(0.5), 0.0),
                  std::overflow_error);
  CHECK_THROWS_AS(cacc::step(dyn, x, 0.0, 0.0, cacc::AuthorityPair(0.5),
                             std::nan("")),
                  std::overflow_error);
}

TEST_CASE("vehicle state round-trips through its vector form", "[dynamics]") {
  const cacc::VehicleState x{-2.5, 14.0};
  const cacc::VehicleState y = cacc::VehicleState::from_vec(x.vec());
  CHECK(y.dv == x.dv);
  CHECK(y.g == x.g);
}
