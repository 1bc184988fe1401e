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

#ifndef CACC_DYNAMICS_HPP_
#define CACC_DYNAMICS_HPP_

// Relative two-state model of a follower with respect to its predecessor and
// its forward-Euler discretization. The state is x = (dv, g) with
// dv = predecessor speed minus ego speed, so the gap integrates dv:
// g' = dv. Both the human and the machine controller act on this model; the
// shared command enters through authority-scaled copies of the input matrix.

#include <cmath>
#include <stdexcept>
#include <utility>

#include <Eigen/Dense>

namespace cacc {

// Relative kinematic state of one follower w.r.t. its predecessor.
// g <= 0 marks a collision; the simulator records and halts that pair.
struct VehicleState {
  double dv{0.0};  // predecessor speed minus ego speed [m/s]
  double g{0.0};   // following gap [m]

  Eigen::Vector2d vec() const { return {dv, g}; }
  static VehicleState from_vec(const Eigen::Vector2d& v) { return {v(0), v(1)}; }
};

// Control-authority split between human and machine. alpha_m is stored as
// 1 - alpha_h so the partition-of-unity holds exactly by construction.
class AuthorityPair {
 public:
  explicit AuthorityPair(double alpha_h) : alpha_h_(alpha_h) {
    if (!std::isfinite(alpha_h) || alpha_h < 0.0 || alpha_h > 1.0) {
      throw std::invalid_argument("AuthorityPair: alpha_h must lie in [0, 1]");
    }
  }

  double human() const { return alpha_h_; }
  double machine() const { return 1.0 - alpha_h_; }

  bool operator==(const AuthorityPair& other) const {
    return alpha_h_ == other.alpha_h_;
  }

 private:
  double alpha_h_;
};

// Forward-Euler discretization of dv' = -u + a_p, g' = dv over one control
// interval: A = I + A_c dt, B = B_c dt, C = C_c dt with
// A_c = [[0,0],[1,0]], B_c = [-1,0]^T, C_c = [1,0]^T.
struct DiscreteDynamics {
  Eigen::Matrix2d A;
  Eigen::Vector2d B;
  Eigen::Vector2d C;
  double dt{0.0};
};

inline DiscreteDynamics discretize(double dt) {
  if (!std::isfinite(dt) || dt <= 0.0) {
    throw std::invalid_argument("discretize: dt must be positive and finite");
  }
  DiscreteDynamics dyn;
  dyn.A << 1.0, 0.0, dt, 1.0;
  dyn.B << -dt, 0.0;
  dyn.C << dt, 0.0;
  dyn.dt = dt;
  return dyn;
}

// Authority-scaled input matrices B_h = B * alpha_h, B_m = B * alpha_m.
// Their sum is B for any split.
inline std::pair<Eigen::Vector2d, Eigen::Vector2d> effective_input_matrices(
    const DiscreteDynamics& dyn, const AuthorityPair& auth) {
  return {dyn.B * auth.human(), dyn.B * auth.machine()};
}

// One-step update x+ = A x + B_h u_h + B_m u_m + C a_p.
inline VehicleState step(const DiscreteDynamics& dyn, const VehicleState& x,
                         double u_h, double u_m, const AuthorityPair& auth,
                         double a_p) {
  const auto [bh, bm] = effective_input_matrices(dyn, auth);
  const Eigen::Vector2d next =
      dyn.A * x.vec() + bh * u_h + bm * u_m + dyn.C * a_p;
  if (!next.allFinite()) {
    throw std::overflow_error("step: non-finite state update");
  }
  return VehicleState::from_vec(next);
}

}  // namespace cacc

#endif  // CACC_DYNAMICS_HPP_
