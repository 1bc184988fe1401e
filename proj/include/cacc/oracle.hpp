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

#ifndef CACC_ORACLE_HPP_
#define CACC_ORACLE_HPP_

// Brute-force verifiers used by the validation suites. Nothing here shares
// assembly code with the production solvers: the human problem is rebuilt
// directly in the control space by explicit rollout matrices (no backward
// recursion), the machine problem through unit-vector perturbation rollouts
// (no stacked operators), and the generic equality-QP solver uses its own
// saddle assembly with a full-pivot factorization.

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "cacc/dynamics.hpp"
#include "cacc/human_model.hpp"

namespace cacc {

// Generic equality-constrained quadratic program
//   min 0.5 z^T H z + f^T z  s.t.  Aeq z = beq.
// H is symmetrized on construction; Aeq may have zero rows (unconstrained).
struct DenseQp {
  Eigen::MatrixXd H;
  Eigen::VectorXd f;
  Eigen::MatrixXd Aeq;
  Eigen::VectorXd beq;

  DenseQp(Eigen::MatrixXd h, Eigen::VectorXd f_in, Eigen::MatrixXd aeq,
          Eigen::VectorXd beq_in)
      : H(0.5 * (h + h.transpose().eval())),
        f(std::move(f_in)),
        Aeq(std::move(aeq)),
        beq(std::move(beq_in)) {
    if (H.rows() != H.cols() || f.size() != H.rows() ||
        Aeq.rows() != beq.size() ||
        (Aeq.rows() > 0 && Aeq.cols() != H.rows())) {
      throw std::invalid_argument("DenseQp: inconsistent dimensions");
    }
    if (Aeq.rows() > H.rows()) {
      throw std::invalid_argument("DenseQp: more constraints than variables");
    }
  }

  double objective(const Eigen::VectorXd& z) const {
    return 0.5 * z.dot(H * z) + f.dot(z);
  }
};

struct DenseQpSolution {
  Eigen::VectorXd z;
  Eigen::VectorXd multipliers;
  double stationarity_residual{0.0};
  double feasibility_residual{0.0};
};

inline DenseQpSolution solve_dense_qp(const DenseQp& p) {
  const Eigen::Index n = p.H.rows();
  const Eigen::Index m = p.Aeq.rows();
  Eigen::MatrixXd saddle = Eigen::MatrixXd::Zero(n + m, n + m);
  saddle.topLeftCorner(n, n) = p.H;
  if (m > 0) {
    saddle.topRightCorner(n, m) = p.Aeq.transpose();
    saddle.bottomLeftCorner(m, n) = p.Aeq;
  }
  Eigen::VectorXd rhs(n + m);
  rhs.head(n) = -p.f;
  rhs.tail(m) = p.beq;

  const Eigen::FullPivLU<Eigen::MatrixXd> lu(saddle);
  if (!lu.isInvertible()) {
    throw std::runtime_error("solve_dense_qp: singular KKT matrix");
  }
  const Eigen::VectorXd sol = lu.solve(rhs);

  DenseQpSolution out;
  out.z = sol.head(n);
  out.multipliers = sol.tail(m);
  out.stationarity_residual =
      (p.H * out.z + p.f + p.Aeq.transpose() * out.multipliers).norm() /
      (1.0 + p.f.norm());
  out.feasibility_residual =
      m > 0 ? (p.Aeq * out.z - p.beq).norm() / (1.0 + p.beq.norm()) : 0.0;
  if (out.stationarity_residual > 1e-10 || out.feasibility_residual > 1e-10) {
    throw std::runtime_error("solve_dense_qp: residuals exceed 1e-10");
  }
  return out;
}

// Central-difference gradient of a scalar function.
inline Eigen::VectorXd finite_difference_gradient(
    const std::function<double(const Eigen::VectorXd&)>& objective,
    const Eigen::VectorXd& point, double step = 1e-5) {
  Eigen::VectorXd grad(point.size());
  Eigen::VectorXd probe = point;
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    probe(i) = point(i) + step;
    const double up = objective(probe);
    probe(i) = point(i) - step;
    const double down = objective(probe);
    probe(i) = point(i);
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw std::runtime_error(
          "finite_difference_gradient: non-finite objective sample");
    }
    grad(i) = (up - down) / (2.0 * step);
  }
  return grad;
}

// Dense rollout map of the two-input plant over a horizon: stacked states
// X = Phi x_0 + Th U_h + Tm U_m + Tp Ap, with X stacking x_0..x_{K-1}.
// Built by forward propagation only.
struct RolloutMap {
  Eigen::MatrixXd Phi;  // 2K x 2
  Eigen::MatrixXd Th;   // 2K x (K-1)
  Eigen::MatrixXd Tm;   // 2K x (K-1)
  Eigen::MatrixXd Tp;   // 2K x (K-1)
};

inline RolloutMap build_rollout_map(const DiscreteDynamics& dyn,
                                    const std::vector<AuthorityPair>& auths,
                                    int horizon) {
  const int steps = horizon - 1;
  if (horizon < 2 || auths.size() < static_cast<std::size_t>(steps)) {
    throw std::invalid_argument("build_rollout_map: bad horizon/authorities");
  }
  RolloutMap map;
  map.Phi = Eigen::MatrixXd::Zero(2 * horizon, 2);
  map.Th = Eigen::MatrixXd::Zero(2 * horizon, steps);
  map.Tm = Eigen::MatrixXd::Zero(2 * horizon, steps);
  map.Tp = Eigen::MatrixXd::Zero(2 * horizon, steps);
  map.Phi.topRows<2>() = Eigen::Matrix2d::Identity();
  for (int k = 0; k < steps; ++k) {
    const auto [bh, bm] = effective_input_matrices(dyn, auths[k]);
    map.Phi.middleRows<2>(2 * (k + 1)) = dyn.A * map.Phi.middleRows<2>(2 * k);
    map.Th.middleRows<2>(2 * (k + 1)) = dyn.A * map.Th.middleRows<2>(2 * k);
    map.Tm.middleRows<2>(2 * (k + 1)) = dyn.A * map.Tm.middleRows<2>(2 * k);
    map.Tp.middleRows<2>(2 * (k + 1)) = dyn.A * map.Tp.middleRows<2>(2 * k);
    map.Th.block<2, 1>(2 * (k + 1), k) = bh;
    map.Tm.block<2, 1>(2 * (k + 1), k) = bm;
    map.Tp.block<2, 1>(2 * (k + 1), k) = dyn.C;
  }
  return map;
}

inline Eigen::MatrixXd stacked_state_weight(
    const std::vector<CostWeights>& weights, int horizon) {
  Eigen::MatrixXd qbar = Eigen::MatrixXd::Zero(2 * horizon, 2 * horizon);
  for (int k = 0; k < horizon; ++k) {
    qbar.block<2, 2>(2 * k, 2 * k) = weights[k].state_weight();
  }
  return qbar;
}

inline Eigen::VectorXd stacked_reference(const ReferenceTrajectory& refs) {
  Eigen::VectorXd xref(2 * refs.size());
  for (std::size_t k = 0; k < refs.size(); ++k) {
    xref.segment<2>(2 * k) = refs[k].vec();
  }
  return xref;
}

// Human tracking problem posed directly in U_h with the states eliminated by
// the rollout map (the human's internal model carries no predecessor
// acceleration term). Unconstrained QP; the constant cost offset is dropped.
inline DenseQp build_human_qp(const DiscreteDynamics& dyn,
                              const std::vector<AuthorityPair>& auths,
                              const std::vector<CostWeights>& weights,
                              const ReferenceTrajectory& refs,
                              const VehicleState& x0,
                              const std::vector<double>& u_m) {
  const int horizon = static_cast<int>(refs.size());
  const int steps = horizon - 1;
  if (u_m.size() != static_cast<std::size_t>(steps)) {
    throw std::invalid_argument("build_human_qp: u_m length mismatch");
  }
  const RolloutMap map = build_rollout_map(dyn, auths, horizon);
  const Eigen::VectorXd um =
      Eigen::Map<const Eigen::VectorXd>(u_m.data(), steps);
  const Eigen::VectorXd x_free = map.Phi * x0.vec() + map.Tm * um;
  const Eigen::MatrixXd qbar = stacked_state_weight(weights, horizon);
  Eigen::MatrixXd rbar = Eigen::MatrixXd::Zero(steps, steps);
  for (int k = 0; k < steps; ++k) rbar(k, k) = weights[k].r;

  Eigen::MatrixXd h = map.Th.transpose() * qbar * map.Th + rbar;
  Eigen::VectorXd f =
      map.Th.transpose() * qbar * (x_free - stacked_reference(refs));
  return DenseQp(std::move(h), std::move(f), Eigen::MatrixXd(0, steps),
                 Eigen::VectorXd(0));
}

// Affine dependence of the coupled trajectory on the machine's commands,
// X(U_m) = G U_m + X0, recovered by rolling the human's reaction to each
// unit command vector through the per-step recursion. Feeds the machine-side
// oracle QP without touching the stacked operators.
struct AffineTrajectoryMap {
  Eigen::MatrixXd G;   // 2K x (K-1)
  Eigen::VectorXd X0;  // 2K
};

inline Eigen::VectorXd stack_states(const std::vector<VehicleState>& states) {
  Eigen::VectorXd x(2 * states.size());
  for (std::size_t k = 0; k < states.size(); ++k) {
    x.segment<2>(2 * k) = states[k].vec();
  }
  return x;
}

inline AffineTrajectoryMap coupled_trajectory_map(
    const DiscreteDynamics& dyn, const GainSequence& gains,
    const std::vector<CostWeights>& human_weights,
    const ReferenceTrajectory& human_refs, const VehicleState& x0,
    const std::vector<double>& ap_forecast) {
  const int horizon = gains.horizon();
  const int steps = gains.num_steps();
  if (ap_forecast.size() != static_cast<std::size_t>(steps)) {
    throw std::invalid_argument("coupled_trajectory_map: forecast length");
  }

  // Rollout under a given machine plan: human reacts per its recursion, the
  // true plant additionally feels the predecessor acceleration.
  const auto roll = [&](const std::vector<double>& um) {
    const FeedforwardSequence ff =
        compute_feedforward(gains, human_weights, human_refs, um);
    std::vector<VehicleState> states(horizon);
    states[0] = x0;
    for (int k = 0; k < steps; ++k) {
      const double uh = human_reaction(gains, ff, k, states[k], um[k]);
      const Eigen::Vector2d next = gains.A * states[k].vec() +
                                   gains.Bh[k] * uh + gains.Bm[k] * um[k] +
                                   dyn.C * ap_forecast[k];
      states[k + 1] = VehicleState::from_vec(next);
    }
    return stack_states(states);
  };

  AffineTrajectoryMap map;
  std::vector<double> um(steps, 0.0);
  map.X0 = roll(um);
  map.G.resize(2 * horizon, steps);
  for (int j = 0; j < steps; ++j) {
    um.assign(steps, 0.0);
    um[j] = 1.0;
    map.G.col(j) = roll(um) - map.X0;
  }
  return map;
}

// Machine-side tracking problem reduced to U_m through the affine coupled
// trajectory. Unconstrained QP over U_m.
inline DenseQp build_machine_qp(const AffineTrajectoryMap& map,
                                const std::vector<CostWeights>& machine_weights,
                                const ReferenceTrajectory& machine_refs) {
  const int horizon = static_cast<int>(machine_refs.size());
  const int steps = static_cast<int>(map.G.cols());
  if (map.G.rows() != 2 * horizon || steps != horizon - 1) {
    throw std::invalid_argument("build_machine_qp: map/reference mismatch");
  }
  const Eigen::MatrixXd qbar = stacked_state_weight(machine_weights, horizon);
  Eigen::MatrixXd rbar = Eigen::MatrixXd::Zero(steps, steps);
  for (int k = 0; k < steps; ++k) rbar(k, k) = machine_weights[k].r;

  Eigen::MatrixXd h = map.G.transpose() * qbar * map.G + rbar;
  Eigen::VectorXd f =
      map.G.transpose() * qbar * (map.X0 - stacked_reference(machine_refs));
  return DenseQp(std::move(h), std::move(f), Eigen::MatrixXd(0, steps),
                 Eigen::VectorXd(0));
}

}  // namespace cacc

#endif  // CACC_ORACLE_HPP_
