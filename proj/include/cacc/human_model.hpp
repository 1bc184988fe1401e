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

#ifndef CACC_HUMAN_MODEL_HPP_
#define CACC_HUMAN_MODEL_HPP_

// MPC-based model of the human driver's longitudinal reaction. The human
// minimizes a quadratic tracking cost over a finite horizon while treating
// the machine's command sequence as known, which yields a closed-form
// affine reaction law per step:
//
//   u_h,k = K_k x_k + P_k u_m,k + S_k
//
// with coefficients produced by a backward Riccati-style recursion. The
// recursion also yields the closed-loop transition N_k and the coupling
// matrix M_k consumed by the stacked-form operators and the machine's QP.
//
// Indexing is 0-based throughout: states x_0..x_{K-1}, controls
// u_0..u_{K-2}, so gain arrays have K-1 entries and D/F have K.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "cacc/dynamics.hpp"

namespace cacc {

// Per-step quadratic cost weights. The state weight is Q = diag(q_v, q_g);
// r is the control-effort weight and must stay positive so the recursion's
// scalar inverse exists.
struct CostWeights {
  double q_v{0.0};
  double q_g{0.0};
  double r{1.0};

  void validate() const {
    if (!std::isfinite(q_v) || !std::isfinite(q_g) || !std::isfinite(r) ||
        q_v < 0.0 || q_g < 0.0 || r <= 0.0) {
      throw std::invalid_argument(
          "CostWeights: require q_v >= 0, q_g >= 0, r > 0, all finite");
    }
  }

  Eigen::Matrix2d state_weight() const {
    return Eigen::Vector2d(q_v, q_g).asDiagonal();
  }
};

// One reference sample with per-component validity. An inactive component
// is a don't-care: it contributes zero weight to that step's Q and its
// stored value reads back as 0.
struct RefPoint {
  double dv{0.0};
  double g{0.0};
  bool dv_active{false};
  bool g_active{false};

  double dv_value() const { return dv_active ? dv : 0.0; }
  double g_value() const { return g_active ? g : 0.0; }
  Eigen::Vector2d vec() const { return {dv_value(), g_value()}; }
};

using ReferenceTrajectory = std::vector<RefPoint>;

// Applies the don't-care mask of each reference sample to the matching
// weight entry, giving the effective per-step Q used by every consumer of
// a (weights, refs) pair. Weight entries beyond the reference length are
// dropped.
inline std::vector<CostWeights> effective_weights(
    const std::vector<CostWeights>& weights, const ReferenceTrajectory& refs) {
  if (weights.size() < refs.size()) {
    throw std::invalid_argument(
        "effective_weights: fewer weight entries than reference samples");
  }
  std::vector<CostWeights> out(refs.size());
  for (std::size_t k = 0; k < refs.size(); ++k) {
    out[k] = weights[k];
    if (!refs[k].dv_active) out[k].q_v = 0.0;
    if (!refs[k].g_active) out[k].q_g = 0.0;
  }
  return out;
}

// Backward-recursion coefficients of the human reaction law. Gain arrays
// (H, K, P, N, M) cover steps 0..K-2; the cost-to-go Hessian D covers
// 0..K-1. A and the authority-scaled input columns are cached so downstream
// consumers (feedforward, stacked operators, rollout oracles) see exactly
// the plant the gains were derived for.
struct GainSequence {
  std::vector<double> H;                 // (r + B_h^T D_{k+1} B_h)^{-1}
  std::vector<Eigen::RowVector2d> K;     // state feedback
  std::vector<double> P;                 // machine-command feedthrough
  std::vector<Eigen::Matrix2d> N;        // closed-loop transition A + B_h K
  std::vector<Eigen::Matrix2d> M;        // cross-coupling used by F recursion
  std::vector<Eigen::Matrix2d> D;        // cost-to-go Hessian, D_{K-1} = Q_{K-1}
  Eigen::Matrix2d A;
  std::vector<Eigen::Vector2d> Bh;
  std::vector<Eigen::Vector2d> Bm;

  int horizon() const { return static_cast<int>(D.size()); }
  int num_steps() const { return static_cast<int>(K.size()); }
};

// Reference-dependent part of the reaction law: u_h,k = K_k x_k + P_k u_m,k
// + S_k with S_k = -H_k B_h,k^T F_{k+1}. F runs over 0..K-1, S over 0..K-2.
struct FeedforwardSequence {
  std::vector<Eigen::Vector2d> F;
  std::vector<double> S;
};

// Backward pass for the gain sequence. `weights` must already carry any
// reference don't-care masking (see effective_weights); it needs at least
// `horizon` entries and `auth_per_step` at least horizon-1.
inline GainSequence compute_gains(const DiscreteDynamics& dyn,
                                  const std::vector<AuthorityPair>& auth_per_step,
                                  const std::vector<CostWeights>& weights,
                                  int horizon) {
  if (horizon < 2) {
    throw std::invalid_argument("compute_gains: horizon must be >= 2");
  }
  const std::size_t steps = static_cast<std::size_t>(horizon) - 1;
  if (auth_per_step.size() < steps || weights.size() < static_cast<std::size_t>(horizon)) {
    throw std::invalid_argument(
        "compute_gains: authority/weight sequences shorter than horizon");
  }
  for (int k = 0; k < horizon; ++k) weights[k].validate();

  GainSequence gains;
  gains.A = dyn.A;
  gains.H.resize(steps);
  gains.K.resize(steps);
  gains.P.resize(steps);
  gains.N.resize(steps);
  gains.M.resize(steps);
  gains.D.resize(horizon);
  gains.Bh.resize(steps);
  gains.Bm.resize(steps);

  gains.D[steps] = weights[steps].state_weight();
  for (int k = static_cast<int>(steps) - 1; k >= 0; --k) {
    const auto [bh, bm] = effective_input_matrices(dyn, auth_per_step[k]);
    const Eigen::Matrix2d& dn = gains.D[k + 1];
    const double denom = weights[k].r + bh.dot(dn * bh);
    if (!(denom > 0.0) || !std::isfinite(denom)) {
      throw std::logic_error("compute_gains: curvature term lost positivity");
    }
    const double h = 1.0 / denom;
    const Eigen::RowVector2d kk = -h * bh.transpose() * dn * dyn.A;
    const double p = -h * bh.dot(dn * bm);
    const Eigen::Matrix2d n = dyn.A + bh * kk;
    const Eigen::Matrix2d m =
        -(kk.transpose() * weights[k].r + n.transpose() * dn * bh) * h *
        bh.transpose();
    Eigen::Matrix2d d = weights[k].state_weight() +
                        kk.transpose() * weights[k].r * kk +
                        n.transpose() * dn * n;
    d = 0.5 * (d + d.transpose().eval());  // keep symmetry exact

    gains.H[k] = h;
    gains.K[k] = kk;
    gains.P[k] = p;
    gains.N[k] = n;
    gains.M[k] = m;
    gains.D[k] = d;
    gains.Bh[k] = bh;
    gains.Bm[k] = bm;
  }
  return gains;
}

// Backward pass for the reference/feedforward terms given the machine's
// command sequence over the horizon (length K-1).
inline FeedforwardSequence compute_feedforward(
    const GainSequence& gains, const std::vector<CostWeights>& weights,
    const ReferenceTrajectory& refs, const std::vector<double>& u_m) {
  const int horizon = gains.horizon();
  const std::size_t steps = static_cast<std::size_t>(gains.num_steps());
  if (refs.size() != static_cast<std::size_t>(horizon) ||
      weights.size() < static_cast<std::size_t>(horizon) ||
      u_m.size() != steps) {
    throw std::invalid_argument(
        "compute_feedforward: sequence lengths inconsistent with horizon");
  }

  FeedforwardSequence ff;
  ff.F.resize(horizon);
  ff.S.resize(steps);
  ff.F[horizon - 1] =
      -weights[horizon - 1].state_weight() * refs[horizon - 1].vec();
  for (int k = static_cast<int>(steps) - 1; k >= 0; --k) {
    const Eigen::Matrix2d t = gains.M[k] + gains.N[k].transpose();
    ff.F[k] = -weights[k].state_weight() * refs[k].vec() +
              t * gains.D[k + 1] * gains.Bm[k] * u_m[k] + t * ff.F[k + 1];
    ff.S[k] = -gains.H[k] * gains.Bh[k].dot(ff.F[k + 1]);
  }
  return ff;
}

// Reaction law at step k (0-based, valid for 0..K-2).
inline double human_reaction(const GainSequence& gains,
                             const FeedforwardSequence& ff, int k,
                             const VehicleState& x, double u_m) {
  if (k < 0 || k >= gains.num_steps()) {
    throw std::invalid_argument("human_reaction: step index out of range");
  }
  return gains.K[k].dot(x.vec()) + gains.P[k] * u_m + ff.S[k];
}

// Closed-loop rollout x_{k+1} = N_k x_k + O_k with
// O_k = B_h(P_k u_m,k + S_k) + B_m u_m,k. Algebraically identical to
// stepping the plant with u_h from human_reaction; tests assert the match.
inline std::vector<VehicleState> simulate_human_closed_loop(
    const DiscreteDynamics& dyn, const GainSequence& gains,
    const FeedforwardSequence& ff, const VehicleState& x0,
    const std::vector<double>& u_m) {
  (void)dyn;  // the plant is already baked into N/Bh/Bm
  const std::size_t steps = static_cast<std::size_t>(gains.num_steps());
  if (u_m.size() != steps) {
    throw std::invalid_argument(
        "simulate_human_closed_loop: u_m length must be horizon-1");
  }
  std::vector<VehicleState> states(steps + 1);
  states[0] = x0;
  for (std::size_t k = 0; k < steps; ++k) {
    const Eigen::Vector2d o =
        gains.Bh[k] * (gains.P[k] * u_m[k] + ff.S[k]) + gains.Bm[k] * u_m[k];
    states[k + 1] =
        VehicleState::from_vec(gains.N[k] * states[k].vec() + o);
  }
  return states;
}

// Quadratic tracking objective shared by both players:
// sum_k 0.5 (x_k - r_k)^T Q_k (x_k - r_k) + sum_k 0.5 r_k u_k^2.
// `weights` must be the effective (masked) sequence.
inline double tracking_objective(const std::vector<CostWeights>& weights,
                                 const ReferenceTrajectory& refs,
                                 const std::vector<VehicleState>& states,
                                 const std::vector<double>& controls) {
  if (refs.size() != states.size() || weights.size() < states.size() ||
      controls.size() + 1 != states.size()) {
    throw std::invalid_argument(
        "tracking_objective: sequence lengths inconsistent");
  }
  double j = 0.0;
  for (std::size_t k = 0; k < states.size(); ++k) {
    const Eigen::Vector2d e = states[k].vec() - refs[k].vec();
    j += 0.5 * e.dot(weights[k].state_weight() * e);
    if (k < controls.size()) j += 0.5 * weights[k].r * controls[k] * controls[k];
  }
  return j;
}

}  // namespace cacc

#endif  // CACC_HUMAN_MODEL_HPP_
