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

#ifndef CACC_STACKED_OPS_HPP_
#define CACC_STACKED_OPS_HPP_

// Horizon-wide (stacked) form of the human reaction law,
//
//   U_h = Kh X + (Ph + Jh Sh1) U_m + Jh Sh2,
//
// obtained by unrolling the backward feedforward recursion so the machine's
// QP can substitute the human's response directly into its dynamics
// constraints. Block indexing convention: row r of Sh1/Sh2 carries the
// feedforward vector consumed by control step r (the recursion value one
// step ahead), which makes Sh1 strictly upper block-triangular with a zero
// last block row. Everything is stored dense; horizons are tens of steps.

#include <cstddef>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "cacc/dynamics.hpp"
#include "cacc/human_model.hpp"

namespace cacc {

// Stacked decision vectors over one horizon: X holds x_0..x_{K-1} (2K
// entries), U_h and U_m hold the K-1 per-step commands.
struct StackedVectors {
  Eigen::VectorXd X;
  Eigen::VectorXd Uh;
  Eigen::VectorXd Um;
};

struct StackedHumanLaw {
  int horizon{0};
  Eigen::MatrixXd Kh;   // (K-1) x 2K, block-diagonal in 1x2 blocks, last state column zero
  Eigen::MatrixXd Ph;   // (K-1) x (K-1) diagonal
  Eigen::MatrixXd Jh;   // (K-1) x 2(K-1), block diagonal of -H_k B_h,k^T
  Eigen::MatrixXd Sh1;  // 2(K-1) x (K-1), strictly upper block-triangular
  Eigen::VectorXd Sh2;  // 2(K-1)
  // Plant context the law was assembled for, consumed by the machine QP.
  Eigen::Matrix2d A;
  std::vector<Eigen::Vector2d> Bh;
  std::vector<Eigen::Vector2d> Bm;

  Eigen::VectorXd human_controls(const Eigen::VectorXd& X,
                                 const Eigen::VectorXd& Um) const {
    if (X.size() != 2 * horizon || Um.size() != horizon - 1) {
      throw std::invalid_argument("human_controls: stacked sizes mismatch");
    }
    return Kh * X + (Ph + Jh * Sh1) * Um + Jh * Sh2;
  }
};

// Unrolls the per-step recursion into the stacked operators. The gain
// sequence must have been computed for the same plant and authority
// schedule; `weights` is the human's effective (masked) sequence.
inline StackedHumanLaw assemble_stacked_human_law(
    const GainSequence& gains, const std::vector<CostWeights>& weights,
    const ReferenceTrajectory& refs, const DiscreteDynamics& dyn,
    const std::vector<AuthorityPair>& auth_per_step) {
  const int horizon = gains.horizon();
  const int steps = gains.num_steps();
  if (refs.size() != static_cast<std::size_t>(horizon) ||
      weights.size() < static_cast<std::size_t>(horizon) ||
      auth_per_step.size() < static_cast<std::size_t>(steps)) {
    throw std::invalid_argument(
        "assemble_stacked_human_law: sequence lengths inconsistent");
  }
  for (int k = 0; k < steps; ++k) {
    const auto [bh, bm] = effective_input_matrices(dyn, auth_per_step[k]);
    if ((bh - gains.Bh[k]).cwiseAbs().maxCoeff() != 0.0 ||
        (bm - gains.Bm[k]).cwiseAbs().maxCoeff() != 0.0) {
      throw std::invalid_argument(
          "assemble_stacked_human_law: gains were computed for a different "
          "authority schedule or plant");
    }
  }

  StackedHumanLaw law;
  law.horizon = horizon;
  law.A = gains.A;
  law.Bh = gains.Bh;
  law.Bm = gains.Bm;
  law.Kh = Eigen::MatrixXd::Zero(steps, 2 * horizon);
  law.Ph = Eigen::MatrixXd::Zero(steps, steps);
  law.Jh = Eigen::MatrixXd::Zero(steps, 2 * steps);
  law.Sh1 = Eigen::MatrixXd::Zero(2 * steps, steps);
  law.Sh2 = Eigen::VectorXd::Zero(2 * steps);

  for (int r = 0; r < steps; ++r) {
    law.Kh.block<1, 2>(r, 2 * r) = gains.K[r];
    law.Ph(r, r) = gains.P[r];
    law.Jh.block<1, 2>(r, 2 * r) =
        -gains.H[r] * gains.Bh[r].transpose();
  }

  // Row r of Sh1/Sh2 expands the feedforward vector consumed by step r:
  //   F_{r+1} = sum_{c>r} (T_{r+1} ... T_c) D_{c+1} B_m,c u_m,c
  //           + sum_{j>r} (T_{r+1} ... T_{j-1}) (-Q_j xref_j)
  // with T_k = M_k + N_k^T and empty products equal to identity.
  std::vector<Eigen::Matrix2d> t(steps);
  for (int k = 0; k < steps; ++k) t[k] = gains.M[k] + gains.N[k].transpose();

  for (int r = 0; r < steps; ++r) {
    Eigen::Matrix2d prod_u = Eigen::Matrix2d::Identity();
    for (int c = r + 1; c < steps; ++c) {
      prod_u = (prod_u * t[c]).eval();
      law.Sh1.block<2, 1>(2 * r, c) = prod_u * gains.D[c + 1] * gains.Bm[c];
    }
    Eigen::Matrix2d prod_r = Eigen::Matrix2d::Identity();
    Eigen::Vector2d acc = Eigen::Vector2d::Zero();
    for (int j = r + 1; j < horizon; ++j) {
      acc += prod_r * (-weights[j].state_weight() * refs[j].vec());
      if (j < steps) prod_r = (prod_r * t[j]).eval();
    }
    law.Sh2.segment<2>(2 * r) = acc;
  }
  return law;
}

}  // namespace cacc

#endif  // CACC_STACKED_OPS_HPP_
