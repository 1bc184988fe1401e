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

#ifndef CACC_FUSION_HPP_
#define CACC_FUSION_HPP_

// Time-varying allocation of control authority between human and machine,
// and the convex command-fusion rule u = alpha_h u_h + alpha_m u_m.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <variant>

#include "cacc/dynamics.hpp"

namespace cacc {

struct ConstantAuthority {
  double alpha_h{0.0};
};

// alpha_h ramps 0 -> 1 linearly over [t_start, t_start + duration].
struct LinearGradientAuthority {
  double t_start{0.0};
  double duration{10.0};
};

// alpha_h jumps 0 -> 1 at t_start.
struct DirectTakeoverAuthority {
  double t_start{0.0};
};

using AuthoritySchedule =
    std::variant<ConstantAuthority, LinearGradientAuthority,
                 DirectTakeoverAuthority>;

inline void validate(const AuthoritySchedule& schedule) {
  if (const auto* c = std::get_if<ConstantAuthority>(&schedule)) {
    AuthorityPair check(c->alpha_h);
    (void)check;
  } else if (const auto* g = std::get_if<LinearGradientAuthority>(&schedule)) {
    if (!(g->duration > 0.0) || !std::isfinite(g->duration) ||
        !std::isfinite(g->t_start)) {
      throw std::invalid_argument(
          "LinearGradientAuthority: duration must be positive and finite");
    }
  } else if (const auto* d = std::get_if<DirectTakeoverAuthority>(&schedule)) {
    if (!std::isfinite(d->t_start)) {
      throw std::invalid_argument("DirectTakeoverAuthority: t_start not finite");
    }
  }
}

inline AuthorityPair authority_at(const AuthoritySchedule& schedule, double t) {
  if (const auto* c = std::get_if<ConstantAuthority>(&schedule)) {
    return AuthorityPair(c->alpha_h);
  }
  if (const auto* g = std::get_if<LinearGradientAuthority>(&schedule)) {
    return AuthorityPair(
        std::clamp((t - g->t_start) / g->duration, 0.0, 1.0));
  }
  const auto& d = std::get<DirectTakeoverAuthority>(schedule);
  return AuthorityPair(t < d.t_start ? 0.0 : 1.0);
}

inline double fuse(double u_h, double u_m, const AuthorityPair& auth) {
  if (!std::isfinite(u_h) || !std::isfinite(u_m)) {
    throw std::invalid_argument("fuse: commands must be finite");
  }
  return auth.human() * u_h + auth.machine() * u_m;
}

}  // namespace cacc

#endif  // CACC_FUSION_HPP_
