/*
 Copyright 2026 The safepdp authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#ifndef SAFEPDP_COMMON_HPP
#define SAFEPDP_COMMON_HPP

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace safepdp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionError : Error {
  using Error::Error;
};
struct NonFiniteError : Error {
  using Error::Error;
};
// Initial guess for a barrier solve has some inequality value >= 0.
struct InfeasibleStart : Error {
  using Error::Error;
};
// Composite barrier cost evaluated outside the strict interior g < 0.
struct BarrierDomainError : Error {
  using Error::Error;
};
struct NonPositiveCurvature : Error {
  using Error::Error;
};
struct SingularLuu : Error {
  using Error::Error;
};
struct InconsistentEqualities : Error {
  using Error::Error;
};
struct UnsafeInitialization : Error {
  using Error::Error;
};
// An accepted outer iterate violated a task constraint. Should never happen.
struct SafetyBreach : Error {
  using Error::Error;
};
struct InitNotSafe : Error {
  using Error::Error;
};
struct LineSearchFailure : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};

// States x_0..x_T and controls u_0..u_{T-1} of one rollout or solve.
struct Trajectory {
  std::vector<Vector> states;    // T+1 entries
  std::vector<Vector> controls;  // T entries

  int horizon() const { return static_cast<int>(controls.size()); }

  // Flattened [x_0; ...; x_T; u_0; ...; u_{T-1}], used for norms and losses.
  Vector flatten() const {
    Eigen::Index total = 0;
    for (const auto& x : states) total += x.size();
    for (const auto& u : controls) total += u.size();
    Vector out(total);
    Eigen::Index at = 0;
    for (const auto& x : states) {
      out.segment(at, x.size()) = x;
      at += x.size();
    }
    for (const auto& u : controls) {
      out.segment(at, u.size()) = u;
      at += u.size();
    }
    return out;
  }
};

// Costates lambda_1..lambda_T plus constraint multipliers v_0..v_T, w_0..w_T.
// costate[t] holds lambda_t for t = 1..T; costate[0] is unused and empty.
struct Multipliers {
  std::vector<Vector> costate;  // T+1 entries, [0] empty
  std::vector<Vector> ineq;     // T+1 entries, sized q_t (q_T at T)
  std::vector<Vector> eq;       // T+1 entries, sized s_t (s_T at T)
};

inline bool all_finite(const Vector& v) { return v.allFinite(); }

inline double inf_norm(const Vector& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw DimensionError(msg);
}

}  // namespace safepdp

#endif  // SAFEPDP_COMMON_HPP
