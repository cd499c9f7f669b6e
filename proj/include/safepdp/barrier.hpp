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

#ifndef SAFEPDP_BARRIER_HPP
#define SAFEPDP_BARRIER_HPP

#include <string>
#include <utility>

#include "safepdp/ocp.hpp"

namespace safepdp {

// Unconstrained approximation of a constrained system: every inequality
// becomes a log barrier -gamma*ln(-g) and every equality a quadratic penalty
// h^2/(2*gamma) folded into the stage/final cost. Only the dynamics remain as
// constraints. Composite costs are finite only on the strict interior g < 0;
// evaluation outside it raises BarrierDomainError rather than returning a
// non-finite value.
struct BarrierSpec {
  ProblemSpec base;
  double gamma = 0.0;

  int n() const { return base.n; }
  int m() const { return base.m; }
  int r() const { return base.r; }
  int T() const { return base.T; }

  HyperDual stage_cost(int t, const HdVector& x, const HdVector& u,
                       const HdVector& th) const {
    HyperDual acc = base.stage_cost(x, u, th);
    const HdVector g = base.path_ineq.fn(t, x, u, th);
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      if (g[i].v >= 0.0)
        throw BarrierDomainError("barrier cost undefined: inequality " +
                                 std::to_string(i) + " at step " +
                                 std::to_string(t) + " is " +
                                 std::to_string(g[i].v));
      acc += HyperDual(-gamma) * log(-g[i]);
    }
    const HdVector h = base.path_eq.fn(t, x, u, th);
    for (Eigen::Index i = 0; i < h.size(); ++i)
      acc += HyperDual(0.5 / gamma) * h[i] * h[i];
    return acc;
  }

  HyperDual final_cost(const HdVector& x, const HdVector& th) const {
    HyperDual acc = base.final_cost(x, th);
    const HdVector g = base.term_ineq.fn(x, th);
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      if (g[i].v >= 0.0)
        throw BarrierDomainError("barrier cost undefined: terminal inequality " +
                                 std::to_string(i) + " is " +
                                 std::to_string(g[i].v));
      acc += HyperDual(-gamma) * log(-g[i]);
    }
    const HdVector h = base.term_eq.fn(x, th);
    for (Eigen::Index i = 0; i < h.size(); ++i)
      acc += HyperDual(0.5 / gamma) * h[i] * h[i];
    return acc;
  }

  double total_cost(const Vector& theta, const Trajectory& traj) const {
    const HdVector th = lift(theta);
    HyperDual acc(0.0);
    for (int t = 0; t < base.T; ++t)
      acc += stage_cost(t, lift(traj.states[t]), lift(traj.controls[t]), th);
    acc += final_cost(lift(traj.states[base.T]), th);
    if (!isfinite(acc))
      throw NonFiniteError("barrier total_cost: non-finite cost");
    return acc.v;
  }
};

inline BarrierSpec to_barrier(const ProblemSpec& spec, double gamma) {
  if (!(gamma > 0.0))
    throw ConfigError("to_barrier: gamma must be positive, got " +
                      std::to_string(gamma));
  BarrierSpec b;
  b.base = spec;
  b.gamma = gamma;
  return b;
}

// Closed-form multipliers at a barrier-optimal trajectory: the perturbed
// complementarity relations give v = -gamma/g and w = h/gamma, and the
// costates follow from the backward recursion lambda_T = dL_T/dx,
// lambda_t = dL_t/dx with those multipliers plugged in.
inline Multipliers recover_multipliers(const ProblemSpec& spec,
                                       const Vector& theta,
                                       const Trajectory& traj, double gamma) {
  if (!(gamma > 0.0))
    throw ConfigError("recover_multipliers: gamma must be positive");
  Multipliers mult;
  mult.costate.resize(spec.T + 1);
  mult.ineq.resize(spec.T + 1);
  mult.eq.resize(spec.T + 1);

  const ConstraintReport rep = constraint_report(spec, theta, traj);
  for (int t = 0; t <= spec.T; ++t) {
    const Vector& g = rep.ineq[t];
    Vector v(g.size());
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      if (g[i] >= 0.0)
        throw BarrierDomainError(
            "recover_multipliers: trajectory not strictly feasible at step " +
            std::to_string(t) + " (g = " + std::to_string(g[i]) + ")");
      v[i] = -gamma / g[i];
    }
    mult.ineq[t] = v;
    mult.eq[t] = rep.eq[t] / gamma;
  }

  const Point pT{traj.states[spec.T], Vector(0), theta};
  const ScalarFn hamT = detail::terminal_hamiltonian(
      spec, mult.ineq[spec.T], mult.eq[spec.T]);
  mult.costate[spec.T] = gradient(hamT, pT, Wrt::kX, "terminal hamiltonian");
  for (int t = spec.T - 1; t >= 1; --t) {
    const Point p{traj.states[t], traj.controls[t], theta};
    const ScalarFn ham = detail::stage_hamiltonian(
        spec, t, mult.costate[t + 1], mult.ineq[t], mult.eq[t]);
    mult.costate[t] = gradient(ham, p, Wrt::kX, "hamiltonian");
  }
  return mult;
}

}  // namespace safepdp

#endif  // SAFEPDP_BARRIER_HPP
