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

#ifndef SAFEPDP_OCP_HPP
#define SAFEPDP_OCP_HPP

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "safepdp/common.hpp"
#include "safepdp/deriv.hpp"
#include "safepdp/hyperdual.hpp"

namespace safepdp {

using TermVecFn = std::function<HdVector(const HdVector&, const HdVector&)>;
using TermScalarFn =
    std::function<HyperDual(const HdVector&, const HdVector&)>;
using ParamVecFn = std::function<HdVector(const HdVector&)>;

// Stage constraint block: a time-indexed vector function of (x_t, u_t, theta).
// Zero-dimensional blocks are represented as empty vectors, never as absent
// fields, so every code path stays uniform.
struct StageConstraint {
  std::function<HdVector(int, const HdVector&, const HdVector&, const HdVector&)>
      fn;
  std::function<int(int)> dim;

  StageConstraint() {
    fn = [](int, const HdVector&, const HdVector&, const HdVector&) {
      return HdVector(0);
    };
    dim = [](int) { return 0; };
  }

  // Time-invariant block of fixed size q.
  static StageConstraint invariant(VecFn f, int q) {
    StageConstraint c;
    c.fn = [f = std::move(f)](int, const HdVector& x, const HdVector& u,
                              const HdVector& th) { return f(x, u, th); };
    c.dim = [q](int) { return q; };
    return c;
  }
};

struct TerminalConstraint {
  TermVecFn fn;
  int dim = 0;

  TerminalConstraint() {
    fn = [](const HdVector&, const HdVector&) { return HdVector(0); };
  }
  static TerminalConstraint of(TermVecFn f, int q) {
    TerminalConstraint c;
    c.fn = std::move(f);
    c.dim = q;
    return c;
  }
};

// Parameterized constrained optimal-control system: dynamics, costs and
// constraint functions, all evaluable in hyper-dual arithmetic so every
// derivative the solvers need is exact. Immutable after construction.
struct ProblemSpec {
  int n = 0;  // state dim
  int m = 0;  // control dim
  int r = 0;  // parameter dim
  int T = 0;  // horizon, >= 1

  VecFn dynamics;             // f(x, u, theta) -> R^n
  ParamVecFn initial_state;   // x0(theta) -> R^n
  ScalarFn stage_cost;        // c_t(x, u, theta)
  TermScalarFn final_cost;    // c_T(x, theta)
  StageConstraint path_ineq;  // g_t <= 0
  StageConstraint path_eq;    // h_t = 0
  TerminalConstraint term_ineq;
  TerminalConstraint term_eq;

  bool has_constraints() const {
    if (term_ineq.dim > 0 || term_eq.dim > 0) return true;
    for (int t = 0; t < T; ++t)
      if (path_ineq.dim(t) > 0 || path_eq.dim(t) > 0) return true;
    return false;
  }
};

// Per-time-step lists of inequality indices within threshold delta of zero.
struct ActiveSet {
  std::vector<std::vector<int>> indices;  // T+1 entries; [T] is terminal
  double delta = 1e-3;
};

inline Trajectory rollout(const ProblemSpec& spec, const Vector& theta,
                          const std::vector<Vector>& controls) {
  require(static_cast<int>(controls.size()) == spec.T,
          "rollout: control sequence length must equal the horizon");
  require(theta.size() == spec.r, "rollout: parameter dimension mismatch");

  Trajectory traj;
  traj.states.reserve(spec.T + 1);
  traj.controls = controls;

  const HdVector th = lift(theta);
  HdVector x = spec.initial_state(th);
  require(x.size() == spec.n, "rollout: initial state dimension mismatch");
  traj.states.push_back(value_of(x));
  for (int t = 0; t < spec.T; ++t) {
    require(controls[t].size() == spec.m, "rollout: control dimension mismatch");
    x = spec.dynamics(x, lift(controls[t]), th);
    if (!all_finite(x))
      throw NonFiniteError("rollout diverged: non-finite state at step " +
                           std::to_string(t + 1));
    traj.states.push_back(value_of(x));
  }
  return traj;
}

inline double total_cost(const ProblemSpec& spec, const Vector& theta,
                         const Trajectory& traj) {
  require(static_cast<int>(traj.states.size()) == spec.T + 1 &&
              traj.horizon() == spec.T,
          "total_cost: trajectory length mismatch");
  const HdVector th = lift(theta);
  HyperDual acc(0.0);
  for (int t = 0; t < spec.T; ++t)
    acc += spec.stage_cost(lift(traj.states[t]), lift(traj.controls[t]), th);
  acc += spec.final_cost(lift(traj.states[spec.T]), th);
  if (!isfinite(acc)) throw NonFiniteError("total_cost: non-finite cost");
  return acc.v;
}

// Exhaustive per-step constraint evaluation plus the two max-violation
// scalars. Conventions for absent blocks: max_ineq = -inf, max_eq_abs = 0.
struct ConstraintReport {
  std::vector<Vector> ineq;  // T+1 entries (terminal at T)
  std::vector<Vector> eq;    // T+1 entries
  double max_ineq = -kInf;
  double max_eq_abs = 0.0;
};

inline ConstraintReport constraint_report(const ProblemSpec& spec,
                                          const Vector& theta,
                                          const Trajectory& traj) {
  ConstraintReport rep;
  rep.ineq.resize(spec.T + 1);
  rep.eq.resize(spec.T + 1);
  const HdVector th = lift(theta);
  for (int t = 0; t <= spec.T; ++t) {
    HdVector g, h;
    if (t < spec.T) {
      const HdVector x = lift(traj.states[t]);
      const HdVector u = lift(traj.controls[t]);
      g = spec.path_ineq.fn(t, x, u, th);
      h = spec.path_eq.fn(t, x, u, th);
    } else {
      const HdVector x = lift(traj.states[spec.T]);
      g = spec.term_ineq.fn(x, th);
      h = spec.term_eq.fn(x, th);
    }
    rep.ineq[t] = value_of(g);
    rep.eq[t] = value_of(h);
    if (rep.ineq[t].size() > 0)
      rep.max_ineq = std::max(rep.max_ineq, rep.ineq[t].maxCoeff());
    if (rep.eq[t].size() > 0)
      rep.max_eq_abs = std::max(rep.max_eq_abs, inf_norm(rep.eq[t]));
  }
  return rep;
}

namespace detail {

// Stage Hamiltonian c_t + lambda'f + v'g + w'h with multipliers held constant.
inline ScalarFn stage_hamiltonian(const ProblemSpec& spec, int t,
                                  const Vector& costate_next, const Vector& v,
                                  const Vector& w) {
  const HdVector lam = lift(costate_next), vi = lift(v), wi = lift(w);
  return [&spec, t, lam, vi, wi](const HdVector& x, const HdVector& u,
                                 const HdVector& th) {
    HyperDual acc = spec.stage_cost(x, u, th);
    const HdVector f = spec.dynamics(x, u, th);
    for (Eigen::Index i = 0; i < f.size(); ++i) acc += lam[i] * f[i];
    if (vi.size() > 0) {
      const HdVector g = spec.path_ineq.fn(t, x, u, th);
      for (Eigen::Index i = 0; i < g.size(); ++i) acc += vi[i] * g[i];
    }
    if (wi.size() > 0) {
      const HdVector h = spec.path_eq.fn(t, x, u, th);
      for (Eigen::Index i = 0; i < h.size(); ++i) acc += wi[i] * h[i];
    }
    return acc;
  };
}

// Terminal Hamiltonian c_T + v'g_T + w'h_T, wrapped as a stage function that
// ignores its control argument.
inline ScalarFn terminal_hamiltonian(const ProblemSpec& spec, const Vector& v,
                                     const Vector& w) {
  const HdVector vi = lift(v), wi = lift(w);
  return [&spec, vi, wi](const HdVector& x, const HdVector&,
                         const HdVector& th) {
    HyperDual acc = spec.final_cost(x, th);
    if (vi.size() > 0) {
      const HdVector g = spec.term_ineq.fn(x, th);
      for (Eigen::Index i = 0; i < g.size(); ++i) acc += vi[i] * g[i];
    }
    if (wi.size() > 0) {
      const HdVector h = spec.term_eq.fn(x, th);
      for (Eigen::Index i = 0; i < h.size(); ++i) acc += wi[i] * h[i];
    }
    return acc;
  };
}

}  // namespace detail

// Max norms of the first-order optimality blocks at (traj, mult):
// control stationarity, costate recursion defect, complementarity, and
// primal feasibility. All near zero certifies a KKT point.
struct PmpResidual {
  double stationarity = 0.0;    // max_t ||dL_t/du||_inf
  double costate = 0.0;         // max_t ||lambda_t - dL_t/dx||_inf
  double complementarity = 0.0; // max_t sum_i |v_{t,i} g_{t,i}|
  double primal_ineq = 0.0;     // max_t max_i max(g_{t,i}, 0)
  double primal_eq = 0.0;       // max_t ||h_t||_inf
};

inline PmpResidual pmp_residual(const ProblemSpec& spec, const Vector& theta,
                                const Trajectory& traj,
                                const Multipliers& mult) {
  require(static_cast<int>(mult.costate.size()) == spec.T + 1 &&
              static_cast<int>(mult.ineq.size()) == spec.T + 1 &&
              static_cast<int>(mult.eq.size()) == spec.T + 1,
          "pmp_residual: multiplier sequence length mismatch");
  PmpResidual res;
  const ConstraintReport rep = constraint_report(spec, theta, traj);
  for (int t = 0; t <= spec.T; ++t) {
    if (rep.ineq[t].size() > 0) {
      res.primal_ineq =
          std::max(res.primal_ineq, std::max(0.0, rep.ineq[t].maxCoeff()));
      res.complementarity = std::max(
          res.complementarity,
          rep.ineq[t].cwiseProduct(mult.ineq[t]).cwiseAbs().sum());
    }
    if (rep.eq[t].size() > 0)
      res.primal_eq = std::max(res.primal_eq, inf_norm(rep.eq[t]));
  }

  for (int t = 0; t < spec.T; ++t) {
    const Point p{traj.states[t], traj.controls[t], theta};
    const ScalarFn ham = detail::stage_hamiltonian(
        spec, t, mult.costate[t + 1], mult.ineq[t], mult.eq[t]);
    res.stationarity = std::max(
        res.stationarity, inf_norm(gradient(ham, p, Wrt::kU, "hamiltonian")));
    if (t >= 1) {
      const Vector lx = gradient(ham, p, Wrt::kX, "hamiltonian");
      res.costate = std::max(res.costate, inf_norm(mult.costate[t] - lx));
    }
  }
  const Point pT{traj.states[spec.T], Vector(0), theta};
  const ScalarFn hamT = detail::terminal_hamiltonian(
      spec, mult.ineq[spec.T], mult.eq[spec.T]);
  const Vector lxT = gradient(hamT, pT, Wrt::kX, "terminal hamiltonian");
  res.costate = std::max(res.costate, inf_norm(mult.costate[spec.T] - lxT));
  return res;
}

// Flags exactly the inequality components with value >= -delta.
inline ActiveSet identify_active(const ProblemSpec& spec, const Vector& theta,
                                 const Trajectory& traj, double delta) {
  require(delta > 0.0, "identify_active: delta must be positive");
  ActiveSet active;
  active.delta = delta;
  active.indices.resize(spec.T + 1);
  const ConstraintReport rep = constraint_report(spec, theta, traj);
  for (int t = 0; t <= spec.T; ++t)
    for (Eigen::Index i = 0; i < rep.ineq[t].size(); ++i)
      if (rep.ineq[t][i] >= -delta)
        active.indices[t].push_back(static_cast<int>(i));
  return active;
}

}  // namespace safepdp

#endif  // SAFEPDP_OCP_HPP
