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

#ifndef SAFEPDP_ILQR_HPP
#define SAFEPDP_ILQR_HPP

#include <Eigen/Cholesky>
#include <algorithm>
#include <optional>
#include <utility>
#include <vector>

#include "safepdp/barrier.hpp"
#include "safepdp/ocp.hpp"

namespace safepdp {

struct SolveOptions {
  int max_iters = 300;
  double tol_grad = 1e-8;   // stationarity tolerance on max_t ||dL_t/du||_inf
  double reg_init = 1e-6;   // Levenberg seed on the control Hessian
  double ftb_tau = 0.995;   // fraction-to-boundary factor
  std::optional<Trajectory> warm_start;

  double reg_max = 1e8;
  double reg_min = 1e-10;
  int ls_max = 30;
  // Observes every accepted iterate, including the initial one.
  std::function<void(const Trajectory&)> iterate_callback;
};

struct SolveResult {
  Trajectory trajectory;
  double cost = 0.0;
  int iters = 0;  // accepted steps
  bool converged = false;
  double stationarity = kInf;
};

namespace detail {

// Plain unconstrained optimal control problem.
struct PlainModel {
  const ProblemSpec& spec;
  int n() const { return spec.n; }
  int m() const { return spec.m; }
  int T() const { return spec.T; }
  HdVector x0(const HdVector& th) const { return spec.initial_state(th); }
  HdVector f(const HdVector& x, const HdVector& u, const HdVector& th) const {
    return spec.dynamics(x, u, th);
  }
  HyperDual cost_stage(int, const HdVector& x, const HdVector& u,
                       const HdVector& th) const {
    return spec.stage_cost(x, u, th);
  }
  HyperDual cost_final(const HdVector& x, const HdVector& th) const {
    return spec.final_cost(x, th);
  }
  Vector slack(int, const HdVector&, const HdVector&, const HdVector&) const {
    return Vector(0);
  }
  Vector slack_final(const HdVector&, const HdVector&) const {
    return Vector(0);
  }
};

// Barrier composite problem; slacks are -g of the base system and gate every
// candidate before any log term is evaluated.
struct BarrierModel {
  const BarrierSpec& bar;
  int n() const { return bar.base.n; }
  int m() const { return bar.base.m; }
  int T() const { return bar.base.T; }
  HdVector x0(const HdVector& th) const { return bar.base.initial_state(th); }
  HdVector f(const HdVector& x, const HdVector& u, const HdVector& th) const {
    return bar.base.dynamics(x, u, th);
  }
  HyperDual cost_stage(int t, const HdVector& x, const HdVector& u,
                       const HdVector& th) const {
    return bar.stage_cost(t, x, u, th);
  }
  HyperDual cost_final(const HdVector& x, const HdVector& th) const {
    return bar.final_cost(x, th);
  }
  Vector slack(int t, const HdVector& x, const HdVector& u,
               const HdVector& th) const {
    return -value_of(bar.base.path_ineq.fn(t, x, u, th));
  }
  Vector slack_final(const HdVector& x, const HdVector& th) const {
    return -value_of(bar.base.term_ineq.fn(x, th));
  }
};

struct RolledOut {
  Trajectory traj;
  double cost = 0.0;
  std::vector<Vector> slacks;  // T+1 entries, positive inside the domain
};

// Roll the closed-loop candidate forward. Slacks are checked before the cost
// of each step is touched, so a log barrier never sees a nonpositive
// argument; `ref_slacks` (when given) additionally enforces the
// fraction-to-boundary rule against the incumbent trajectory.
template <class Model>
std::optional<RolledOut> try_rollout(
    const Model& model, const HdVector& th, const Trajectory& base,
    const std::vector<Vector>& k, const std::vector<Matrix>& K, double alpha,
    const std::vector<Vector>* ref_slacks, double tau) {
  const int T = model.T();
  RolledOut out;
  out.traj.states.reserve(T + 1);
  out.traj.controls.reserve(T);
  out.slacks.resize(T + 1);

  auto slack_ok = [&](const Vector& s, int t) {
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      if (!(s[i] > 0.0)) return false;
      if (ref_slacks && s[i] < (1.0 - tau) * (*ref_slacks)[t][i]) return false;
    }
    return true;
  };

  HdVector x = model.x0(th);
  if (!all_finite(x)) return std::nullopt;
  out.traj.states.push_back(value_of(x));
  HyperDual cost(0.0);
  try {
    for (int t = 0; t < T; ++t) {
      Vector u = base.controls[t];
      if (!k.empty())
        u += alpha * k[t] + K[t] * (out.traj.states[t] - base.states[t]);
      const HdVector uh = lift(u);
      out.slacks[t] = model.slack(t, x, uh, th);
      if (!slack_ok(out.slacks[t], t)) return std::nullopt;
      cost += model.cost_stage(t, x, uh, th);
      x = model.f(x, uh, th);
      if (!all_finite(x)) return std::nullopt;
      out.traj.controls.push_back(u);
      out.traj.states.push_back(value_of(x));
    }
    out.slacks[T] = model.slack_final(x, th);
    if (!slack_ok(out.slacks[T], T)) return std::nullopt;
    cost += model.cost_final(x, th);
  } catch (const BarrierDomainError&) {
    return std::nullopt;
  }
  if (!isfinite(cost)) return std::nullopt;
  out.cost = cost.v;
  return out;
}

template <class Model>
SolveResult ilqr_solve(const Model& model, const Vector& theta,
                       const SolveOptions& opts) {
  const int T = model.T(), n = model.n(), m = model.m();
  const HdVector th = lift(theta);

  // Initial iterate: warm-start controls when provided, zero otherwise.
  Trajectory init;
  init.controls.assign(T, Vector::Zero(m));
  if (opts.warm_start) {
    require(opts.warm_start->horizon() == T,
            "solve: warm start horizon mismatch");
    init.controls = opts.warm_start->controls;
  }
  init.states.assign(T + 1, Vector::Zero(n));
  auto current = try_rollout(model, th, init, {}, {}, 0.0, nullptr, 0.0);
  if (!current)
    throw InfeasibleStart(
        "solve: initial trajectory is infeasible or non-finite; a strictly "
        "feasible warm start is required");

  SolveResult res;
  res.trajectory = current->traj;
  res.cost = current->cost;
  if (opts.iterate_callback) opts.iterate_callback(res.trajectory);

  double mu = std::max(opts.reg_init, opts.reg_min);
  std::vector<Vector> cx(T), cu(T), k(T), Qu_all(T);
  std::vector<Matrix> cxx(T), cxu(T), cuu(T), Fx(T), Fu(T), K(T);

  for (int iter = 0; iter < opts.max_iters; ++iter) {
    // Derivatives along the incumbent trajectory.
    for (int t = 0; t < T; ++t) {
      const Point p{res.trajectory.states[t], res.trajectory.controls[t],
                    theta};
      ScalarFn c = [&model, t](const HdVector& x, const HdVector& u,
                               const HdVector& w) {
        return model.cost_stage(t, x, u, w);
      };
      VecFn f = [&model](const HdVector& x, const HdVector& u,
                         const HdVector& w) { return model.f(x, u, w); };
      cx[t] = gradient(c, p, Wrt::kX, "stage cost");
      cu[t] = gradient(c, p, Wrt::kU, "stage cost");
      cxx[t] = hessian_block(c, p, Wrt::kX, Wrt::kX, "stage cost");
      cxu[t] = hessian_block(c, p, Wrt::kX, Wrt::kU, "stage cost");
      cuu[t] = hessian_block(c, p, Wrt::kU, Wrt::kU, "stage cost");
      Fx[t] = jacobian(f, p, Wrt::kX, "dynamics");
      Fu[t] = jacobian(f, p, Wrt::kU, "dynamics");
    }
    const Point pT{res.trajectory.states[T], Vector(0), theta};
    ScalarFn cT = [&model](const HdVector& x, const HdVector&,
                           const HdVector& w) { return model.cost_final(x, w); };
    const Vector VxT = gradient(cT, pT, Wrt::kX, "final cost");
    const Matrix VxxT = hessian_block(cT, pT, Wrt::kX, Wrt::kX, "final cost");

    // Backward pass, escalating the regularization until the control
    // Hessian factors.
    bool backward_ok = false;
    while (!backward_ok) {
      backward_ok = true;
      Vector Vx = VxT;
      Matrix Vxx = VxxT;
      for (int t = T - 1; t >= 0; --t) {
        const Vector Qx = cx[t] + Fx[t].transpose() * Vx;
        const Vector Qu = cu[t] + Fu[t].transpose() * Vx;
        const Matrix Qxx = cxx[t] + Fx[t].transpose() * Vxx * Fx[t];
        const Matrix Qux =
            cxu[t].transpose() + Fu[t].transpose() * Vxx * Fx[t];
        const Matrix Quu = cuu[t] + Fu[t].transpose() * Vxx * Fu[t];
        Matrix Quu_reg = Quu + mu * Matrix::Identity(m, m);
        Eigen::LLT<Matrix> llt(Quu_reg);
        if (llt.info() != Eigen::Success) {
          backward_ok = false;
          break;
        }
        k[t] = -llt.solve(Qu);
        K[t] = -llt.solve(Qux);
        Qu_all[t] = Qu;
        Vx = Qx + K[t].transpose() * Quu * k[t] + K[t].transpose() * Qu +
             Qux.transpose() * k[t];
        Vxx = Qxx + K[t].transpose() * Quu * K[t] +
              K[t].transpose() * Qux + Qux.transpose() * K[t];
        Vxx = 0.5 * (Vxx + Vxx.transpose()).eval();
      }
      if (!backward_ok) {
        mu *= 10.0;
        if (mu > opts.reg_max)
          throw NonPositiveCurvature(
              "solve: control Hessian not positive definite at maximum "
              "regularization");
      }
    }

    double stat = 0.0;
    double dv1 = 0.0;  // predicted first-order decrease at a full step
    for (int t = 0; t < T; ++t) {
      stat = std::max(stat, inf_norm(Qu_all[t]));
      dv1 += Qu_all[t].dot(k[t]);
    }
    res.stationarity = stat;
    if (stat <= opts.tol_grad) {
      res.converged = true;
      return res;
    }

    // Once the predicted decrease drops below what double cost sums can
    // resolve, the cost comparison says nothing; take the full Newton step
    // under the domain guards alone to polish stationarity further.
    const bool polish =
        std::abs(dv1) <= 1e-11 * (1.0 + std::abs(res.cost)) &&
        mu <= opts.reg_init + opts.reg_min;
    const double accept_slack =
        polish ? 1e-9 * (1.0 + std::abs(res.cost)) : 0.0;

    // Forward pass: backtracking line search under the domain guards.
    bool accepted = false;
    double alpha = 1.0;
    for (int ls = 0; ls < opts.ls_max; ++ls, alpha *= 0.5) {
      auto cand = try_rollout(model, th, res.trajectory, k, K, alpha,
                              &current->slacks, opts.ftb_tau);
      if (cand && cand->cost < res.cost + accept_slack) {
        current = std::move(cand);
        res.trajectory = current->traj;
        res.cost = current->cost;
        res.iters = iter + 1;
        accepted = true;
        mu = std::max(mu * 0.5, opts.reg_min);
        if (opts.iterate_callback) opts.iterate_callback(res.trajectory);
        break;
      }
      if (polish) break;  // only the full step is meaningful here
    }
    if (!accepted) {
      mu *= 10.0;
      // No further descent is representable: return the best iterate.
      if (mu > opts.reg_max) break;
    }
  }
  res.converged = res.stationarity <= opts.tol_grad;
  return res;
}

}  // namespace detail

// Unconstrained trajectory optimization. The plain-spec overload refuses
// specs that declare constraints; wrap those with to_barrier first.
inline SolveResult solve_unconstrained(const ProblemSpec& spec,
                                       const Vector& theta,
                                       const SolveOptions& opts = {}) {
  if (spec.has_constraints())
    throw ConfigError(
        "solve_unconstrained: spec has constraints; use a BarrierSpec");
  return detail::ilqr_solve(detail::PlainModel{spec}, theta, opts);
}

inline SolveResult solve_unconstrained(const BarrierSpec& bar,
                                       const Vector& theta,
                                       const SolveOptions& opts = {}) {
  return detail::ilqr_solve(detail::BarrierModel{bar}, theta, opts);
}

// Barrier path-following: solve at each gamma of a decreasing schedule, each
// stage warm-started from the previous, then recover multipliers at the
// final gamma.
inline std::pair<SolveResult, Multipliers> solve_constrained(
    const ProblemSpec& spec, const Vector& theta,
    const std::vector<double>& gamma_schedule, const SolveOptions& opts = {}) {
  require(!gamma_schedule.empty(), "solve_constrained: empty gamma schedule");
  for (size_t i = 0; i < gamma_schedule.size(); ++i) {
    require(gamma_schedule[i] > 0.0,
            "solve_constrained: gamma schedule must be positive");
    require(i == 0 || gamma_schedule[i] < gamma_schedule[i - 1],
            "solve_constrained: gamma schedule must be strictly decreasing");
  }
  SolveOptions stage_opts = opts;
  SolveResult res;
  for (double gamma : gamma_schedule) {
    res = solve_unconstrained(to_barrier(spec, gamma), theta, stage_opts);
    stage_opts.warm_start = res.trajectory;
  }
  Multipliers mult = recover_multipliers(spec, theta, res.trajectory,
                                         gamma_schedule.back());
  return {res, mult};
}

// Default geometric barrier schedule, factor 10 from `first` down to at most
// `last` (both included).
inline std::vector<double> geometric_schedule(double first, double last) {
  require(first > 0.0 && last > 0.0 && first >= last,
          "geometric_schedule: need first >= last > 0");
  std::vector<double> out;
  for (double g = first; g > last * (1.0 + 1e-12); g *= 0.1) out.push_back(g);
  out.push_back(last);
  return out;
}

}  // namespace safepdp

#endif  // SAFEPDP_ILQR_HPP
