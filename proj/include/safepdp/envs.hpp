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

#ifndef SAFEPDP_ENVS_HPP
#define SAFEPDP_ENVS_HPP

#include <random>
#include <string>
#include <vector>

#include "safepdp/ilqr.hpp"
#include "safepdp/ocp.hpp"

namespace safepdp {

enum class BoundNorm { kInfinity, kTwo };

// Benchmark environment template: forward-Euler discretized dynamics with
// physical parameters, weighted quadratic tracking cost, and box bounds on
// controls and designated state coordinates. The full parameter vector is
// laid out [dyn_params; cost_weights; x_max?; u_max?] with the bound entries
// present only when the corresponding bound is enabled; `learnable` selects
// the free components.
struct EnvConfig {
  std::string id = "pendulum";  // pendulum | cartpole | twolink
  double dt = 0.1;
  int horizon = 50;
  Vector x0;
  Vector x_goal;
  Vector dyn_params;
  Vector cost_weights;
  double u_max = 0.0;           // <= 0 disables the control bound
  double x_max = 0.0;           // <= 0 disables the state bound
  std::vector<int> x_box_dims;  // coordinates bounded by |x_i| <= x_max
  BoundNorm norm = BoundNorm::kInfinity;
  std::vector<int> learnable;

  bool has_u_bound() const { return u_max > 0.0; }
  bool has_x_bound() const { return x_max > 0.0 && !x_box_dims.empty(); }

  int dyn_dim() const { return static_cast<int>(dyn_params.size()); }
  int obj_dim() const { return static_cast<int>(cost_weights.size()); }
  int theta_dim() const {
    return dyn_dim() + obj_dim() + (has_x_bound() ? 1 : 0) +
           (has_u_bound() ? 1 : 0);
  }
  int x_max_index() const { return dyn_dim() + obj_dim(); }
  int u_max_index() const {
    return dyn_dim() + obj_dim() + (has_x_bound() ? 1 : 0);
  }

  Vector true_theta() const {
    Vector th(theta_dim());
    th.head(dyn_dim()) = dyn_params;
    th.segment(dyn_dim(), obj_dim()) = cost_weights;
    if (has_x_bound()) th[x_max_index()] = x_max;
    if (has_u_bound()) th[u_max_index()] = u_max;
    return th;
  }
};

namespace detail {

inline constexpr double kGravity = 9.81;

// Pendulum: uniform rod about its pivot, angle measured from the downward
// vertical. State [alpha, omega], parameters (mass, length, damping).
inline HdVector pendulum_step(const HdVector& x, const HdVector& u,
                              const HdVector& dyn, double dt) {
  const HyperDual mass = dyn[0], len = dyn[1], damping = dyn[2];
  const HyperDual inertia = mass * len * len / 3.0;
  const HyperDual alpha = x[0], omega = x[1];
  const HyperDual acc =
      (u[0] - damping * omega - 0.5 * mass * kGravity * len * sin(alpha)) /
      inertia;
  HdVector next(2);
  next[0] = alpha + dt * omega;
  next[1] = omega + dt * acc;
  return next;
}

// Cartpole with the pole angle measured from the downward vertical. State
// [p, q, pdot, qdot], parameters (cart mass, pole mass, pole length).
inline HdVector cartpole_step(const HdVector& x, const HdVector& u,
                              const HdVector& dyn, double dt) {
  const HyperDual mc = dyn[0], mp = dyn[1], len = dyn[2];
  const HyperDual q = x[1], pdot = x[2], qdot = x[3];
  const HyperDual s = sin(q), c = cos(q);
  const HyperDual den = mc + mp * s * s;
  const HyperDual pacc =
      (u[0] + mp * s * (len * qdot * qdot + kGravity * c)) / den;
  const HyperDual qacc = (-u[0] * c - mp * len * qdot * qdot * c * s -
                          (mc + mp) * kGravity * s) /
                         (len * den);
  HdVector next(4);
  next[0] = x[0] + dt * pdot;
  next[1] = q + dt * qdot;
  next[2] = pdot + dt * pacc;
  next[3] = qdot + dt * qacc;
  return next;
}

// Planar two-link arm, uniform rods, joint torques, angles from the downward
// vertical. State [q1, q2, q1dot, q2dot], parameters (m1, m2, l1, l2).
inline HdVector twolink_step(const HdVector& x, const HdVector& u,
                             const HdVector& dyn, double dt) {
  const HyperDual m1 = dyn[0], m2 = dyn[1], l1 = dyn[2], l2 = dyn[3];
  const HyperDual lc1 = 0.5 * l1, lc2 = 0.5 * l2;
  const HyperDual i1 = m1 * l1 * l1 / 12.0, i2 = m2 * l2 * l2 / 12.0;
  const HyperDual q1 = x[0], q2 = x[1], dq1 = x[2], dq2 = x[3];

  const HyperDual c2 = cos(q2), s2 = sin(q2);
  const HyperDual a11 =
      m1 * lc1 * lc1 + i1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * c2) +
      i2;
  const HyperDual a12 = m2 * (lc2 * lc2 + l1 * lc2 * c2) + i2;
  const HyperDual a22 = m2 * lc2 * lc2 + i2;
  const HyperDual h = m2 * l1 * lc2 * s2;
  const HyperDual cor1 = -h * (2.0 * dq1 * dq2 + dq2 * dq2);
  const HyperDual cor2 = h * dq1 * dq1;
  const HyperDual grav1 = (m1 * lc1 + m2 * l1) * kGravity * sin(q1) +
                          m2 * lc2 * kGravity * sin(q1 + q2);
  const HyperDual grav2 = m2 * lc2 * kGravity * sin(q1 + q2);

  const HyperDual rhs1 = u[0] - cor1 - grav1;
  const HyperDual rhs2 = u[1] - cor2 - grav2;
  const HyperDual det = a11 * a22 - a12 * a12;
  const HyperDual ddq1 = (a22 * rhs1 - a12 * rhs2) / det;
  const HyperDual ddq2 = (a11 * rhs2 - a12 * rhs1) / det;

  HdVector next(4);
  next[0] = q1 + dt * dq1;
  next[1] = q2 + dt * dq2;
  next[2] = dq1 + dt * ddq1;
  next[3] = dq2 + dt * ddq2;
  return next;
}

}  // namespace detail

inline ProblemSpec make_env(const EnvConfig& cfg) {
  int n = 0, m = 0, dyn_dim = 0;
  if (cfg.id == "pendulum") {
    n = 2;
    m = 1;
    dyn_dim = 3;
  } else if (cfg.id == "cartpole") {
    n = 4;
    m = 1;
    dyn_dim = 3;
  } else if (cfg.id == "twolink") {
    n = 4;
    m = 2;
    dyn_dim = 4;
  } else {
    throw ConfigError("make_env: unknown env id '" + cfg.id + "'");
  }
  if (cfg.dyn_params.size() != dyn_dim)
    throw ConfigError("make_env: " + cfg.id + " expects " +
                      std::to_string(dyn_dim) + " dynamics parameters");
  if (cfg.dyn_params.minCoeff() <= 0.0)
    throw ConfigError("make_env: masses and lengths must be positive");
  if (cfg.x0.size() != n || cfg.x_goal.size() != n ||
      cfg.cost_weights.size() != n)
    throw ConfigError("make_env: x0, x_goal and cost_weights must have dim " +
                      std::to_string(n));
  if (!(cfg.dt > 0.0) || cfg.horizon < 1)
    throw ConfigError("make_env: need dt > 0 and horizon >= 1");
  for (int i : cfg.x_box_dims)
    if (i < 0 || i >= n) throw ConfigError("make_env: x_box_dims out of range");

  ProblemSpec spec;
  spec.n = n;
  spec.m = m;
  spec.r = cfg.theta_dim();
  spec.T = cfg.horizon;

  const std::string id = cfg.id;
  const double dt = cfg.dt;
  spec.dynamics = [id, dt, dyn_dim](const HdVector& x, const HdVector& u,
                                    const HdVector& th) {
    const HdVector dyn = th.head(dyn_dim);
    if (id == "pendulum") return detail::pendulum_step(x, u, dyn, dt);
    if (id == "cartpole") return detail::cartpole_step(x, u, dyn, dt);
    return detail::twolink_step(x, u, dyn, dt);
  };

  const Vector x0 = cfg.x0;
  spec.initial_state = [x0](const HdVector&) { return lift(x0); };

  const Vector goal = cfg.x_goal;
  const int w_off = dyn_dim;
  auto tracking = [goal, w_off, n](const HdVector& x, const HdVector& th) {
    HyperDual acc(0.0);
    for (int i = 0; i < n; ++i) acc += th[w_off + i] * sq(x[i] - goal[i]);
    return acc;
  };
  spec.stage_cost = [tracking](const HdVector& x, const HdVector& u,
                               const HdVector& th) {
    HyperDual acc = tracking(x, th);
    for (Eigen::Index j = 0; j < u.size(); ++j) acc += sq(u[j]);
    return acc;
  };
  spec.final_cost = [tracking](const HdVector& x, const HdVector& th) {
    return tracking(x, th);
  };

  const bool u_bound = cfg.has_u_bound();
  const bool x_bound = cfg.has_x_bound();
  const int iu = cfg.u_max_index();
  const int ix = cfg.x_max_index();
  const std::vector<int> box = cfg.x_box_dims;
  const BoundNorm norm = cfg.norm;

  int q = 0;
  if (u_bound) q += (norm == BoundNorm::kInfinity) ? 2 * m : 1;
  if (x_bound) q += 2 * static_cast<int>(box.size());
  if (q > 0) {
    VecFn g = [u_bound, x_bound, iu, ix, box, norm, m, q](
                  const HdVector& x, const HdVector& u, const HdVector& th) {
      HdVector out(q);
      int at = 0;
      if (u_bound) {
        if (norm == BoundNorm::kInfinity) {
          for (int j = 0; j < m; ++j) {
            out[at++] = u[j] - th[iu];
            out[at++] = -u[j] - th[iu];
          }
        } else {
          HyperDual nsq(0.0);
          for (int j = 0; j < m; ++j) nsq += sq(u[j]);
          out[at++] = nsq - sq(th[iu]);
        }
      }
      if (x_bound) {
        for (int i : box) {
          out[at++] = x[i] - th[ix];
          out[at++] = -x[i] - th[ix];
        }
      }
      return out;
    };
    spec.path_ineq = StageConstraint::invariant(g, q);
  }
  return spec;
}

// Same system solved from a different (fixed) initial state.
inline ProblemSpec with_initial_state(const ProblemSpec& spec,
                                      const Vector& x0) {
  require(x0.size() == spec.n, "with_initial_state: dimension mismatch");
  ProblemSpec out = spec;
  out.initial_state = [x0](const HdVector&) { return lift(x0); };
  return out;
}

// Restriction of a spec to the free parameter components; the remaining
// entries are frozen at `fixed_full`.
inline ProblemSpec masked_spec(const ProblemSpec& full,
                               const std::vector<int>& free_idx,
                               const Vector& fixed_full) {
  require(fixed_full.size() == full.r, "masked_spec: fixed vector mismatch");
  for (int i : free_idx)
    require(i >= 0 && i < full.r, "masked_spec: index out of range");

  const Vector fixed = fixed_full;
  auto embed = [fixed, free_idx](const HdVector& th_free) {
    HdVector th = lift(fixed);
    for (size_t k = 0; k < free_idx.size(); ++k) th[free_idx[k]] = th_free[k];
    return th;
  };

  ProblemSpec out = full;
  out.r = static_cast<int>(free_idx.size());
  out.dynamics = [f = full.dynamics, embed](const HdVector& x,
                                            const HdVector& u,
                                            const HdVector& th) {
    return f(x, u, embed(th));
  };
  out.initial_state = [f = full.initial_state, embed](const HdVector& th) {
    return f(embed(th));
  };
  out.stage_cost = [f = full.stage_cost, embed](const HdVector& x,
                                                const HdVector& u,
                                                const HdVector& th) {
    return f(x, u, embed(th));
  };
  out.final_cost = [f = full.final_cost, embed](const HdVector& x,
                                                const HdVector& th) {
    return f(x, embed(th));
  };
  out.path_ineq.fn = [f = full.path_ineq.fn, embed](int t, const HdVector& x,
                                                    const HdVector& u,
                                                    const HdVector& th) {
    return f(t, x, u, embed(th));
  };
  out.path_ineq.dim = full.path_ineq.dim;
  out.path_eq.fn = [f = full.path_eq.fn, embed](int t, const HdVector& x,
                                                const HdVector& u,
                                                const HdVector& th) {
    return f(t, x, u, embed(th));
  };
  out.path_eq.dim = full.path_eq.dim;
  out.term_ineq.fn = [f = full.term_ineq.fn, embed](const HdVector& x,
                                                    const HdVector& th) {
    return f(x, embed(th));
  };
  out.term_eq.fn = [f = full.term_eq.fn, embed](const HdVector& x,
                                                const HdVector& th) {
    return f(x, embed(th));
  };
  return out;
}

inline Vector embed_params(const Vector& theta_free,
                           const std::vector<int>& free_idx,
                           const Vector& fixed_full) {
  Vector out = fixed_full;
  for (size_t k = 0; k < free_idx.size(); ++k)
    out[free_idx[k]] = theta_free[k];
  return out;
}

// Optimal demonstrations of the true system from seeded initial states.
// Angle-like coordinates (the first half of the state) are perturbed; the
// velocity half starts at the configured value.
inline std::vector<Trajectory> make_demos(const EnvConfig& cfg, int n_episodes,
                                          unsigned seed,
                                          const std::vector<double>&
                                              gamma_schedule = {},
                                          double perturbation = 0.15) {
  require(n_episodes >= 0, "make_demos: negative episode count");
  const ProblemSpec spec = make_env(cfg);
  const Vector theta = cfg.true_theta();
  const std::vector<double> schedule =
      gamma_schedule.empty() ? geometric_schedule(1e-1, 1e-6) : gamma_schedule;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  std::vector<Trajectory> demos;
  demos.reserve(n_episodes);
  for (int e = 0; e < n_episodes; ++e) {
    Vector x0 = cfg.x0;
    for (Eigen::Index i = 0; i < x0.size() / 2; ++i)
      x0[i] += perturbation * unit(rng);
    const ProblemSpec episode = with_initial_state(spec, x0);
    SolveOptions opts;
    opts.tol_grad = 1e-9;
    opts.max_iters = 500;
    auto [result, mult] = solve_constrained(episode, theta, schedule, opts);
    demos.push_back(result.trajectory);
  }
  return demos;
}

}  // namespace safepdp

#endif  // SAFEPDP_ENVS_HPP
