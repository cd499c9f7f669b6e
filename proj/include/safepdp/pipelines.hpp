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

#ifndef SAFEPDP_PIPELINES_HPP
#define SAFEPDP_PIPELINES_HPP

#include <memory>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "safepdp/envs.hpp"
#include "safepdp/outer.hpp"

namespace safepdp {

// One-hidden-layer feedforward policy u = W2 tanh(W1 x + b1) + b2 with node
// counts n-n-m. Parameters are packed [vec(W1); b1; vec(W2); b2],
// column-major.
struct NeuralPolicy {
  int n = 0;
  int m = 0;

  int param_dim() const { return n * n + n + m * n + m; }

  HdVector forward(const HdVector& x, const HdVector& th) const {
    HdVector hidden(n);
    for (int i = 0; i < n; ++i) {
      HyperDual acc = th[n * n + i];  // b1
      for (int j = 0; j < n; ++j) acc += th[j * n + i] * x[j];
      hidden[i] = tanh(acc);
    }
    const int w2 = n * n + n;
    const int b2 = w2 + m * n;
    HdVector out(m);
    for (int i = 0; i < m; ++i) {
      HyperDual acc = th[b2 + i];
      for (int j = 0; j < n; ++j) acc += th[w2 + j * m + i] * hidden[j];
      out[i] = acc;
    }
    return out;
  }

  Vector forward(const Vector& x, const Vector& th) const {
    return value_of(forward(lift(x), lift(th)));
  }
};

// Open-loop control as a Lagrange interpolation polynomial of degree N with
// uniformly spaced pivot times over [0, T-1]; the parameters are the stacked
// pivot controls.
struct PolyControl {
  int m = 0;
  int degree = 0;  // N
  int T = 0;

  int param_dim() const { return m * (degree + 1); }

  double pivot_time(int i) const {
    return degree == 0 ? 0.0
                       : static_cast<double>(i) *
                             (static_cast<double>(T - 1) / degree);
  }

  Vector basis(double t) const {
    Vector b(degree + 1);
    for (int i = 0; i <= degree; ++i) {
      double prod = 1.0;
      for (int j = 0; j <= degree; ++j) {
        if (j == i) continue;
        prod *= (t - pivot_time(j)) / (pivot_time(i) - pivot_time(j));
      }
      b[i] = prod;
    }
    return b;
  }

  Vector control(int t, const Vector& theta) const {
    const Vector b = basis(static_cast<double>(t));
    Vector u = Vector::Zero(m);
    for (int i = 0; i <= degree; ++i) u += b[i] * theta.segment(i * m, m);
    return u;
  }

  // du(t)/dtheta, an m x m(N+1) interpolation selector.
  Matrix u_theta(int t) const {
    const Vector b = basis(static_cast<double>(t));
    Matrix out = Matrix::Zero(m, param_dim());
    for (int i = 0; i <= degree; ++i)
      out.block(0, i * m, m, m) = b[i] * Matrix::Identity(m, m);
    return out;
  }
};

namespace detail {

// Shared machinery for inner systems that are plain rollouts of a fixed
// dynamics under a parameterized control law.
class RolloutPipelineBase : public Pipeline {
 public:
  RolloutPipelineBase(ProblemSpec spec, Vector theta_env)
      : spec_(std::move(spec)), theta_env_(std::move(theta_env)) {}

  int episodes() const override { return 1; }

  std::vector<Trajectory> solve_inner(const Vector& theta, double,
                                      GradientStrategy) override {
    Trajectory traj;
    traj.states.reserve(spec_.T + 1);
    traj.controls.reserve(spec_.T);
    const HdVector the = lift(theta_env_);
    HdVector x = spec_.initial_state(the);
    traj.states.push_back(value_of(x));
    for (int t = 0; t < spec_.T; ++t) {
      const Vector u = control(t, traj.states[t], theta);
      x = spec_.dynamics(x, lift(u), the);
      if (!all_finite(x))
        throw NonFiniteError("rollout diverged at step " + std::to_string(t));
      traj.controls.push_back(u);
      traj.states.push_back(value_of(x));
    }
    return {traj};
  }

  std::vector<TrajectoryGradient> inner_gradient(
      const Vector& theta, double, GradientStrategy,
      const std::vector<Trajectory>& trajs) override {
    const Trajectory& traj = trajs[0];
    std::vector<Matrix> Fx(spec_.T), Fu(spec_.T), Ux(spec_.T), Ue(spec_.T);
    for (int t = 0; t < spec_.T; ++t) {
      const Point p{traj.states[t], traj.controls[t], theta_env_};
      Fx[t] = jacobian(spec_.dynamics, p, Wrt::kX, "dynamics");
      Fu[t] = jacobian(spec_.dynamics, p, Wrt::kU, "dynamics");
      control_jacobians(t, traj.states[t], theta, Ux[t], Ue[t]);
    }
    return {solve_aux_feedback(Fx, Fu, Ux, Ue,
                               Matrix::Zero(spec_.n, theta.size()))};
  }

  double max_inner_ineq(const Vector&,
                        const std::vector<Trajectory>& trajs) override {
    return constraint_report(spec_, theta_env_, trajs[0]).max_ineq;
  }

  const ProblemSpec& spec() const { return spec_; }
  const Vector& theta_env() const { return theta_env_; }

 protected:
  virtual Vector control(int t, const Vector& x, const Vector& theta) = 0;
  virtual void control_jacobians(int t, const Vector& x, const Vector& theta,
                                 Matrix& Ux, Matrix& Ue) = 0;

  ProblemSpec spec_;
  Vector theta_env_;  // frozen environment parameters
};

}  // namespace detail

// Closed-loop rollouts under a neural feedback policy.
class PolicyPipeline : public detail::RolloutPipelineBase {
 public:
  PolicyPipeline(ProblemSpec spec, Vector theta_env, NeuralPolicy policy)
      : RolloutPipelineBase(std::move(spec), std::move(theta_env)),
        policy_(policy) {}

  int theta_dim() const override { return policy_.param_dim(); }

 protected:
  Vector control(int t, const Vector& x, const Vector& theta) override {
    (void)t;
    return policy_.forward(x, theta);
  }
  void control_jacobians(int, const Vector& x, const Vector& theta, Matrix& Ux,
                         Matrix& Ue) override {
    VecFn pol = [this](const HdVector& xs, const HdVector&,
                       const HdVector& th) { return policy_.forward(xs, th); };
    const Point p{x, Vector(0), theta};
    Ux = jacobian(pol, p, Wrt::kX, "policy");
    Ue = jacobian(pol, p, Wrt::kTheta, "policy");
  }

 private:
  NeuralPolicy policy_;
};

// Open-loop rollouts under interpolated pivot controls.
class PlanPipeline : public detail::RolloutPipelineBase {
 public:
  PlanPipeline(ProblemSpec spec, Vector theta_env, PolyControl ctrl)
      : RolloutPipelineBase(std::move(spec), std::move(theta_env)),
        ctrl_(ctrl) {}

  int theta_dim() const override { return ctrl_.param_dim(); }
  const PolyControl& control_law() const { return ctrl_; }

 protected:
  Vector control(int t, const Vector&, const Vector& theta) override {
    return ctrl_.control(t, theta);
  }
  void control_jacobians(int t, const Vector&, const Vector&, Matrix& Ux,
                         Matrix& Ue) override {
    Ux = Matrix::Zero(ctrl_.m, spec_.n);
    Ue = ctrl_.u_theta(t);
  }

 private:
  PolyControl ctrl_;
};

// Inner constrained optimal-control solves for learning system components
// from demonstrations. Per-episode warm starts persist across outer
// iterations.
class OcpPipeline : public Pipeline {
 public:
  OcpPipeline(ProblemSpec spec, std::vector<Vector> episode_x0,
              SolveOptions inner_opts = {},
              std::vector<double> constrained_schedule = {},
              double active_delta = 1e-3)
      : opts_(inner_opts),
        schedule_(constrained_schedule.empty()
                      ? geometric_schedule(1e-1, 1e-6)
                      : std::move(constrained_schedule)),
        delta_(active_delta) {
    if (episode_x0.empty()) {
      specs_.push_back(spec);
    } else {
      for (const Vector& x0 : episode_x0)
        specs_.push_back(with_initial_state(spec, x0));
    }
    warm_.resize(specs_.size());
  }

  int theta_dim() const override { return specs_[0].r; }
  int episodes() const override { return static_cast<int>(specs_.size()); }

  std::vector<Trajectory> solve_inner(const Vector& theta, double gamma,
                                      GradientStrategy strategy) override {
    std::vector<Trajectory> out;
    out.reserve(specs_.size());
    for (size_t e = 0; e < specs_.size(); ++e) {
      SolveOptions o = opts_;
      if (warm_[e]) o.warm_start = *warm_[e];
      SolveResult res;
      if (strategy == GradientStrategy::kB) {
        res = solve_unconstrained(to_barrier(specs_[e], gamma), theta, o);
      } else {
        res = solve_constrained(specs_[e], theta, schedule_, o).first;
      }
      warm_[e] = res.trajectory;
      out.push_back(std::move(res.trajectory));
    }
    return out;
  }

  std::vector<TrajectoryGradient> inner_gradient(
      const Vector& theta, double gamma, GradientStrategy strategy,
      const std::vector<Trajectory>& trajs) override {
    std::vector<TrajectoryGradient> out;
    out.reserve(specs_.size());
    for (size_t e = 0; e < specs_.size(); ++e) {
      if (strategy == GradientStrategy::kA) {
        const Multipliers mult =
            recover_multipliers(specs_[e], theta, trajs[e], schedule_.back());
        const ActiveSet active =
            identify_active(specs_[e], theta, trajs[e], delta_);
        out.push_back(
            solve_aux(build_aux_constrained(specs_[e], theta, trajs[e], mult,
                                            active)));
      } else {
        out.push_back(solve_aux(
            build_aux_barrier(to_barrier(specs_[e], gamma), theta, trajs[e])));
      }
    }
    return out;
  }

  double max_inner_ineq(const Vector& theta,
                        const std::vector<Trajectory>& trajs) override {
    double mx = -kInf;
    for (size_t e = 0; e < specs_.size(); ++e)
      mx = std::max(mx, constraint_report(specs_[e], theta, trajs[e]).max_ineq);
    return mx;
  }

  const ProblemSpec& episode_spec(int e) const { return specs_[e]; }

 private:
  std::vector<ProblemSpec> specs_;
  SolveOptions opts_;
  std::vector<double> schedule_;
  double delta_;
  std::vector<std::optional<Trajectory>> warm_;
};

// Task loss = control cost of the environment at its true parameters; task
// constraints = the environment inequality constraints at every step.
inline TaskSpec control_cost_task(const ProblemSpec& spec,
                                  const Vector& theta_env) {
  TaskSpec task;
  task.loss = [&spec, theta_env](const std::vector<Trajectory>& trajs,
                                 const Vector&) {
    return total_cost(spec, theta_env, trajs[0]);
  };
  task.loss_grad = [&spec, theta_env](const std::vector<Trajectory>& trajs,
                                      const Vector& theta) {
    TaskGrad g(trajs, static_cast<int>(theta.size()));
    const Trajectory& traj = trajs[0];
    for (int t = 0; t < spec.T; ++t) {
      const Point p{traj.states[t], traj.controls[t], theta_env};
      g.dx[0][t] = gradient(spec.stage_cost, p, Wrt::kX, "stage cost");
      g.du[0][t] = gradient(spec.stage_cost, p, Wrt::kU, "stage cost");
    }
    ScalarFn cT = [&spec](const HdVector& x, const HdVector&,
                          const HdVector& th) { return spec.final_cost(x, th); };
    const Point pT{traj.states[spec.T], Vector(0), theta_env};
    g.dx[0][spec.T] = gradient(cT, pT, Wrt::kX, "final cost");
    return g;
  };

  int l = 0;
  for (int t = 0; t < spec.T; ++t) l += spec.path_ineq.dim(t);
  l += spec.term_ineq.dim;
  task.num_constraints = l;
  if (l > 0) {
    task.constraints = [&spec, theta_env](const std::vector<Trajectory>& trajs,
                                          const Vector&) {
      const ConstraintReport rep = constraint_report(spec, theta_env, trajs[0]);
      std::vector<double> R;
      for (const Vector& g : rep.ineq)
        for (Eigen::Index i = 0; i < g.size(); ++i) R.push_back(g[i]);
      return R;
    };
    task.constraints_weighted_grad =
        [&spec, theta_env](const std::vector<Trajectory>& trajs,
                           const Vector& theta,
                           const std::vector<double>& weights) {
          TaskGrad g(trajs, static_cast<int>(theta.size()));
          const Trajectory& traj = trajs[0];
          size_t at = 0;
          for (int t = 0; t < spec.T; ++t) {
            const int q = spec.path_ineq.dim(t);
            if (q == 0) continue;
            VecFn gf = [&spec, t](const HdVector& x, const HdVector& u,
                                  const HdVector& th) {
              return spec.path_ineq.fn(t, x, u, th);
            };
            const Point p{traj.states[t], traj.controls[t], theta_env};
            const Matrix Jx = jacobian(gf, p, Wrt::kX, "g");
            const Matrix Ju = jacobian(gf, p, Wrt::kU, "g");
            Vector w(q);
            for (int i = 0; i < q; ++i) w[i] = weights[at + i];
            g.dx[0][t] += Jx.transpose() * w;
            g.du[0][t] += Ju.transpose() * w;
            at += q;
          }
          if (spec.term_ineq.dim > 0) {
            VecFn gf = [&spec](const HdVector& x, const HdVector&,
                               const HdVector& th) {
              return spec.term_ineq.fn(x, th);
            };
            const Point p{traj.states[spec.T], Vector(0), theta_env};
            const Matrix Jx = jacobian(gf, p, Wrt::kX, "g_T");
            Vector w(spec.term_ineq.dim);
            for (int i = 0; i < spec.term_ineq.dim; ++i) w[i] = weights[at + i];
            g.dx[0][spec.T] += Jx.transpose() * w;
          }
          return g;
        };
  }
  return task;
}

// Reproducing loss: summed squared discrepancy to the demonstrations.
inline TaskSpec reproducing_task(const std::vector<Trajectory>& demos) {
  TaskSpec task;
  task.loss = [demos](const std::vector<Trajectory>& trajs, const Vector&) {
    double acc = 0.0;
    for (size_t e = 0; e < trajs.size(); ++e)
      acc += (trajs[e].flatten() - demos[e].flatten()).squaredNorm();
    return acc;
  };
  task.loss_grad = [demos](const std::vector<Trajectory>& trajs,
                           const Vector& theta) {
    TaskGrad g(trajs, static_cast<int>(theta.size()));
    for (size_t e = 0; e < trajs.size(); ++e) {
      for (size_t t = 0; t < trajs[e].states.size(); ++t)
        g.dx[e][t] = 2.0 * (trajs[e].states[t] - demos[e].states[t]);
      for (size_t t = 0; t < trajs[e].controls.size(); ++t)
        g.du[e][t] = 2.0 * (trajs[e].controls[t] - demos[e].controls[t]);
    }
    return g;
  };
  task.num_constraints = 0;
  return task;
}

// Supervised pretraining of a safe policy: least-squares regression of the
// policy outputs onto a feasible reference trajectory, then a closed-loop
// safety check of the fitted policy.
inline Vector imitate_init(const ProblemSpec& spec, const Vector& theta_env,
                           const NeuralPolicy& policy, Vector theta0,
                           const Trajectory& reference, int iters,
                           double lr = 0.05) {
  auto regression = [&](const Vector& th, Vector* grad) {
    double loss = 0.0;
    if (grad) *grad = Vector::Zero(th.size());
    for (int t = 0; t < reference.horizon(); ++t) {
      const Vector u = policy.forward(reference.states[t], th);
      const Vector err = u - reference.controls[t];
      loss += err.squaredNorm();
      if (grad) {
        VecFn pol = [&policy](const HdVector& xs, const HdVector&,
                              const HdVector& w) {
          return policy.forward(xs, w);
        };
        const Point p{reference.states[t], Vector(0), th};
        const Matrix Ue = jacobian(pol, p, Wrt::kTheta, "policy");
        *grad += 2.0 * Ue.transpose() * err;
      }
    }
    return loss;
  };

  Vector theta = std::move(theta0);
  double loss = regression(theta, nullptr);
  for (int it = 0; it < iters; ++it) {
    Vector grad;
    regression(theta, &grad);
    double step = lr;
    for (int ls = 0; ls < 30; ++ls, step *= 0.5) {
      const Vector cand = theta - step * grad;
      const double cand_loss = regression(cand, nullptr);
      if (cand_loss <= loss) {
        theta = cand;
        loss = cand_loss;
        break;
      }
    }
  }

  // Closed-loop safety check of the fitted policy.
  PolicyPipeline probe(spec, theta_env, policy);
  const std::vector<Trajectory> rolled =
      probe.solve_inner(theta, 0.0, GradientStrategy::kB);
  const double worst = constraint_report(spec, theta_env, rolled[0]).max_ineq;
  if (worst >= 0.0)
    throw InitNotSafe(
        "imitate_init: fitted policy rollout violates a constraint (max g = " +
        std::to_string(worst) + ")");
  return theta;
}

// Safe policy optimization: closed-loop rollouts as the inner map, control
// cost as the task loss, environment inequalities as task constraints.
inline RunLog policy_opt(const ProblemSpec& spec, const Vector& theta_env,
                         const NeuralPolicy& policy, const Vector& theta0,
                         const OuterOptions& opts) {
  PolicyPipeline pipeline(spec, theta_env, policy);
  const TaskSpec task = control_cost_task(pipeline.spec(), theta_env);
  return run(pipeline, task, theta0, opts);
}

// Safe motion planning over interpolation pivots.
inline RunLog plan(const ProblemSpec& spec, const Vector& theta_env,
                   const PolyControl& ctrl, const Vector& pivots0,
                   const OuterOptions& opts) {
  PlanPipeline pipeline(spec, theta_env, ctrl);
  const TaskSpec task = control_cost_task(pipeline.spec(), theta_env);
  return run(pipeline, task, pivots0, opts);
}

// Jointly learn masked system components from demonstrations by minimizing
// the reproducing loss. theta0 is the free (masked) parameter vector.
inline RunLog learn_mpc(const ProblemSpec& full_spec,
                        const std::vector<Trajectory>& demos,
                        const std::vector<int>& mask, const Vector& fixed_full,
                        const Vector& theta0, GradientStrategy strategy,
                        const OuterOptions& opts,
                        const SolveOptions& inner_opts = {},
                        const std::vector<double>& constrained_schedule = {},
                        double active_delta = 1e-3) {
  require(!demos.empty(), "learn_mpc: no demonstrations");
  std::vector<Vector> x0s;
  for (const Trajectory& d : demos) x0s.push_back(d.states[0]);
  const ProblemSpec free_spec = masked_spec(full_spec, mask, fixed_full);
  OcpPipeline pipeline(free_spec, x0s, inner_opts, constrained_schedule,
                       active_delta);
  const TaskSpec task = reproducing_task(demos);
  OuterOptions o = opts;
  o.gradient_strategy = strategy;
  return run(pipeline, task, theta0, o);
}

// Seeded random initialization within +/-50% of a nominal guess.
inline Vector random_init_around(const Vector& nominal, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-0.5, 0.5);
  Vector out = nominal;
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] *= 1.0 + unit(rng);
  return out;
}

}  // namespace safepdp

#endif  // SAFEPDP_PIPELINES_HPP
