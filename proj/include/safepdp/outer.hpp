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

#ifndef SAFEPDP_OUTER_HPP
#define SAFEPDP_OUTER_HPP

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "safepdp/auxlqr.hpp"
#include "safepdp/ilqr.hpp"

namespace safepdp {

// How the inner trajectory and its parameter derivative are obtained:
//  A: constrained solve, then the equality-constrained auxiliary system over
//     the identified active set;
//  B: barrier solve and the barrier auxiliary system at the same gamma;
//  C: constrained solve, barrier auxiliary system at that trajectory.
enum class GradientStrategy { kA, kB, kC };

inline char strategy_name(GradientStrategy s) {
  switch (s) {
    case GradientStrategy::kA:
      return 'A';
    case GradientStrategy::kB:
      return 'B';
    default:
      return 'C';
  }
}

// Partials of a scalar function of (trajectories, theta).
struct TaskGrad {
  std::vector<std::vector<Vector>> dx;  // per episode, T+1 entries
  std::vector<std::vector<Vector>> du;  // per episode, T entries
  Vector dtheta;

  TaskGrad() = default;
  TaskGrad(const std::vector<Trajectory>& trajs, int r) {
    dx.resize(trajs.size());
    du.resize(trajs.size());
    for (size_t e = 0; e < trajs.size(); ++e) {
      dx[e].resize(trajs[e].states.size());
      du[e].resize(trajs[e].controls.size());
      for (size_t t = 0; t < trajs[e].states.size(); ++t)
        dx[e][t] = Vector::Zero(trajs[e].states[t].size());
      for (size_t t = 0; t < trajs[e].controls.size(); ++t)
        du[e][t] = Vector::Zero(trajs[e].controls[t].size());
    }
    dtheta = Vector::Zero(r);
  }

  TaskGrad& operator+=(const TaskGrad& o) {
    for (size_t e = 0; e < dx.size(); ++e) {
      for (size_t t = 0; t < dx[e].size(); ++t) dx[e][t] += o.dx[e][t];
      for (size_t t = 0; t < du[e].size(); ++t) du[e][t] += o.du[e][t];
    }
    dtheta += o.dtheta;
    return *this;
  }
};

// Task loss and task constraints with exact partials, evaluated on the inner
// solution (one trajectory per episode).
struct TaskSpec {
  std::function<double(const std::vector<Trajectory>&, const Vector&)> loss;
  std::function<TaskGrad(const std::vector<Trajectory>&, const Vector&)>
      loss_grad;

  int num_constraints = 0;
  std::function<std::vector<double>(const std::vector<Trajectory>&,
                                    const Vector&)>
      constraints;
  // Partials of sum_i weights[i] * R_i in a single pass.
  std::function<TaskGrad(const std::vector<Trajectory>&, const Vector&,
                         const std::vector<double>&)>
      constraints_weighted_grad;
};

struct OuterOptions {
  double epsilon = 1e-2;  // outer barrier parameter
  double gamma = 1e-2;    // inner barrier parameter
  double lr = 1e-3;       // learning rate of the gradient descent
  int max_iters = 100;    // per continuation rung
  std::vector<std::pair<double, double>> continuation;  // (epsilon, gamma)
  unsigned seed = 0;
  GradientStrategy gradient_strategy = GradientStrategy::kB;

  double tol_grad = 1e-6;  // outer gradient-norm stopping rule per rung
  int max_shrinks = 20;    // step halvings on inner failure
};

struct RunRecord {
  int iter = 0;  // global iteration index across rungs
  double epsilon = 0.0;
  double gamma = 0.0;
  double objective = 0.0;  // W = loss + outer barrier terms
  double loss = 0.0;
  double max_R = -kInf;
  double max_g = -kInf;  // max inner inequality value
  double grad_norm = 0.0;
  Vector theta;
};

struct RunLog {
  std::vector<RunRecord> records;
  Vector theta_final;
  bool hit_gradient_tol = false;
  // Inner solutions at the first and final accepted iterates, for artifact
  // dumps and post-hoc checks.
  std::vector<Trajectory> initial_trajectories;
  std::vector<Trajectory> final_trajectories;
};

// Inner problem abstraction: maps theta to trajectories and their parameter
// derivatives. Implementations may keep warm-start state between solves.
class Pipeline {
 public:
  virtual ~Pipeline() = default;
  virtual int theta_dim() const = 0;
  virtual int episodes() const = 0;
  virtual std::vector<Trajectory> solve_inner(const Vector& theta,
                                              double gamma,
                                              GradientStrategy strategy) = 0;
  virtual std::vector<TrajectoryGradient> inner_gradient(
      const Vector& theta, double gamma, GradientStrategy strategy,
      const std::vector<Trajectory>& trajs) = 0;
  // Largest inner inequality value across episodes, -inf when unconstrained.
  virtual double max_inner_ineq(const Vector&,
                                const std::vector<Trajectory>&) {
    return -kInf;
  }
};

// W = loss - epsilon * sum_i ln(-R_i). Refuses to evaluate outside the safe
// region.
inline double outer_objective(const TaskSpec& task,
                              const std::vector<Trajectory>& trajs,
                              const Vector& theta, double epsilon) {
  double w = task.loss(trajs, theta);
  if (task.num_constraints > 0) {
    const std::vector<double> R = task.constraints(trajs, theta);
    for (size_t i = 0; i < R.size(); ++i) {
      if (R[i] >= 0.0)
        throw SafetyBreach("outer_objective: task constraint " +
                           std::to_string(i) + " is " + std::to_string(R[i]));
      w += -epsilon * std::log(-R[i]);
    }
  }
  return w;
}

namespace detail {

inline Vector chain_rule(const TaskGrad& g,
                         const std::vector<TrajectoryGradient>& grads) {
  Vector out = g.dtheta;
  for (size_t e = 0; e < grads.size(); ++e) {
    for (size_t t = 0; t < grads[e].X.size(); ++t)
      out += grads[e].X[t].transpose() * g.dx[e][t];
    for (size_t t = 0; t < grads[e].U.size(); ++t)
      out += grads[e].U[t].transpose() * g.du[e][t];
  }
  return out;
}

inline TaskGrad objective_partials(const TaskSpec& task,
                                   const std::vector<Trajectory>& trajs,
                                   const Vector& theta, double epsilon,
                                   const std::vector<double>& R) {
  TaskGrad g = task.loss_grad(trajs, theta);
  if (!R.empty()) {
    std::vector<double> weights(R.size());
    for (size_t i = 0; i < R.size(); ++i) weights[i] = epsilon / (-R[i]);
    g += task.constraints_weighted_grad(trajs, theta, weights);
  }
  return g;
}

}  // namespace detail

// dW/dtheta = dW_partial/dtheta + (dW/dxi) * (dxi/dtheta), with dxi/dtheta
// from the auxiliary system of the chosen strategy.
inline Vector outer_gradient(Pipeline& pipeline, const TaskSpec& task,
                             const Vector& theta, double epsilon, double gamma,
                             GradientStrategy strategy) {
  const std::vector<Trajectory> trajs =
      pipeline.solve_inner(theta, gamma, strategy);
  std::vector<double> R;
  if (task.num_constraints > 0) {
    R = task.constraints(trajs, theta);
    for (double ri : R)
      if (ri >= 0.0)
        throw SafetyBreach("outer_gradient: task constraint violated");
  }
  const TaskGrad g = detail::objective_partials(task, trajs, theta, epsilon, R);
  const std::vector<TrajectoryGradient> grads =
      pipeline.inner_gradient(theta, gamma, strategy, trajs);
  return detail::chain_rule(g, grads);
}

// Continuation loop: for each (epsilon, gamma) rung, vanilla gradient
// descent with step halving on inner failures or candidate safety-domain
// violations. Every accepted iterate is logged; the log is certified safe
// before returning.
inline RunLog run(Pipeline& pipeline, const TaskSpec& task,
                  const Vector& theta0, const OuterOptions& opts) {
  std::vector<std::pair<double, double>> rungs = opts.continuation;
  if (rungs.empty()) rungs.push_back({opts.epsilon, opts.gamma});
  for (const auto& [eps, gam] : rungs)
    if (!(eps > 0.0) || !(gam > 0.0))
      throw ConfigError("run: continuation parameters must be positive");

  RunLog log;
  Vector theta = theta0;
  int global_iter = 0;
  bool first_eval = true;

  for (const auto& [epsilon, gamma] : rungs) {
    std::vector<Trajectory> trajs;
    std::vector<double> R;
    try {
      trajs = pipeline.solve_inner(theta, gamma, opts.gradient_strategy);
      if (task.num_constraints > 0) {
        R = task.constraints(trajs, theta);
        for (double ri : R)
          if (ri >= 0.0)
            throw UnsafeInitialization(
                "run: task constraint nonnegative at rung start (R = " +
                std::to_string(ri) + ")");
      }
    } catch (const InfeasibleStart& e) {
      throw UnsafeInitialization(std::string("run: inner problem infeasible "
                                             "at rung start: ") +
                                 e.what());
    } catch (const BarrierDomainError& e) {
      throw UnsafeInitialization(std::string("run: inner problem outside the "
                                             "barrier domain at rung start: ") +
                                 e.what());
    } catch (const UnsafeInitialization&) {
      if (first_eval) throw;
      throw SafetyBreach(
          "run: safety lost when switching continuation rung");
    }
    first_eval = false;

    for (int it = 0;; ++it) {
      const double loss = task.loss(trajs, theta);
      const double w = outer_objective(task, trajs, theta, epsilon);
      const TaskGrad g =
          detail::objective_partials(task, trajs, theta, epsilon, R);
      const std::vector<TrajectoryGradient> grads =
          pipeline.inner_gradient(theta, gamma, opts.gradient_strategy, trajs);
      const Vector dW = detail::chain_rule(g, grads);

      RunRecord rec;
      rec.iter = global_iter++;
      rec.epsilon = epsilon;
      rec.gamma = gamma;
      rec.objective = w;
      rec.loss = loss;
      rec.max_R = R.empty() ? -kInf
                            : *std::max_element(R.begin(), R.end());
      rec.max_g = pipeline.max_inner_ineq(theta, trajs);
      rec.grad_norm = dW.norm();
      rec.theta = theta;
      if (log.records.empty()) log.initial_trajectories = trajs;
      log.records.push_back(rec);

      if (rec.grad_norm < opts.tol_grad) {
        log.hit_gradient_tol = true;
        break;
      }
      if (it >= opts.max_iters) break;

      // Candidate step with halving on inner failure, on a safety-domain
      // violation, and on objective increase. Candidates outside the safe
      // region are never evaluated through the barrier objective.
      Vector step = opts.lr * dW;
      bool accepted = false;
      bool any_evaluated = false;
      bool last_was_solver_failure = false;
      std::string last_failure;
      for (int shrink = 0; shrink <= opts.max_shrinks; ++shrink) {
        const Vector cand = theta - step;
        try {
          std::vector<Trajectory> cand_trajs =
              pipeline.solve_inner(cand, gamma, opts.gradient_strategy);
          std::vector<double> cand_R;
          bool safe = true;
          if (task.num_constraints > 0) {
            cand_R = task.constraints(cand_trajs, cand);
            for (double ri : cand_R) safe = safe && ri < 0.0;
          }
          if (!safe) {
            last_failure = "candidate violates a task constraint";
            last_was_solver_failure = false;
            step *= 0.5;
            continue;
          }
          any_evaluated = true;
          const double cand_w = outer_objective(task, cand_trajs, cand, epsilon);
          if (cand_w > w + 1e-12 * (1.0 + std::abs(w))) {
            step *= 0.5;
            continue;
          }
          theta = cand;
          trajs = std::move(cand_trajs);
          R = std::move(cand_R);
          accepted = true;
          break;
        } catch (const Error& e) {
          last_failure = e.what();
          last_was_solver_failure = true;
          step *= 0.5;
        }
      }
      if (!accepted) {
        // Inner-solver failures that survive every halving abort the run.
        // Iterates pinned against a task-constraint boundary (only safety
        // rejections remain at the smallest step) end the rung instead:
        // the incumbent is safe and no usable step exists.
        if (!any_evaluated && last_was_solver_failure)
          throw LineSearchFailure(
              "run: iteration " + std::to_string(global_iter - 1) +
              ": no candidate evaluable after " +
              std::to_string(opts.max_shrinks) +
              " outer step halvings (last failure: " + last_failure +
              "; |dW| = " + std::to_string(dW.norm()) + ")");
        break;  // no representable descent left at this rung
      }
    }
    log.final_trajectories = trajs;
  }

  // Post-hoc certification of the in-progress safety invariant.
  if (task.num_constraints > 0) {
    for (const RunRecord& rec : log.records)
      if (!(rec.max_R < 0.0))
        throw SafetyBreach("run: accepted iterate " +
                           std::to_string(rec.iter) +
                           " violates a task constraint");
  }
  log.theta_final = theta;
  return log;
}

}  // namespace safepdp

#endif  // SAFEPDP_OUTER_HPP
