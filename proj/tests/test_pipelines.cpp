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

#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "safepdp/pipelines.hpp"
#include "support/oracles.hpp"

using namespace safepdp;

namespace {

EnvConfig pendulum_cfg(int T) {
  EnvConfig cfg;
  cfg.id = "pendulum";
  cfg.dt = 0.05;
  cfg.horizon = T;
  cfg.x0 = Vector::Zero(2);
  cfg.x_goal = (Vector(2) << 3.141592653589793, 0.0).finished();
  cfg.dyn_params = (Vector(3) << 1.0, 1.0, 0.1).finished();
  cfg.cost_weights = (Vector(2) << 1.0, 0.1).finished();
  cfg.u_max = 8.0;
  return cfg;
}

ProblemSpec toy_integrator(int T, double w) {
  ProblemSpec spec;
  spec.n = 1;
  spec.m = 1;
  spec.r = 0;
  spec.T = T;
  spec.dynamics = [](const HdVector& x, const HdVector& u, const HdVector&) {
    HdVector y(1);
    y[0] = x[0] + u[0];
    return y;
  };
  spec.initial_state = [](const HdVector&) {
    HdVector y(1);
    y[0] = HyperDual(0.0);
    return y;
  };
  spec.stage_cost = [w](const HdVector& x, const HdVector& u,
                        const HdVector&) {
    return u[0] * u[0] + w * sq(x[0] - 1.0);
  };
  spec.final_cost = [w](const HdVector& x, const HdVector&) {
    return w * sq(x[0] - 1.0);
  };
  return spec;
}

}  // namespace

TEST_CASE("lagrange interpolation hits the pivots exactly") {
  PolyControl ctrl{2, 6, 25};
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(-2.0, 2.0);
  Vector theta(ctrl.param_dim());
  for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] = unit(rng);
  for (int i = 0; i <= ctrl.degree; ++i) {
    const Vector b = ctrl.basis(ctrl.pivot_time(i));
    for (int j = 0; j <= ctrl.degree; ++j)
      CHECK(std::abs(b[j] - (i == j ? 1.0 : 0.0)) < 1e-9);
  }
}

TEST_CASE("control jacobian at a pivot time is the selector") {
  PolyControl ctrl{1, 4, 21};
  const Matrix ue = ctrl.u_theta(static_cast<int>(ctrl.pivot_time(2)));
  for (int i = 0; i <= 4; ++i)
    CHECK(std::abs(ue(0, i) - (i == 2 ? 1.0 : 0.0)) < 1e-9);
}

TEST_CASE("neural policy jacobians match finite differences") {
  NeuralPolicy policy{2, 1};
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> unit(-0.5, 0.5);
  Vector th(policy.param_dim());
  for (Eigen::Index i = 0; i < th.size(); ++i) th[i] = unit(rng);
  Vector x(2);
  x << 0.3, -0.7;

  VecFn pol = [&policy](const HdVector& xs, const HdVector&,
                        const HdVector& w) { return policy.forward(xs, w); };
  const Point p{x, Vector(0), th};
  const Matrix ux = jacobian(pol, p, Wrt::kX);
  const Matrix ue = jacobian(pol, p, Wrt::kTheta);

  auto fx = [&](const Vector& xs) { return policy.forward(xs, th); };
  auto fth = [&](const Vector& w) { return policy.forward(x, w); };
  CHECK((ux - oracles::fd_jacobian(fx, x)).cwiseAbs().maxCoeff() < 1e-7);
  CHECK((ue - oracles::fd_jacobian(fth, th)).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("policy rollout gradient matches finite differences of the rollout") {
  EnvConfig cfg = pendulum_cfg(12);
  const ProblemSpec spec = make_env(cfg);
  const Vector theta_env = cfg.true_theta();
  NeuralPolicy policy{spec.n, spec.m};
  PolicyPipeline pipeline(spec, theta_env, policy);

  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> unit(-0.3, 0.3);
  Vector th(policy.param_dim());
  for (Eigen::Index i = 0; i < th.size(); ++i) th[i] = unit(rng);

  const auto trajs = pipeline.solve_inner(th, 0.0, GradientStrategy::kB);
  const auto grads =
      pipeline.inner_gradient(th, 0.0, GradientStrategy::kB, trajs);

  auto roll = [&](const Vector& w) {
    PolicyPipeline probe(spec, theta_env, policy);
    return probe.solve_inner(w, 0.0, GradientStrategy::kB)[0].flatten();
  };
  const Matrix fd = oracles::fd_jacobian(roll, th, 1e-6);
  const Matrix analytic = grads[0].stacked();
  CHECK((analytic - fd).cwiseAbs().maxCoeff() /
            std::max(1.0, fd.cwiseAbs().maxCoeff()) <
        1e-5);
}

TEST_CASE("open-loop planning gradient matches finite differences") {
  EnvConfig cfg = pendulum_cfg(15);
  const ProblemSpec spec = make_env(cfg);
  const Vector theta_env = cfg.true_theta();
  PolyControl ctrl{spec.m, 4, spec.T};
  PlanPipeline pipeline(spec, theta_env, ctrl);

  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Vector th(ctrl.param_dim());
  for (Eigen::Index i = 0; i < th.size(); ++i) th[i] = unit(rng);

  const auto trajs = pipeline.solve_inner(th, 0.0, GradientStrategy::kB);
  const auto grads =
      pipeline.inner_gradient(th, 0.0, GradientStrategy::kB, trajs);

  auto roll = [&](const Vector& w) {
    PlanPipeline probe(spec, theta_env, ctrl);
    return probe.solve_inner(w, 0.0, GradientStrategy::kB)[0].flatten();
  };
  const Matrix fd = oracles::fd_jacobian(roll, th, 1e-6);
  CHECK((grads[0].stacked() - fd).cwiseAbs().maxCoeff() /
            std::max(1.0, fd.cwiseAbs().maxCoeff()) <
        1e-5);
}

TEST_CASE("imitation pretraining") {
  EnvConfig cfg = pendulum_cfg(10);
  const ProblemSpec spec = make_env(cfg);
  const Vector theta_env = cfg.true_theta();
  NeuralPolicy policy{spec.n, spec.m};

  SECTION("zero reference with zero-initialized net is already safe") {
    const Trajectory reference =
        rollout(spec, theta_env, std::vector<Vector>(10, Vector::Zero(1)));
    const Vector fitted =
        imitate_init(spec, theta_env, policy, Vector::Zero(policy.param_dim()),
                     reference, 0);
    CHECK(fitted.cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("fitting a seeded reference keeps the rollout feasible") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::vector<Vector> controls;
    for (int t = 0; t < 10; ++t)
      controls.push_back(Vector::Constant(1, unit(rng)));
    const Trajectory reference = rollout(spec, theta_env, controls);

    Vector th0(policy.param_dim());
    for (Eigen::Index i = 0; i < th0.size(); ++i) th0[i] = 0.05 * unit(rng);

    auto loss_of = [&](const Vector& w) {
      double acc = 0.0;
      for (int t = 0; t < 10; ++t)
        acc += (policy.forward(reference.states[t], w) -
                reference.controls[t]).squaredNorm();
      return acc;
    };
    const double before = loss_of(th0);
    const Vector fitted =
        imitate_init(spec, theta_env, policy, th0, reference, 60);
    CHECK(loss_of(fitted) <= before);

    PolicyPipeline probe(spec, theta_env, policy);
    const auto rolled = probe.solve_inner(fitted, 0.0, GradientStrategy::kB);
    CHECK(constraint_report(spec, theta_env, rolled[0]).max_ineq < 0.0);
  }
}

TEST_CASE("constant-control planning recovers the closed-form optimum") {
  // One pivot (N = 0): loss(theta) = sum_t [theta^2 + w (t*theta - 1)^2] +
  // w (T*theta - 1)^2 is a scalar quadratic with a closed-form minimizer.
  const int T = 10;
  const double w = 1.0;
  const ProblemSpec spec = toy_integrator(T, w);

  double quad = 0.0, lin = 0.0;  // loss = quad*theta^2 - 2*lin*theta + const
  for (int t = 0; t < T; ++t) {
    quad += 1.0 + w * t * t;
    lin += w * t;
  }
  quad += w * T * T;
  lin += w * T;
  const double theta_star = lin / quad;

  PolyControl ctrl{1, 0, T};
  OuterOptions opts;
  opts.lr = 1.0 / (2.0 * quad);
  opts.max_iters = 400;
  opts.tol_grad = 1e-9;
  const RunLog log = plan(spec, Vector(0), ctrl, Vector::Zero(1), opts);
  CHECK(std::abs(log.theta_final[0] - theta_star) < 1e-4);
}

TEST_CASE("learning from demonstrations starts at zero loss at the truth") {
  EnvConfig cfg = pendulum_cfg(12);
  cfg.learnable = {0, 1};  // mass and length
  const std::vector<double> schedule = {1e-1, 1e-3, 1e-5};
  const auto demos = make_demos(cfg, 2, 5, schedule);
  const ProblemSpec spec = make_env(cfg);
  const Vector theta_full = cfg.true_theta();

  Vector theta0(2);
  theta0 << theta_full[0], theta_full[1];

  OuterOptions opts;
  opts.max_iters = 0;  // evaluate only
  opts.gamma = 1e-2;
  SolveOptions inner;
  inner.tol_grad = 1e-9;
  const RunLog log =
      learn_mpc(spec, demos, {0, 1}, theta_full, theta0,
                GradientStrategy::kC, opts, inner, schedule);
  REQUIRE(log.records.size() == 1);
  CHECK(log.records[0].loss < 1e-8);
  CHECK(log.records[0].grad_norm < 1e-6);
}

TEST_CASE("reproducing task gradients are the residual doubles") {
  Trajectory demo;
  demo.states = {Vector::Zero(1), Vector::Zero(1)};
  demo.controls = {Vector::Zero(1)};
  const TaskSpec task = reproducing_task({demo});
  std::vector<Trajectory> trajs(1);
  trajs[0].states = {Vector::Constant(1, 0.5), Vector::Constant(1, -1.0)};
  trajs[0].controls = {Vector::Constant(1, 2.0)};
  CHECK_THAT(task.loss(trajs, Vector(0)),
             Catch::Matchers::WithinRel(0.25 + 1.0 + 4.0, 1e-14));
  const TaskGrad g = task.loss_grad(trajs, Vector(0));
  CHECK(g.dx[0][0][0] == 1.0);
  CHECK(g.dx[0][1][0] == -2.0);
  CHECK(g.du[0][0][0] == 4.0);
}
