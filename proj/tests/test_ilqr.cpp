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

#include "safepdp/ilqr.hpp"
#include "support/oracles.hpp"

using namespace safepdp;

namespace {

ProblemSpec scalar_integrator_lqr(int T, double x0) {
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
  spec.initial_state = [x0](const HdVector&) {
    HdVector y(1);
    y[0] = HyperDual(x0);
    return y;
  };
  spec.stage_cost = [](const HdVector& x, const HdVector& u, const HdVector&) {
    return x[0] * x[0] + u[0] * u[0];
  };
  spec.final_cost = [](const HdVector&, const HdVector&) {
    return HyperDual(0.0);
  };
  return spec;
}

// min sum u_t^2 subject to x_T >= 1, on the scalar accumulator from x0 = 0.
ProblemSpec reach_problem(int T) {
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
  spec.stage_cost = [](const HdVector&, const HdVector& u, const HdVector&) {
    return u[0] * u[0];
  };
  spec.final_cost = [](const HdVector&, const HdVector&) {
    return HyperDual(0.0);
  };
  spec.term_ineq = TerminalConstraint::of(
      [](const HdVector& x, const HdVector&) {
        HdVector g(1);
        g[0] = 1.0 - x[0];
        return g;
      },
      1);
  return spec;
}

}  // namespace

TEST_CASE("scalar LQR matches the analytic Riccati solution") {
  const int T = 5;
  ProblemSpec spec = scalar_integrator_lqr(T, 1.0);
  SolveOptions opts;
  opts.tol_grad = 1e-12;
  const SolveResult res = solve_unconstrained(spec, Vector(0), opts);
  REQUIRE(res.converged);

  oracles::ScalarLqr lqr;
  lqr.T = T;
  lqr.x0 = 1.0;
  const auto [u_opt, x_opt] = lqr.solve();
  for (int t = 0; t < T; ++t)
    CHECK(std::abs(res.trajectory.controls[t][0] - u_opt[t]) < 1e-8);
  for (int t = 0; t <= T; ++t)
    CHECK(std::abs(res.trajectory.states[t][0] - x_opt[t]) < 1e-8);
}

TEST_CASE("zero-cost problem converges immediately") {
  ProblemSpec spec = scalar_integrator_lqr(4, 1.0);
  spec.stage_cost = [](const HdVector&, const HdVector&, const HdVector&) {
    return HyperDual(0.0);
  };
  const SolveResult res = solve_unconstrained(spec, Vector(0));
  CHECK(res.converged);
  CHECK(res.iters <= 1);
  CHECK(res.stationarity == 0.0);
}

TEST_CASE("warm and cold starts reach the same optimum") {
  ProblemSpec spec = scalar_integrator_lqr(6, 2.0);
  SolveOptions cold;
  cold.tol_grad = 1e-12;
  const SolveResult a = solve_unconstrained(spec, Vector(0), cold);

  SolveOptions warm = cold;
  Trajectory guess;
  guess.controls.assign(6, Vector::Constant(1, -0.7));
  guess.states.assign(7, Vector::Zero(1));
  warm.warm_start = guess;
  const SolveResult b = solve_unconstrained(spec, Vector(0), warm);
  CHECK(std::abs(a.cost - b.cost) < 1e-8);
}

TEST_CASE("identical solves give identical iteration traces") {
  ProblemSpec spec = scalar_integrator_lqr(6, 2.0);
  std::vector<double> trace_a, trace_b;
  SolveOptions opts;
  opts.iterate_callback = [&trace_a](const Trajectory& t) {
    trace_a.push_back(t.states.back()[0]);
  };
  solve_unconstrained(spec, Vector(0), opts);
  opts.iterate_callback = [&trace_b](const Trajectory& t) {
    trace_b.push_back(t.states.back()[0]);
  };
  solve_unconstrained(spec, Vector(0), opts);
  CHECK(trace_a == trace_b);
}

TEST_CASE("plain overload refuses constrained specs") {
  ProblemSpec spec = reach_problem(2);
  CHECK_THROWS_AS(solve_unconstrained(spec, Vector(0)), ConfigError);
}

TEST_CASE("barrier solve requires a strictly feasible start") {
  ProblemSpec spec = reach_problem(2);
  const BarrierSpec bar = to_barrier(spec, 1e-2);
  // Zero controls leave x_T = 0, violating x_T >= 1.
  CHECK_THROWS_AS(solve_unconstrained(bar, Vector(0)), InfeasibleStart);
}

TEST_CASE("path-following recovers the hand QP solution") {
  // min u0^2 + u1^2 s.t. u0 + u1 >= 1 has u0 = u1 = 0.5.
  ProblemSpec spec = reach_problem(2);
  SolveOptions opts;
  opts.tol_grad = 1e-10;
  Trajectory feasible;
  feasible.controls.assign(2, Vector::Constant(1, 1.0));
  feasible.states.assign(3, Vector::Zero(1));
  opts.warm_start = feasible;

  const std::vector<double> schedule = geometric_schedule(1e-1, 1e-6);
  const auto [res, mult] = solve_constrained(spec, Vector(0), schedule, opts);
  CHECK(std::abs(res.trajectory.controls[0][0] - 0.5) < 1e-4);
  CHECK(std::abs(res.trajectory.controls[1][0] - 0.5) < 1e-4);

  SECTION("complementarity of the recovered multipliers is gamma-level") {
    const PmpResidual kkt = pmp_residual(spec, Vector(0), res.trajectory, mult);
    CHECK(kkt.complementarity <= 1e-6 + 1e-12);
    CHECK(kkt.stationarity < 1e-6);
  }
}

TEST_CASE("unconstrained spec through the path-follower is unchanged") {
  ProblemSpec spec = scalar_integrator_lqr(5, 1.0);
  SolveOptions opts;
  opts.tol_grad = 1e-12;
  const SolveResult direct = solve_unconstrained(spec, Vector(0), opts);
  const auto [via_path, mult] =
      solve_constrained(spec, Vector(0), {1e-1, 1e-3}, opts);
  CHECK(std::abs(direct.cost - via_path.cost) < 1e-10);
  for (int t = 0; t < 5; ++t)
    CHECK(std::abs(direct.trajectory.controls[t][0] -
                   via_path.trajectory.controls[t][0]) < 1e-8);
}

TEST_CASE("gamma schedule validation") {
  ProblemSpec spec = scalar_integrator_lqr(3, 1.0);
  CHECK_THROWS_AS(solve_constrained(spec, Vector(0), {}), DimensionError);
  CHECK_THROWS_AS(solve_constrained(spec, Vector(0), {1e-2, 1e-1}),
                  DimensionError);
  CHECK_THROWS_AS(solve_constrained(spec, Vector(0), {1e-2, -1.0}),
                  DimensionError);
}

TEST_CASE("accepted iterates decrease the composite cost monotonically") {
  ProblemSpec spec = reach_problem(4);
  const BarrierSpec bar = to_barrier(spec, 1e-2);
  SolveOptions opts;
  Trajectory feasible;
  feasible.controls.assign(4, Vector::Constant(1, 0.6));
  feasible.states.assign(5, Vector::Zero(1));
  opts.warm_start = feasible;

  std::vector<double> costs;
  opts.iterate_callback = [&](const Trajectory& t) {
    costs.push_back(bar.total_cost(Vector(0), t));
  };
  solve_unconstrained(bar, Vector(0), opts);
  REQUIRE(costs.size() >= 2);
  // Slack covers the terminal polish steps, whose decreases sit below what
  // double cost sums can resolve.
  for (size_t i = 1; i < costs.size(); ++i)
    CHECK(costs[i] <= costs[i - 1] + 1e-9 * (1.0 + std::abs(costs[i - 1])));
}

TEST_CASE("every accepted iterate of a barrier solve stays interior") {
  ProblemSpec spec = reach_problem(4);
  const BarrierSpec bar = to_barrier(spec, 1e-2);
  SolveOptions opts;
  Trajectory feasible;
  feasible.controls.assign(4, Vector::Constant(1, 0.6));
  feasible.states.assign(5, Vector::Zero(1));
  opts.warm_start = feasible;
  double worst = -kInf;
  opts.iterate_callback = [&](const Trajectory& t) {
    worst = std::max(worst, constraint_report(spec, Vector(0), t).max_ineq);
  };
  solve_unconstrained(bar, Vector(0), opts);
  CHECK(worst < 0.0);
}
