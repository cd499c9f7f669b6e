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

#include "safepdp/ocp.hpp"
#include "support/oracles.hpp"

using namespace safepdp;

namespace {

// Scalar accumulator system x_{t+1} = x_t + u_t with quadratic costs.
ProblemSpec scalar_integrator(int T, double qx = 1.0, double qu = 1.0,
                              double qT = 0.0, double x0 = 0.0) {
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
  spec.stage_cost = [qx, qu](const HdVector& x, const HdVector& u,
                             const HdVector&) {
    return qx * x[0] * x[0] + qu * u[0] * u[0];
  };
  spec.final_cost = [qT](const HdVector& x, const HdVector&) {
    return qT * x[0] * x[0];
  };
  return spec;
}

}  // namespace

TEST_CASE("rollout accumulates controls") {
  ProblemSpec spec = scalar_integrator(3);
  const std::vector<Vector> controls(3, Vector::Constant(1, 1.0));
  const Trajectory traj = rollout(spec, Vector(0), controls);
  REQUIRE(traj.states.size() == 4);
  for (int t = 0; t <= 3; ++t) CHECK(traj.states[t][0] == double(t));
}

TEST_CASE("rollout is deterministic bitwise") {
  ProblemSpec spec = scalar_integrator(10);
  std::vector<Vector> controls;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(-1, 1);
  for (int t = 0; t < 10; ++t) controls.push_back(Vector::Constant(1, unit(rng)));
  const Trajectory a = rollout(spec, Vector(0), controls);
  const Trajectory b = rollout(spec, Vector(0), controls);
  for (int t = 0; t <= 10; ++t) CHECK(a.states[t][0] == b.states[t][0]);
}

TEST_CASE("rollout rejects wrong control count") {
  ProblemSpec spec = scalar_integrator(3);
  CHECK_THROWS_AS(rollout(spec, Vector(0), std::vector<Vector>(2, Vector::Zero(1))),
                  DimensionError);
}

TEST_CASE("rollout flags divergence") {
  ProblemSpec spec = scalar_integrator(4, 1.0, 1.0, 0.0, /*x0=*/1.0);
  spec.dynamics = [](const HdVector& x, const HdVector&, const HdVector&) {
    HdVector y(1);
    y[0] = x[0] * x[0] * 1e200;
    return y;
  };
  CHECK_THROWS_AS(rollout(spec, Vector(0),
                          std::vector<Vector>(4, Vector::Constant(1, 1.0))),
                  NonFiniteError);
}

TEST_CASE("total cost sums stage and final terms") {
  ProblemSpec spec = scalar_integrator(2, 0.0, 1.0, 0.0);
  std::vector<Vector> controls = {Vector::Constant(1, 1.0),
                                  Vector::Constant(1, 2.0)};
  const Trajectory traj = rollout(spec, Vector(0), controls);
  CHECK_THAT(total_cost(spec, Vector(0), traj),
             Catch::Matchers::WithinRel(5.0, 1e-14));

  ProblemSpec zero = scalar_integrator(2, 0.0, 0.0, 0.0);
  CHECK(total_cost(zero, Vector(0), traj) == 0.0);
}

TEST_CASE("constraint report conventions") {
  ProblemSpec spec = scalar_integrator(2);
  SECTION("no constraints declared") {
    const Trajectory traj =
        rollout(spec, Vector(0), std::vector<Vector>(2, Vector::Zero(1)));
    const ConstraintReport rep = constraint_report(spec, Vector(0), traj);
    CHECK(rep.max_ineq == -kInf);
    CHECK(rep.max_eq_abs == 0.0);
  }
  SECTION("|u| - 1 with controls 0.5 and -2") {
    spec.path_ineq = StageConstraint::invariant(
        [](const HdVector&, const HdVector& u, const HdVector&) {
          HdVector g(2);
          g[0] = u[0] - 1.0;
          g[1] = -u[0] - 1.0;
          return g;
        },
        2);
    std::vector<Vector> controls = {Vector::Constant(1, 0.5),
                                    Vector::Constant(1, -2.0)};
    const Trajectory traj = rollout(spec, Vector(0), controls);
    const ConstraintReport rep = constraint_report(spec, Vector(0), traj);
    CHECK_THAT(rep.max_ineq, Catch::Matchers::WithinRel(1.0, 1e-14));
  }
}

TEST_CASE("constraint report max equals per-step table maximum") {
  ProblemSpec spec = scalar_integrator(5);
  spec.path_ineq = StageConstraint::invariant(
      [](const HdVector& x, const HdVector& u, const HdVector&) {
        HdVector g(2);
        g[0] = sin(x[0]) - 0.8;
        g[1] = u[0] * u[0] - 1.5;
        return g;
      },
      2);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(-1.5, 1.5);
  std::vector<Vector> controls;
  for (int t = 0; t < 5; ++t) controls.push_back(Vector::Constant(1, unit(rng)));
  const Trajectory traj = rollout(spec, Vector(0), controls);
  const ConstraintReport rep = constraint_report(spec, Vector(0), traj);
  double manual = -kInf;
  for (const Vector& g : rep.ineq)
    if (g.size() > 0) manual = std::max(manual, g.maxCoeff());
  CHECK(rep.max_ineq == manual);
}

TEST_CASE("pmp residual vanishes at the analytic LQR solution") {
  const int T = 5;
  ProblemSpec spec = scalar_integrator(T, 1.0, 1.0, 0.0, 1.0);
  oracles::ScalarLqr lqr;
  lqr.T = T;
  lqr.x0 = 1.0;
  const auto [u_opt, x_opt] = lqr.solve();

  // Riccati value recursion for the costates lambda_t = 2 P_t x_t.
  std::vector<double> P(T + 1);
  P[T] = lqr.qT;
  for (int t = T - 1; t >= 0; --t) {
    const double K = P[t + 1] / (1.0 + P[t + 1]);
    P[t] = 1.0 + P[t + 1] - P[t + 1] * K;
  }

  Trajectory traj;
  for (double x : x_opt) traj.states.push_back(Vector::Constant(1, x));
  for (double u : u_opt) traj.controls.push_back(Vector::Constant(1, u));

  Multipliers mult;
  mult.costate.resize(T + 1);
  mult.ineq.assign(T + 1, Vector(0));
  mult.eq.assign(T + 1, Vector(0));
  for (int t = 1; t <= T; ++t)
    mult.costate[t] = Vector::Constant(1, 2.0 * P[t] * x_opt[t]);

  const PmpResidual res = pmp_residual(spec, Vector(0), traj, mult);
  CHECK(res.stationarity < 1e-8);
  CHECK(res.costate < 1e-8);
  CHECK(res.complementarity == 0.0);
  CHECK(res.primal_ineq == 0.0);

  SECTION("perturbed trajectory is not stationary") {
    Trajectory bad = traj;
    bad.controls[2][0] += 0.1;
    for (int t = 2; t < T; ++t)
      bad.states[t + 1] = Vector::Constant(
          1, bad.states[t][0] + bad.controls[t][0]);
    const PmpResidual bad_res = pmp_residual(spec, Vector(0), bad, mult);
    CHECK(bad_res.stationarity > 1e-3);
  }
}

TEST_CASE("active set identification") {
  ProblemSpec spec = scalar_integrator(1);
  spec.path_ineq = StageConstraint::invariant(
      [](const HdVector&, const HdVector& u, const HdVector&) {
        HdVector g(2);
        g[0] = u[0] - 1e-5;   // -1e-5 at u = 0
        g[1] = u[0] - 0.5;    // -0.5 at u = 0
        return g;
      },
      2);
  const Trajectory traj =
      rollout(spec, Vector(0), std::vector<Vector>(1, Vector::Zero(1)));

  SECTION("delta = 1e-3 flags only the near-active row") {
    const ActiveSet active = identify_active(spec, Vector(0), traj, 1e-3);
    REQUIRE(active.indices[0].size() == 1);
    CHECK(active.indices[0][0] == 0);
    CHECK(active.indices[1].empty());  // terminal
  }
  SECTION("all strictly below -delta yields empty set") {
    const ActiveSet active = identify_active(spec, Vector(0), traj, 1e-6);
    CHECK(active.indices[0].empty());
  }
  SECTION("randomized thresholds agree with a brute-force scan") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> gval(-1.0, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
      const double a = gval(rng), b = gval(rng), delta = 0.3;
      ProblemSpec s = scalar_integrator(1);
      s.path_ineq = StageConstraint::invariant(
          [a, b](const HdVector&, const HdVector&, const HdVector&) {
            HdVector g(2);
            g[0] = HyperDual(a);
            g[1] = HyperDual(b);
            return g;
          },
          2);
      const Trajectory tr =
          rollout(s, Vector(0), std::vector<Vector>(1, Vector::Zero(1)));
      const ActiveSet act = identify_active(s, Vector(0), tr, delta);
      std::vector<int> expect;
      if (a >= -delta) expect.push_back(0);
      if (b >= -delta) expect.push_back(1);
      CHECK(act.indices[0] == expect);
    }
  }
  SECTION("delta must be positive") {
    CHECK_THROWS_AS(identify_active(spec, Vector(0), traj, 0.0),
                    DimensionError);
  }
}
