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

#include "safepdp/outer.hpp"

using namespace safepdp;

namespace {

// Placeholder inner system: one fixed state, no controls, zero gradient.
// The task loss then depends on theta only.
class StaticPipeline : public Pipeline {
 public:
  explicit StaticPipeline(int r) : r_(r) {}
  int theta_dim() const override { return r_; }
  int episodes() const override { return 1; }
  std::vector<Trajectory> solve_inner(const Vector&, double,
                                      GradientStrategy) override {
    Trajectory traj;
    traj.states.push_back(Vector::Zero(1));
    return {traj};
  }
  std::vector<TrajectoryGradient> inner_gradient(
      const Vector& theta, double, GradientStrategy,
      const std::vector<Trajectory>&) override {
    TrajectoryGradient g;
    g.X.push_back(Matrix::Zero(1, theta.size()));
    return {g};
  }

 private:
  int r_;
};

TaskSpec quadratic_task() {
  TaskSpec task;
  task.loss = [](const std::vector<Trajectory>&, const Vector& th) {
    return (th[0] - 1.0) * (th[0] - 1.0);
  };
  task.loss_grad = [](const std::vector<Trajectory>& trajs,
                      const Vector& th) {
    TaskGrad g(trajs, 1);
    g.dtheta[0] = 2.0 * (th[0] - 1.0);
    return g;
  };
  return task;
}

}  // namespace

TEST_CASE("outer objective reduces to the loss without constraints") {
  TaskSpec task = quadratic_task();
  std::vector<Trajectory> trajs(1);
  trajs[0].states.push_back(Vector::Zero(1));
  const Vector th = Vector::Constant(1, 3.0);
  CHECK(outer_objective(task, trajs, th, 0.5) == 4.0);
}

TEST_CASE("outer objective with a unit-slack constraint") {
  TaskSpec task;
  task.loss = [](const std::vector<Trajectory>&, const Vector&) { return 2.0; };
  task.num_constraints = 1;
  task.constraints = [](const std::vector<Trajectory>&, const Vector&) {
    return std::vector<double>{-1.0};
  };
  std::vector<Trajectory> trajs(1);
  const Vector th = Vector::Zero(1);
  CHECK(outer_objective(task, trajs, th, 0.5) == 2.0);  // -0.5*ln(1) = 0

  SECTION("nonnegative constraint aborts") {
    task.constraints = [](const std::vector<Trajectory>&, const Vector&) {
      return std::vector<double>{0.0};
    };
    CHECK_THROWS_AS(outer_objective(task, trajs, th, 0.5), SafetyBreach);
  }
}

TEST_CASE("scalar quadratic descends to the optimum") {
  StaticPipeline pipeline(1);
  TaskSpec task = quadratic_task();
  OuterOptions opts;
  opts.lr = 0.3;
  opts.max_iters = 200;
  opts.tol_grad = 1e-7;
  const RunLog log = run(pipeline, task, Vector::Zero(1), opts);
  CHECK(std::abs(log.theta_final[0] - 1.0) < 1e-4);
  CHECK(log.hit_gradient_tol);
}

TEST_CASE("loss independent of the trajectory has a pure partial gradient") {
  // loss = ||theta||^2: the chain term vanishes for every strategy.
  StaticPipeline pipeline(3);
  TaskSpec task;
  task.loss = [](const std::vector<Trajectory>&, const Vector& th) {
    return th.squaredNorm();
  };
  task.loss_grad = [](const std::vector<Trajectory>& trajs, const Vector& th) {
    TaskGrad g(trajs, static_cast<int>(th.size()));
    g.dtheta = 2.0 * th;
    return g;
  };
  const Vector th = (Vector(3) << 1.0, -2.0, 0.5).finished();
  for (GradientStrategy s : {GradientStrategy::kA, GradientStrategy::kB,
                             GradientStrategy::kC}) {
    const Vector grad = outer_gradient(pipeline, task, th, 1e-2, 1e-2, s);
    CHECK((grad - 2.0 * th).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("unsafe initialization is rejected") {
  StaticPipeline pipeline(1);
  TaskSpec task = quadratic_task();
  task.num_constraints = 1;
  task.constraints = [](const std::vector<Trajectory>&, const Vector& th) {
    return std::vector<double>{th[0]};  // nonnegative at theta = 0
  };
  task.constraints_weighted_grad =
      [](const std::vector<Trajectory>& trajs, const Vector& th,
         const std::vector<double>& w) {
        TaskGrad g(trajs, static_cast<int>(th.size()));
        g.dtheta[0] = w[0];
        return g;
      };
  OuterOptions opts;
  CHECK_THROWS_AS(run(pipeline, task, Vector::Zero(1), opts),
                  UnsafeInitialization);
}

TEST_CASE("barrier keeps iterates inside the task constraint") {
  // Minimize (theta-1)^2 subject to theta <= 0.5; iterates never cross.
  StaticPipeline pipeline(1);
  TaskSpec task = quadratic_task();
  task.num_constraints = 1;
  task.constraints = [](const std::vector<Trajectory>&, const Vector& th) {
    return std::vector<double>{th[0] - 0.5};
  };
  task.constraints_weighted_grad =
      [](const std::vector<Trajectory>& trajs, const Vector& th,
         const std::vector<double>& w) {
        TaskGrad g(trajs, static_cast<int>(th.size()));
        g.dtheta[0] = w[0];
        return g;
      };
  OuterOptions opts;
  opts.lr = 0.2;
  opts.max_iters = 300;
  opts.continuation = {{1e-1, 1e-2}, {1e-2, 1e-2}, {1e-3, 1e-2}};
  const RunLog log = run(pipeline, task, Vector::Constant(1, -1.0), opts);
  for (const RunRecord& rec : log.records) CHECK(rec.max_R < 0.0);
  // The barrier optimum approaches the bound from inside as epsilon drops.
  CHECK(log.theta_final[0] < 0.5);
  CHECK(log.theta_final[0] > 0.4);
}

TEST_CASE("identical configurations produce identical run logs") {
  StaticPipeline p1(1), p2(1);
  TaskSpec task = quadratic_task();
  OuterOptions opts;
  opts.lr = 0.1;
  opts.max_iters = 25;
  opts.tol_grad = 0.0;
  const RunLog a = run(p1, task, Vector::Constant(1, -0.3), opts);
  const RunLog b = run(p2, task, Vector::Constant(1, -0.3), opts);
  REQUIRE(a.records.size() == b.records.size());
  for (size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].objective == b.records[i].objective);
    CHECK(a.records[i].grad_norm == b.records[i].grad_norm);
    CHECK((a.records[i].theta - b.records[i].theta).cwiseAbs().maxCoeff() ==
          0.0);
  }
}

TEST_CASE("continuation rungs execute in order") {
  StaticPipeline pipeline(1);
  TaskSpec task = quadratic_task();
  OuterOptions opts;
  opts.lr = 0.3;
  opts.max_iters = 10;
  opts.tol_grad = 0.0;
  opts.continuation = {{1.0, 1e-1}, {1e-1, 1e-2}};
  const RunLog log = run(pipeline, task, Vector::Zero(1), opts);
  CHECK(log.records.front().epsilon == 1.0);
  CHECK(log.records.back().epsilon == 1e-1);
  CHECK(log.records.back().gamma == 1e-2);
  // Global iteration indices are contiguous.
  for (size_t i = 0; i < log.records.size(); ++i)
    CHECK(log.records[i].iter == static_cast<int>(i));
}
