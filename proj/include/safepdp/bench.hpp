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

#ifndef SAFEPDP_BENCH_HPP
#define SAFEPDP_BENCH_HPP

#include <chrono>
#include <cmath>
#include <random>
#include <vector>

#include "safepdp/envs.hpp"
#include "safepdp/pipelines.hpp"

namespace safepdp {

// Deterministic well-conditioned auxiliary system for timing and solver
// tests. Stage constraint rows (when requested) are generated with nonzero
// control coefficients so they are resolvable step by step.
inline AuxLqr synthetic_aux(int T, int n, int m, int r, unsigned seed,
                            int eq_rows_per_step = 0,
                            int terminal_eq_rows = 0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  auto rand_mat = [&](int rows, int cols) {
    Matrix a(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) a(i, j) = unit(rng);
    return a;
  };

  AuxLqr aux;
  aux.T = T;
  aux.n = n;
  aux.m = m;
  aux.r = r;
  aux.Lxx.resize(T);
  aux.Lxu.resize(T);
  aux.Luu.resize(T);
  aux.Lxth.resize(T);
  aux.Luth.resize(T);
  aux.Fx.resize(T);
  aux.Fu.resize(T);
  aux.Fth.resize(T);
  aux.Gx.resize(T);
  aux.Gu.resize(T);
  aux.Gth.resize(T);
  aux.Hx.resize(T);
  aux.Hu.resize(T);
  aux.Hth.resize(T);
  for (int t = 0; t < T; ++t) {
    const Matrix mx = rand_mat(n, n);
    const Matrix mu = rand_mat(m, m);
    aux.Lxx[t] = mx * mx.transpose() + Matrix::Identity(n, n);
    aux.Luu[t] = mu * mu.transpose() + Matrix::Identity(m, m);
    aux.Lxu[t] = 0.1 * rand_mat(n, m);
    aux.Lxth[t] = rand_mat(n, r);
    aux.Luth[t] = rand_mat(m, r);
    aux.Fx[t] = 0.5 * Matrix::Identity(n, n) + 0.2 * rand_mat(n, n) / std::sqrt(n);
    aux.Fu[t] = rand_mat(n, m);
    aux.Fth[t] = 0.3 * rand_mat(n, r);
    aux.Gx[t].resize(0, n);
    aux.Gu[t].resize(0, m);
    aux.Gth[t].resize(0, r);
    if (eq_rows_per_step > 0) {
      aux.Hx[t] = rand_mat(eq_rows_per_step, n);
      aux.Hu[t] = rand_mat(eq_rows_per_step, m) +
                  Matrix::Ones(eq_rows_per_step, m);
      aux.Hth[t] = rand_mat(eq_rows_per_step, r);
    } else {
      aux.Hx[t].resize(0, n);
      aux.Hu[t].resize(0, m);
      aux.Hth[t].resize(0, r);
    }
  }
  const Matrix mT = rand_mat(n, n);
  aux.LxxT = mT * mT.transpose() + Matrix::Identity(n, n);
  aux.LxthT = rand_mat(n, r);
  aux.X0 = rand_mat(n, r);
  aux.GxT.resize(0, n);
  aux.GthT.resize(0, r);
  if (terminal_eq_rows > 0) {
    aux.HxT = rand_mat(terminal_eq_rows, n);
    aux.HthT = rand_mat(terminal_eq_rows, r);
  } else {
    aux.HxT.resize(0, n);
    aux.HthT.resize(0, r);
  }
  return aux;
}

struct GammaSweepRow {
  double gamma = 0.0;
  double rel_traj_error = 0.0;
  double rel_grad_error = 0.0;  // NaN if gradients were not requested
  double solve_time = 0.0;      // seconds for the barrier solve
};

// Flatten a trajectory gradient column-stack for norm comparisons.
inline Matrix stack_gradient(const TrajectoryGradient& g) { return g.stacked(); }

// Central finite differences of the constrained forward solve over theta.
inline Matrix fd_constrained_gradient(const ProblemSpec& spec,
                                      const Vector& theta,
                                      const std::vector<double>& schedule,
                                      const SolveOptions& opts, double step) {
  Matrix out;
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    const double h = step * std::max(1.0, std::abs(theta[j]));
    Vector tp = theta, tm = theta;
    tp[j] += h;
    tm[j] -= h;
    const Vector fp =
        solve_constrained(spec, tp, schedule, opts).first.trajectory.flatten();
    const Vector fm =
        solve_constrained(spec, tm, schedule, opts).first.trajectory.flatten();
    if (j == 0) out.resize(fp.size(), theta.size());
    out.col(j) = (fp - fm) / (2.0 * h);
  }
  return out;
}

// Accuracy of the barrier approximation against a tight constrained
// reference, per gamma: relative trajectory error, relative gradient error
// (vs finite differences of the constrained solve), and solve time.
inline std::vector<GammaSweepRow> gamma_sweep(const ProblemSpec& spec,
                                              const Vector& theta,
                                              const std::vector<double>& gammas,
                                              bool with_gradients = true,
                                              double fd_step = 1e-5) {
  require(!gammas.empty(), "gamma_sweep: empty gamma list");
  SolveOptions opts;
  opts.tol_grad = 1e-10;
  opts.max_iters = 600;

  const std::vector<double> ref_schedule = geometric_schedule(1e-1, 1e-7);
  const auto [ref, ref_mult] = solve_constrained(spec, theta, ref_schedule, opts);
  const Vector ref_flat = ref.trajectory.flatten();

  Matrix fd_grad;
  if (with_gradients) {
    SolveOptions fd_opts = opts;
    fd_opts.warm_start = ref.trajectory;
    fd_grad = fd_constrained_gradient(spec, theta, ref_schedule, fd_opts,
                                      fd_step);
  }

  std::vector<GammaSweepRow> rows;
  SolveOptions stage = opts;
  for (double gamma : gammas) {
    const BarrierSpec bar = to_barrier(spec, gamma);
    const auto start = std::chrono::steady_clock::now();
    const SolveResult res = solve_unconstrained(bar, theta, stage);
    const auto stop = std::chrono::steady_clock::now();
    stage.warm_start = res.trajectory;

    GammaSweepRow row;
    row.gamma = gamma;
    row.solve_time =
        std::chrono::duration<double>(stop - start).count();
    row.rel_traj_error =
        (res.trajectory.flatten() - ref_flat).norm() / ref_flat.norm();
    if (with_gradients) {
      const TrajectoryGradient g =
          solve_aux(build_aux_barrier(bar, theta, res.trajectory));
      row.rel_grad_error =
          (stack_gradient(g) - fd_grad).norm() / fd_grad.norm();
    } else {
      row.rel_grad_error = std::numeric_limits<double>::quiet_NaN();
    }
    rows.push_back(row);
  }
  return rows;
}

struct TimingRow {
  int horizon = 0;
  double seconds = 0.0;
};

struct TimingReport {
  std::vector<TimingRow> rows;
  double loglog_slope = std::numeric_limits<double>::quiet_NaN();
};

// Wall-clock of the auxiliary-system backward pass over a horizon ladder,
// on synthetic instances sized like the given environment. The log-log slope
// is the least-squares fit; degenerate ladders yield NaN.
inline TimingReport timing(int n, int m, int r, const std::vector<int>& horizons,
                           int repeats = 25, unsigned seed = 3) {
  require(horizons.size() >= 2, "timing: need at least two horizons");
  TimingReport report;
  for (int T : horizons) {
    const AuxLqr aux = synthetic_aux(T, n, m, r, seed);
    // Warm-up, then estimate a batch size so each sample spans at least a
    // couple of milliseconds; the minimum over samples is the least noisy
    // per-solve estimate.
    double sink = 0.0;
    auto timed_batch = [&](int batch) {
      const auto start = std::chrono::steady_clock::now();
      for (int b = 0; b < batch; ++b) sink += solve_aux(aux).X[T](0, 0);
      const auto stop = std::chrono::steady_clock::now();
      return std::chrono::duration<double>(stop - start).count() / batch;
    };
    const double est = timed_batch(1);
    const int batch = std::max(1, static_cast<int>(2e-3 / std::max(est, 1e-9)));
    double best = kInf;
    for (int rep = 0; rep < repeats; ++rep)
      best = std::min(best, timed_batch(batch));
    report.rows.push_back({T, best + (sink == 0.12345 ? 1.0 : 0.0)});
  }

  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const int k = static_cast<int>(report.rows.size());
  for (const TimingRow& row : report.rows) {
    const double x = std::log(static_cast<double>(row.horizon));
    const double y = std::log(row.seconds);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double var = sxx - sx * sx / k;
  if (var > 1e-12) report.loglog_slope = (sxy - sx * sy / k) / var;
  return report;
}

struct GradCheckRow {
  int param = 0;
  double rel_error = 0.0;
  double abs_error = 0.0;
  double ref_norm = 0.0;
};

// Column-wise comparison of the auxiliary-system gradient of a barrier solve
// against central finite differences of the same solve.
inline std::vector<GradCheckRow> gradcheck_barrier(const ProblemSpec& spec,
                                                   const Vector& theta,
                                                   double gamma,
                                                   double fd_step = 1e-5) {
  SolveOptions opts;
  opts.tol_grad = 1e-10;
  opts.max_iters = 600;
  const BarrierSpec bar = to_barrier(spec, gamma);
  const SolveResult base = solve_unconstrained(bar, theta, opts);
  const TrajectoryGradient g =
      solve_aux(build_aux_barrier(bar, theta, base.trajectory));
  const Matrix analytic = stack_gradient(g);

  SolveOptions probe = opts;
  probe.warm_start = base.trajectory;
  std::vector<GradCheckRow> rows;
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    const double h = fd_step * std::max(1.0, std::abs(theta[j]));
    Vector tp = theta, tm = theta;
    tp[j] += h;
    tm[j] -= h;
    const Vector fp = solve_unconstrained(bar, tp, probe).trajectory.flatten();
    const Vector fm = solve_unconstrained(bar, tm, probe).trajectory.flatten();
    const Vector fd = (fp - fm) / (2.0 * h);
    GradCheckRow row;
    row.param = static_cast<int>(j);
    row.ref_norm = fd.norm();
    row.abs_error = (analytic.col(j) - fd).norm();
    row.rel_error = row.abs_error / std::max(row.ref_norm, 1e-12);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace safepdp

#endif  // SAFEPDP_BENCH_HPP
