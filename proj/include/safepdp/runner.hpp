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

#ifndef SAFEPDP_RUNNER_HPP
#define SAFEPDP_RUNNER_HPP

#include <chrono>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "safepdp/bench.hpp"
#include "safepdp/io.hpp"
#include "safepdp/pipelines.hpp"

namespace safepdp {

namespace detail {

inline void write_runlog(const std::filesystem::path& dir, const RunLog& log) {
  CsvWriter csv(dir / "runlog.csv");
  csv.header({"iter", "W", "loss", "max_R", "max_g", "grad_norm"});
  for (const RunRecord& rec : log.records) {
    csv.begin_row();
    csv.field(rec.iter);
    csv.field(rec.objective);
    csv.field(rec.loss);
    csv.field(rec.max_R);
    csv.field(rec.max_g);
    csv.field(rec.grad_norm);
    csv.end_row();
  }

  CsvWriter ladder(dir / "ladder.csv");
  ladder.header({"iter", "epsilon", "gamma"});
  for (const RunRecord& rec : log.records) {
    ladder.begin_row();
    ladder.field(rec.iter);
    ladder.field(rec.epsilon);
    ladder.field(rec.gamma);
    ladder.end_row();
  }
}

inline void write_trajectories(const std::filesystem::path& dir,
                               const RunLog& log) {
  if (log.records.empty()) return;
  CsvWriter csv(dir / "trajectories.csv");
  const int n = static_cast<int>(
      log.initial_trajectories.empty()
          ? 0
          : log.initial_trajectories[0].states[0].size());
  const int m = static_cast<int>(
      log.initial_trajectories.empty()
          ? 0
          : (log.initial_trajectories[0].controls.empty()
                 ? 0
                 : log.initial_trajectories[0].controls[0].size()));
  std::vector<std::string> cols = {"iter", "episode", "t"};
  for (int i = 0; i < n; ++i) cols.push_back("x" + std::to_string(i));
  for (int j = 0; j < m; ++j) cols.push_back("u" + std::to_string(j));
  csv.header(cols);

  auto dump = [&](int iter, const std::vector<Trajectory>& trajs) {
    for (size_t e = 0; e < trajs.size(); ++e) {
      const Trajectory& traj = trajs[e];
      for (size_t t = 0; t < traj.states.size(); ++t) {
        csv.begin_row();
        csv.field(iter);
        csv.field(static_cast<int>(e));
        csv.field(static_cast<int>(t));
        for (Eigen::Index i = 0; i < traj.states[t].size(); ++i)
          csv.field(traj.states[t][i]);
        if (t < traj.controls.size())
          for (Eigen::Index j = 0; j < traj.controls[t].size(); ++j)
            csv.field(traj.controls[t][j]);
        else
          for (int j = 0; j < m; ++j) csv.empty_field();
        csv.end_row();
      }
    }
  };
  dump(log.records.front().iter, log.initial_trajectories);
  dump(log.records.back().iter, log.final_trajectories);
}

inline void write_summary(const std::filesystem::path& dir, Json summary,
                          double wall_clock_sec) {
  summary["wall_clock_sec"] = wall_clock_sec;
  std::ofstream out(dir / "summary.json");
  out << summary.dump(2) << "\n";
}

inline Json runlog_summary(const RunLog& log) {
  Json j;
  j["theta_final"] = vector_to_json(log.theta_final);
  j["iterations"] = log.records.size();
  j["hit_gradient_tol"] = log.hit_gradient_tol;
  j["final_loss"] = log.records.empty() ? 0.0 : log.records.back().loss;
  j["final_objective"] =
      log.records.empty() ? 0.0 : log.records.back().objective;
  double worst_R = -kInf, worst_g = -kInf;
  for (const RunRecord& rec : log.records) {
    worst_R = std::max(worst_R, rec.max_R);
    worst_g = std::max(worst_g, rec.max_g);
  }
  j["worst_max_R"] = worst_R;
  j["worst_max_g"] = worst_g;
  return j;
}

// Seeded small random weights for the policy before imitation pretraining.
inline Vector seeded_policy_init(const NeuralPolicy& policy, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-0.1, 0.1);
  Vector th(policy.param_dim());
  for (Eigen::Index i = 0; i < th.size(); ++i) th[i] = unit(rng);
  return th;
}

inline std::vector<Trajectory> perturb_demos(std::vector<Trajectory> demos,
                                             double noise, unsigned seed) {
  if (noise <= 0.0) return demos;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, noise);
  for (Trajectory& d : demos) {
    for (Vector& x : d.states)
      for (Eigen::Index i = 0; i < x.size(); ++i) x[i] += gauss(rng);
    for (Vector& u : d.controls)
      for (Eigen::Index i = 0; i < u.size(); ++i) u[i] += gauss(rng);
  }
  return demos;
}

}  // namespace detail

// Configured pipeline executions, shared by the CLI and the acceptance
// suite so both exercise identical code paths.

inline RunLog execute_policy_opt(const RunConfig& cfg) {
  const ProblemSpec spec = make_env(cfg.env);
  const Vector theta_env = cfg.env.true_theta();
  NeuralPolicy policy{spec.n, spec.m};
  const Vector th0 = detail::seeded_policy_init(policy, cfg.seed);
  const Trajectory reference = rollout(
      spec, theta_env, std::vector<Vector>(spec.T, Vector::Zero(spec.m)));
  const Vector th_safe = imitate_init(spec, theta_env, policy, th0, reference,
                                      cfg.imitate_iters, cfg.imitate_lr);
  return policy_opt(spec, theta_env, policy, th_safe, cfg.outer);
}

inline RunLog execute_plan(const RunConfig& cfg) {
  const ProblemSpec spec = make_env(cfg.env);
  const PolyControl ctrl{spec.m, cfg.poly_degree, spec.T};
  return plan(spec, cfg.env.true_theta(), ctrl,
              Vector::Zero(ctrl.param_dim()), cfg.outer);
}

inline std::vector<int> learn_mpc_mask(const RunConfig& cfg) {
  std::vector<int> mask = cfg.mask.empty() ? cfg.env.learnable : cfg.mask;
  if (mask.empty())
    for (int i = 0; i < cfg.env.theta_dim(); ++i) mask.push_back(i);
  return mask;
}

inline RunLog execute_learn_mpc(const RunConfig& cfg) {
  const ProblemSpec spec = make_env(cfg.env);
  const Vector theta_env = cfg.env.true_theta();
  const std::vector<Trajectory> demos =
      detail::perturb_demos(make_demos(cfg.env, cfg.demo_episodes,
                                       cfg.demo_seed, cfg.inner_schedule),
                            cfg.demo_noise, cfg.demo_seed + 1);
  const std::vector<int> mask = learn_mpc_mask(cfg);
  Vector nominal(mask.size());
  for (size_t k = 0; k < mask.size(); ++k) nominal[k] = theta_env[mask[k]];
  const Vector th0 = random_init_around(nominal, cfg.seed);
  return learn_mpc(spec, demos, mask, theta_env, th0,
                   cfg.outer.gradient_strategy, cfg.outer, cfg.inner,
                   cfg.inner_schedule, cfg.active_delta);
}

// Execute one configured experiment and persist its artifacts under
// cfg.output_dir. Returns the summary document.
inline Json run_pipeline(const RunConfig& cfg) {
  namespace fs = std::filesystem;
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "config.json");
    out << config_to_json(cfg).dump(2) << "\n";
  }
  const auto start = std::chrono::steady_clock::now();
  const ProblemSpec spec = make_env(cfg.env);
  const Vector theta_env = cfg.env.true_theta();
  Json summary;
  summary["pipeline"] = cfg.pipeline;
  summary["seed"] = cfg.seed;

  if (cfg.pipeline == "policy_opt") {
    log_info("running safe policy optimization");
    const RunLog log = execute_policy_opt(cfg);
    detail::write_runlog(dir, log);
    detail::write_trajectories(dir, log);
    summary.update(detail::runlog_summary(log));
  } else if (cfg.pipeline == "plan") {
    log_info("running safe motion planning");
    const RunLog log = execute_plan(cfg);
    detail::write_runlog(dir, log);
    detail::write_trajectories(dir, log);
    summary.update(detail::runlog_summary(log));
  } else if (cfg.pipeline == "learn_mpc") {
    log_info("learning from demonstrations");
    const RunLog log = execute_learn_mpc(cfg);
    detail::write_runlog(dir, log);
    detail::write_trajectories(dir, log);
    summary.update(detail::runlog_summary(log));
  } else if (cfg.pipeline == "gradcheck") {
    log_info("checking gradients against finite differences");
    const auto rows =
        gradcheck_barrier(spec, theta_env, cfg.outer.gamma, cfg.fd_step);
    CsvWriter csv(dir / "gradcheck.csv");
    csv.header({"param", "rel_error", "abs_error", "ref_norm"});
    double worst = 0.0;
    for (const auto& row : rows) {
      csv.begin_row();
      csv.field(row.param);
      csv.field(row.rel_error);
      csv.field(row.abs_error);
      csv.field(row.ref_norm);
      csv.end_row();
      worst = std::max(worst, row.rel_error);
    }
    summary["worst_rel_error"] = worst;
  } else if (cfg.pipeline == "gamma_sweep") {
    log_info("sweeping the barrier parameter");
    const auto rows = gamma_sweep(spec, theta_env, cfg.gammas,
                                  cfg.sweep_gradients, cfg.fd_step);
    CsvWriter csv(dir / "gamma_sweep.csv");
    csv.header({"gamma", "rel_traj_error", "rel_grad_error", "solve_time"});
    for (const auto& row : rows) {
      csv.begin_row();
      csv.field(row.gamma);
      csv.field(row.rel_traj_error);
      csv.field(row.rel_grad_error);
      csv.field(row.solve_time);
      csv.end_row();
    }
    summary["gammas"] = cfg.gammas;
  } else if (cfg.pipeline == "timing") {
    log_info("timing the auxiliary-system backward pass");
    const TimingReport report = timing(spec.n, spec.m, spec.r, cfg.horizons,
                                       cfg.timing_repeats, cfg.seed);
    CsvWriter csv(dir / "timing.csv");
    csv.header({"T", "backward_pass_time"});
    for (const auto& row : report.rows) {
      csv.begin_row();
      csv.field(row.horizon);
      csv.field(row.seconds);
      csv.end_row();
    }
    summary["loglog_slope"] = report.loglog_slope;
  } else {
    throw ConfigError("unknown pipeline '" + cfg.pipeline + "'");
  }

  const auto stop = std::chrono::steady_clock::now();
  detail::write_summary(dir, summary,
                        std::chrono::duration<double>(stop - start).count());
  return summary;
}

}  // namespace safepdp

#endif  // SAFEPDP_RUNNER_HPP
