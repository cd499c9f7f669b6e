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

#ifndef SAFEPDP_IO_HPP
#define SAFEPDP_IO_HPP

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "safepdp/envs.hpp"
#include "safepdp/outer.hpp"

namespace safepdp {

using Json = nlohmann::json;

// Shortest representation that round-trips to the same double, so that CSV
// byte-identity is a valid determinism check.
inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& path) : out_(path) {
    if (!out_) throw Error("cannot open " + path.string() + " for writing");
  }
  void header(const std::vector<std::string>& cols) {
    for (size_t i = 0; i < cols.size(); ++i)
      out_ << (i ? "," : "") << cols[i];
    out_ << "\n";
  }
  void begin_row() { first_ = true; }
  void field(double v) { sep() << format_double(v); }
  void field(int v) { sep() << v; }
  void field(const std::string& v) { sep() << v; }
  void empty_field() { sep(); }
  void end_row() { out_ << "\n"; }

 private:
  std::ofstream& sep() {
    if (!first_) out_ << ",";
    first_ = false;
    return out_;
  }
  std::ofstream out_;
  bool first_ = true;
};

inline int log_level() {
  const char* v = std::getenv("SAFEPDP_LOG");
  if (!v) return 1;
  const std::string s(v);
  if (s == "error") return 0;
  if (s == "debug") return 2;
  return 1;
}

inline void log_info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << "[safepdp] " << msg << "\n";
}
inline void log_debug(const std::string& msg) {
  if (log_level() >= 2) std::cerr << "[safepdp:debug] " << msg << "\n";
}

// ---------------------------------------------------------------------------
// JSON (de)serialization of configs.

inline Vector vector_from_json(const Json& j) {
  Vector v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v[i] = j[i].get<double>();
  return v;
}

inline Json vector_to_json(const Vector& v) {
  Json j = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

inline EnvConfig env_from_json(const Json& j) {
  EnvConfig cfg;
  cfg.id = j.at("id").get<std::string>();
  cfg.dt = j.value("dt", 0.1);
  cfg.horizon = j.value("horizon", 50);
  cfg.x0 = vector_from_json(j.at("x0"));
  cfg.x_goal = vector_from_json(j.at("x_goal"));
  cfg.dyn_params = vector_from_json(j.at("dyn_params"));
  cfg.cost_weights = vector_from_json(j.at("cost_weights"));
  cfg.u_max = j.value("u_max", 0.0);
  cfg.x_max = j.value("x_max", 0.0);
  if (j.contains("x_box_dims"))
    cfg.x_box_dims = j.at("x_box_dims").get<std::vector<int>>();
  const std::string norm = j.value("norm", std::string("inf"));
  if (norm == "inf")
    cfg.norm = BoundNorm::kInfinity;
  else if (norm == "two")
    cfg.norm = BoundNorm::kTwo;
  else
    throw ConfigError("env.norm must be 'inf' or 'two'");
  if (j.contains("learnable"))
    cfg.learnable = j.at("learnable").get<std::vector<int>>();
  return cfg;
}

inline Json env_to_json(const EnvConfig& cfg) {
  Json j;
  j["id"] = cfg.id;
  j["dt"] = cfg.dt;
  j["horizon"] = cfg.horizon;
  j["x0"] = vector_to_json(cfg.x0);
  j["x_goal"] = vector_to_json(cfg.x_goal);
  j["dyn_params"] = vector_to_json(cfg.dyn_params);
  j["cost_weights"] = vector_to_json(cfg.cost_weights);
  j["u_max"] = cfg.u_max;
  j["x_max"] = cfg.x_max;
  j["x_box_dims"] = cfg.x_box_dims;
  j["norm"] = cfg.norm == BoundNorm::kInfinity ? "inf" : "two";
  j["learnable"] = cfg.learnable;
  return j;
}

inline GradientStrategy strategy_from_string(const std::string& s) {
  if (s == "A") return GradientStrategy::kA;
  if (s == "B") return GradientStrategy::kB;
  if (s == "C") return GradientStrategy::kC;
  throw ConfigError("gradient strategy must be A, B or C");
}

inline OuterOptions outer_from_json(const Json& j) {
  OuterOptions o;
  o.epsilon = j.value("epsilon", 1e-2);
  o.gamma = j.value("gamma", 1e-2);
  o.lr = j.value("lr", 1e-3);
  o.max_iters = j.value("max_iters", 100);
  o.tol_grad = j.value("tol_grad", 1e-6);
  o.max_shrinks = j.value("max_shrinks", 20);
  if (j.contains("continuation"))
    for (const auto& pair : j.at("continuation"))
      o.continuation.push_back(
          {pair.at(0).get<double>(), pair.at(1).get<double>()});
  o.gradient_strategy =
      strategy_from_string(j.value("strategy", std::string("B")));
  return o;
}

inline Json outer_to_json(const OuterOptions& o) {
  Json j;
  j["epsilon"] = o.epsilon;
  j["gamma"] = o.gamma;
  j["lr"] = o.lr;
  j["max_iters"] = o.max_iters;
  j["tol_grad"] = o.tol_grad;
  j["max_shrinks"] = o.max_shrinks;
  Json cont = Json::array();
  for (const auto& [e, g] : o.continuation) cont.push_back(Json::array({e, g}));
  j["continuation"] = cont;
  j["strategy"] = std::string(1, strategy_name(o.gradient_strategy));
  return j;
}

inline SolveOptions inner_from_json(const Json& j) {
  SolveOptions o;
  o.max_iters = j.value("max_iters", 300);
  o.tol_grad = j.value("tol_grad", 1e-8);
  o.reg_init = j.value("reg_init", 1e-6);
  o.ftb_tau = j.value("ftb_tau", 0.995);
  return o;
}

inline Json inner_to_json(const SolveOptions& o) {
  Json j;
  j["max_iters"] = o.max_iters;
  j["tol_grad"] = o.tol_grad;
  j["reg_init"] = o.reg_init;
  j["ftb_tau"] = o.ftb_tau;
  return j;
}

// Full experiment description; one file drives one `run` invocation.
struct RunConfig {
  std::string pipeline;  // policy_opt | plan | learn_mpc | gradcheck |
                         // gamma_sweep | timing
  EnvConfig env;
  OuterOptions outer;
  SolveOptions inner;
  std::string output_dir = "out";
  unsigned seed = 0;

  // learn_mpc
  int demo_episodes = 2;
  unsigned demo_seed = 7;
  std::vector<int> mask;               // free components of theta
  std::vector<double> inner_schedule;  // constrained path-following schedule
  double active_delta = 1e-3;
  double demo_noise = 0.0;             // seeded perturbation of demo controls

  // plan
  int poly_degree = 10;

  // policy_opt
  int imitate_iters = 200;
  double imitate_lr = 0.05;

  // gamma_sweep / gradcheck / timing
  std::vector<double> gammas = {1.0, 1e-1, 1e-2, 1e-3};
  bool sweep_gradients = true;
  double fd_step = 1e-5;
  std::vector<int> horizons = {50, 100, 200, 400};
  int timing_repeats = 25;
};

inline RunConfig config_from_json(const Json& j) {
  RunConfig cfg;
  cfg.pipeline = j.at("pipeline").get<std::string>();
  const std::vector<std::string> known = {"policy_opt", "plan",     "learn_mpc",
                                          "gradcheck",  "gamma_sweep", "timing"};
  if (std::find(known.begin(), known.end(), cfg.pipeline) == known.end())
    throw ConfigError("unknown pipeline '" + cfg.pipeline + "'");
  cfg.env = env_from_json(j.at("env"));
  if (j.contains("outer")) cfg.outer = outer_from_json(j.at("outer"));
  if (j.contains("inner")) cfg.inner = inner_from_json(j.at("inner"));
  cfg.output_dir = j.value("output_dir", std::string("out"));
  cfg.seed = j.value("seed", 0u);
  cfg.demo_episodes = j.value("demo_episodes", 2);
  cfg.demo_seed = j.value("demo_seed", 7u);
  if (j.contains("mask")) cfg.mask = j.at("mask").get<std::vector<int>>();
  if (j.contains("inner_schedule"))
    cfg.inner_schedule = j.at("inner_schedule").get<std::vector<double>>();
  cfg.active_delta = j.value("active_delta", 1e-3);
  cfg.demo_noise = j.value("demo_noise", 0.0);
  cfg.poly_degree = j.value("poly_degree", 10);
  cfg.imitate_iters = j.value("imitate_iters", 200);
  cfg.imitate_lr = j.value("imitate_lr", 0.05);
  if (j.contains("gammas"))
    cfg.gammas = j.at("gammas").get<std::vector<double>>();
  cfg.sweep_gradients = j.value("sweep_gradients", true);
  cfg.fd_step = j.value("fd_step", 1e-5);
  if (j.contains("horizons"))
    cfg.horizons = j.at("horizons").get<std::vector<int>>();
  cfg.timing_repeats = j.value("timing_repeats", 25);
  return cfg;
}

inline Json config_to_json(const RunConfig& cfg) {
  Json j;
  j["pipeline"] = cfg.pipeline;
  j["env"] = env_to_json(cfg.env);
  j["outer"] = outer_to_json(cfg.outer);
  j["inner"] = inner_to_json(cfg.inner);
  j["output_dir"] = cfg.output_dir;
  j["seed"] = cfg.seed;
  j["demo_episodes"] = cfg.demo_episodes;
  j["demo_seed"] = cfg.demo_seed;
  j["mask"] = cfg.mask;
  j["inner_schedule"] = cfg.inner_schedule;
  j["active_delta"] = cfg.active_delta;
  j["demo_noise"] = cfg.demo_noise;
  j["poly_degree"] = cfg.poly_degree;
  j["imitate_iters"] = cfg.imitate_iters;
  j["imitate_lr"] = cfg.imitate_lr;
  j["gammas"] = cfg.gammas;
  j["sweep_gradients"] = cfg.sweep_gradients;
  j["fd_step"] = cfg.fd_step;
  j["horizons"] = cfg.horizons;
  j["timing_repeats"] = cfg.timing_repeats;
  return j;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  Json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  try {
    return config_from_json(j);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("config schema error: ") + e.what());
  }
}

}  // namespace safepdp

#endif  // SAFEPDP_IO_HPP
