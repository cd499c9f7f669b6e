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

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "safepdp/runner.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;
constexpr int kExitSafety = 4;

int cmd_run(const std::string& config_path, int seed_override,
            const std::string& out_override) {
  safepdp::RunConfig cfg;
  try {
    cfg = safepdp::load_config(config_path);
    if (seed_override >= 0) cfg.seed = static_cast<unsigned>(seed_override);
    if (!out_override.empty()) cfg.output_dir = out_override;
  } catch (const safepdp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  try {
    const safepdp::Json summary = safepdp::run_pipeline(cfg);
    std::cout << summary.dump(2) << "\n";
    return kExitOk;
  } catch (const safepdp::SafetyBreach& e) {
    std::cerr << "safety breach: " << e.what() << "\n";
    return kExitSafety;
  } catch (const safepdp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const safepdp::Error& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return kExitSolver;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSolver;
  }
}

int cmd_validate(const std::string& config_path) {
  try {
    const safepdp::RunConfig cfg = safepdp::load_config(config_path);
    safepdp::make_env(cfg.env);  // env parameters must be constructible
    std::cout << "ok: " << cfg.pipeline << " on " << cfg.env.id << "\n";
    return kExitOk;
  } catch (const safepdp::Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
}

int cmd_list_envs() {
  std::cout << "pendulum   n=2 m=1  dyn_params: mass, length, damping\n"
            << "cartpole   n=4 m=1  dyn_params: cart mass, pole mass, pole "
               "length\n"
            << "twolink    n=4 m=2  dyn_params: m1, m2, l1, l2\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"barrier-based differentiable optimal control experiments"};
  app.require_subcommand(1);

  std::string config_path;
  int seed_override = -1;
  std::string out_override;

  CLI::App* run = app.add_subcommand("run", "execute a configured experiment");
  run->add_option("--config", config_path, "config JSON file")->required();
  run->add_option("--seed", seed_override, "override the config seed");
  run->add_option("--out", out_override, "override the output directory");

  CLI::App* validate =
      app.add_subcommand("validate", "parse and check a config file");
  validate->add_option("--config", config_path, "config JSON file")->required();

  app.add_subcommand("list-envs", "list available environments");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) return cmd_run(config_path, seed_override, out_override);
  if (validate->parsed()) return cmd_validate(config_path);
  return cmd_list_envs();
}
