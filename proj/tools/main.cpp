/* Copyright (c) 2026, the ctraj authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required, software distributed under the License is distributed on
 * an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either
 * express or implied. See the License for the specific language governing
 * permissions and limitations under the License.
 */

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ctraj/harness.hpp"

namespace {

struct CommonFlags {
  std::string scenario;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  double budget = 120.0;
  std::string init = "warmstart";
  int num_particles = 30;
  double beta = 20.0;
  double rho = 0.1;
  double gamma = 1e-6;
  int num_nodes = 8;
};

// Flags shared by the solver-facing subcommands. Every flag can also be set
// through the CTRAJ_* environment variables.
void add_solver_flags(CLI::App* cmd, CommonFlags* flags, bool with_init) {
  cmd->add_option("--scenario", flags->scenario, "scenario JSON path")
      ->required()
      ->envname("CTRAJ_SCENARIO");
  cmd->add_option("--out", flags->out_dir, "output directory")
      ->envname("CTRAJ_OUT");
  cmd->add_option("--seed", flags->seed, "RNG seed")->envname("CTRAJ_SEED");
  cmd->add_option("--budget", flags->budget, "solver-time budget per solve, s")
      ->envname("CTRAJ_BUDGET");
  if (with_init) {
    cmd->add_option("--init", flags->init, "initialization: warmstart|random")
        ->check(CLI::IsMember({"warmstart", "random"}))
        ->envname("CTRAJ_INIT");
  }
  cmd->add_option("--np", flags->num_particles, "number of filter particles")
      ->envname("CTRAJ_NP");
  cmd->add_option("--beta", flags->beta, "dynamics-defect penalty weight")
      ->envname("CTRAJ_BETA");
  cmd->add_option("--rho", flags->rho, "proximal weight (>= 1/beta)")
      ->envname("CTRAJ_RHO");
  cmd->add_option("--gamma", flags->gamma, "violation-coordinate bound")
      ->envname("CTRAJ_GAMMA");
  cmd->add_option("--N", flags->num_nodes, "number of grid nodes")
      ->envname("CTRAJ_N");
}

void apply_flags(const CommonFlags& flags, ctraj::ScpSettings* scp,
                 ctraj::FilterSettings* filter) {
  scp->penalty = flags.beta;
  scp->prox_weight = flags.rho;
  scp->relaxation = flags.gamma;
  scp->num_nodes = flags.num_nodes;
  scp->budget = flags.budget;
  filter->num_particles = flags.num_particles;
}

ctraj::InitMode parse_init(const std::string& name) {
  return name == "random" ? ctraj::InitMode::random_shooting
                          : ctraj::InitMode::warmstart;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multiagent quadrotor trajectory optimizer"};
  app.require_subcommand(1);

  CommonFlags solve_flags, ws_flags, bench_flags;
  int trials = 10;
  int jobs = 0;
  std::string traj_path, pp_scenario, pp_out = "out";

  CLI::App* solve = app.add_subcommand("solve", "solve one scenario");
  add_solver_flags(solve, &solve_flags, true);

  CLI::App* warmstart =
      app.add_subcommand("warmstart", "generate a warm-start trajectory");
  add_solver_flags(warmstart, &ws_flags, false);

  CLI::App* benchmark =
      app.add_subcommand("benchmark", "seeded Monte Carlo comparison");
  add_solver_flags(benchmark, &bench_flags, true);
  benchmark->add_option("--trials", trials, "number of trials")
      ->envname("CTRAJ_TRIALS");
  benchmark->add_option("--jobs", jobs, "parallel trial workers (0 = all cores)")
      ->envname("CTRAJ_JOBS");

  CLI::App* postprocess = app.add_subcommand(
      "postprocess", "re-integrate and audit a stored trajectory");
  postprocess->add_option("--scenario", pp_scenario, "scenario JSON path")
      ->required();
  postprocess->add_option("--trajectory", traj_path, "trajectory JSON path")
      ->required();
  postprocess->add_option("--out", pp_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed()) {
      ctraj::SolveOptions options;
      options.scenario_path = solve_flags.scenario;
      options.out_dir = solve_flags.out_dir;
      options.seed = solve_flags.seed;
      options.init = parse_init(solve_flags.init);
      apply_flags(solve_flags, &options.scp, &options.filter);
      return ctraj::run_solve(options);
    }
    if (warmstart->parsed()) {
      ctraj::WarmstartOptions options;
      options.scenario_path = ws_flags.scenario;
      options.out_dir = ws_flags.out_dir;
      options.seed = ws_flags.seed;
      apply_flags(ws_flags, &options.scp, &options.filter);
      return ctraj::run_warmstart(options);
    }
    if (benchmark->parsed()) {
      ctraj::BenchmarkSpec spec;
      spec.scenario_path = bench_flags.scenario;
      spec.out_dir = bench_flags.out_dir;
      spec.base_seed = bench_flags.seed;
      spec.trials = trials;
      spec.jobs = jobs;
      spec.init = parse_init(bench_flags.init);
      apply_flags(bench_flags, &spec.scp, &spec.filter);
      return ctraj::run_benchmark(spec);
    }
    if (postprocess->parsed()) {
      ctraj::PostprocessOptions options;
      options.scenario_path = pp_scenario;
      options.trajectory_path = traj_path;
      options.out_dir = pp_out;
      return ctraj::run_postprocess(options);
    }
  } catch (const std::exception& e) {
    std::cerr << "fatal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
