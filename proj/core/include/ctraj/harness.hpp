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

#ifndef CTRAJ_HARNESS_HPP_
#define CTRAJ_HARNESS_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ctraj/scp.hpp"
#include "ctraj/warmstart.hpp"

namespace ctraj {

// Exit codes shared by the drivers and the CLI.
inline constexpr int kExitOk = 0;
inline constexpr int kExitScenarioNotFound = 2;
inline constexpr int kExitBadInput = 3;
inline constexpr int kExitSolverFailure = 4;

enum class InitMode { warmstart, random_shooting };

std::string to_string(InitMode mode);

struct SolveOptions {
  std::filesystem::path scenario_path;
  InitMode init = InitMode::warmstart;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "out";
  int dense_samples_per_interval = 100;
  ScpSettings scp;
  FilterSettings filter;
};

/// Solves one scenario and writes report.json, convergence.csv,
/// trajectory.csv and solution.json into the output directory. Returns a
/// process exit code; failures additionally produce error.json.
int run_solve(const SolveOptions& options);

struct WarmstartOptions {
  std::filesystem::path scenario_path;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "out";
  ScpSettings scp;  // provides the grid size and relaxation bound
  FilterSettings filter;
};

/// Runs the particle filter only; writes warmstart.json (discrete
/// trajectory) and filter.json (per-step diagnostics).
int run_warmstart(const WarmstartOptions& options);

struct BenchmarkSpec {
  std::filesystem::path scenario_path;
  int trials = 10;
  std::uint64_t base_seed = 0;          // trial i uses base_seed + i...
  std::vector<std::uint64_t> seeds;     // ...unless given explicitly
  InitMode init = InitMode::warmstart;
  std::filesystem::path out_dir = "out";
  int jobs = 0;  // 0 = all hardware threads
  int time_grid_points = 64;
  ScpSettings scp;
  FilterSettings filter;

  void validate() const;
  std::vector<std::uint64_t> trial_seeds() const;
};

struct TrialSummary {
  std::uint64_t seed = 0;
  std::string status;
  int iterations = 0;
  double warmstart_time = 0.0;
  double solve_time = 0.0;
  double final_objective = 0.0;
  double final_violation = 0.0;
  std::string error;
};

struct BenchmarkResult {
  std::vector<TrialSummary> trials;
  // Aggregate curves on the fixed time grid.
  std::vector<double> grid_times;
  std::vector<double> objective_q25, objective_median, objective_q75;
  std::vector<double> violation_q25, violation_median, violation_q75;
  double median_warmstart_time = 0.0;
};

/// Runs seeded trials (in parallel) and writes per-trial convergence CSVs, a
/// quantile CSV on a fixed time grid and benchmark.json. Trial failures are
/// recorded and do not abort the run.
int run_benchmark(const BenchmarkSpec& spec, BenchmarkResult* result = nullptr);

struct PostprocessOptions {
  std::filesystem::path scenario_path;
  std::filesystem::path trajectory_path;  // discrete-trajectory JSON
  std::filesystem::path out_dir = "out";
  int dense_samples_per_interval = 100;
  IntegratorSettings ode;
};

/// Re-integrates a stored input sequence and writes trajectory.csv plus
/// report.json with the audited continuous-time margins.
int run_postprocess(const PostprocessOptions& options);

/// Quantile with linear interpolation between order statistics.
double linear_quantile(std::vector<double> values, double p);

}  // namespace ctraj

#endif  // CTRAJ_HARNESS_HPP_
