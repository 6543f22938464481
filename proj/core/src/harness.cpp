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

#include "ctraj/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

namespace ctraj {
namespace {

using nlohmann::json;

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void write_error(const std::filesystem::path& out_dir, const std::string& stage,
                 const std::string& message) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) return;
  json j;
  j["error"] = message;
  j["stage"] = stage;
  std::ofstream out(out_dir / "error.json", std::ios::binary);
  if (out) out << j.dump(2) << "\n";
}

json audit_to_json(const TrajectoryAudit& audit) {
  json j;
  j["min_inter_agent_distance"] = audit.min_inter_agent_distance;
  j["min_obstacle_distance"] = audit.min_obstacle_distance;
  j["max_speed"] = audit.max_speed;
  j["max_thrust"] = audit.max_thrust;
  j["min_thrust"] = audit.min_thrust;
  j["max_tilt_residual"] = audit.max_tilt_residual;
  j["max_box_violation"] = audit.max_box_violation;
  return j;
}

json history_to_json(const std::vector<ScpIteration>& history) {
  json rows = json::array();
  for (const auto& it : history) {
    rows.push_back({{"time", it.time},
                    {"objective", it.objective},
                    {"violation", it.violation},
                    {"displacement", it.displacement},
                    {"slack_mass", it.slack_mass}});
  }
  return rows;
}

std::string convergence_csv(const std::vector<ScpIteration>& history) {
  std::ostringstream out;
  out << "iteration,time_s,objective,violation\n";
  int i = 1;
  for (const auto& it : history) {
    out << i++ << ',' << format_double(it.time) << ',' << format_double(it.objective)
        << ',' << format_double(it.violation) << '\n';
  }
  return out.str();
}

struct TrialOutcome {
  TrialSummary summary;
  std::vector<ScpIteration> history;
  bool ok = false;
};

TrialOutcome run_trial(const ScenarioConfig& cfg, const BenchmarkSpec& spec,
                       std::uint64_t seed) {
  TrialOutcome outcome;
  outcome.summary.seed = seed;
  ScpSettings scp = spec.scp;
  try {
    double t_offset = 0.0;
    DiscreteTrajectory initial;
    if (spec.init == InitMode::warmstart) {
      const DualityModel model =
          build_duality_model(cfg, Grid{scp.num_nodes}, scp.relaxation);
      initial = generate_warmstart(cfg, model, spec.filter, seed, nullptr, &t_offset);
    } else {
      initial = random_initialization(cfg, scp, seed);
    }
    outcome.summary.warmstart_time = t_offset;
    const ScpResult result = prox_linear_solve(initial, cfg, scp, t_offset);
    if (result.status == ScpStatus::qp_failure) {
      outcome.summary.status = to_string(result.status);
      outcome.summary.error = result.error;
      return outcome;
    }
    outcome.summary.status = to_string(result.status);
    outcome.summary.iterations = result.iterations;
    outcome.summary.solve_time = result.solve_time;
    if (!result.history.empty()) {
      outcome.summary.final_objective = result.history.back().objective;
      outcome.summary.final_violation = result.history.back().violation;
    }
    outcome.history = result.history;
    outcome.ok = !result.history.empty();
  } catch (const std::exception& e) {
    outcome.summary.status = "exception";
    outcome.summary.error = e.what();
  }
  return outcome;
}

// Step-function evaluation of a convergence record at time t: the last
// iterate recorded no later than t, backfilled with the first iterate before
// any record exists.
double history_value_at(const std::vector<ScpIteration>& history, double t,
                        bool objective) {
  const ScpIteration* chosen = &history.front();
  for (const auto& row : history) {
    if (row.time <= t) chosen = &row;
  }
  return objective ? chosen->objective : chosen->violation;
}

}  // namespace

std::string to_string(InitMode mode) {
  return mode == InitMode::warmstart ? "warmstart" : "random";
}

double linear_quantile(std::vector<double> values, double p) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double pos = p * (static_cast<double>(values.size()) - 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  const double frac = pos - static_cast<double>(lo);
  return (1.0 - frac) * values[lo] + frac * values[hi];
}

void BenchmarkSpec::validate() const {
  if (trials < 1) throw std::invalid_argument("trial count must be >= 1");
  if (scp.budget <= 0.0) throw std::invalid_argument("budget must be positive");
  if (!seeds.empty() && static_cast<int>(seeds.size()) != trials) {
    throw std::invalid_argument("explicit seed list must match trial count");
  }
}

std::vector<std::uint64_t> BenchmarkSpec::trial_seeds() const {
  if (!seeds.empty()) return seeds;
  std::vector<std::uint64_t> out;
  out.reserve(trials);
  for (int i = 0; i < trials; ++i) out.push_back(base_seed + i);
  return out;
}

int run_solve(const SolveOptions& options) {
  ScenarioConfig cfg;
  try {
    cfg = load_scenario(options.scenario_path);
  } catch (const ScenarioValidationError& e) {
    std::cerr << "scenario invalid: " << e.what() << "\n";
    write_error(options.out_dir, "load_scenario", e.what());
    return kExitBadInput;
  } catch (const ScenarioError& e) {
    std::cerr << e.what() << "\n";
    write_error(options.out_dir, "load_scenario", e.what());
    return kExitScenarioNotFound;
  }

  std::filesystem::create_directories(options.out_dir);
  ScpSettings scp = options.scp;

  double t_offset = 0.0;
  DiscreteTrajectory initial;
  FilterDiagnostics filter_diag;
  try {
    if (options.init == InitMode::warmstart) {
      const DualityModel model =
          build_duality_model(cfg, Grid{scp.num_nodes}, scp.relaxation);
      initial = generate_warmstart(cfg, model, options.filter, options.seed,
                                   &filter_diag, &t_offset);
    } else {
      initial = random_initialization(cfg, scp, options.seed);
    }
  } catch (const std::exception& e) {
    std::cerr << "initialization failed: " << e.what() << "\n";
    write_error(options.out_dir, "initialization", e.what());
    return kExitSolverFailure;
  }

  const ScpResult result = prox_linear_solve(initial, cfg, scp, t_offset);
  if (result.status == ScpStatus::qp_failure) {
    std::cerr << "solver failure: " << result.error << "\n";
    write_error(options.out_dir, "prox_linear_solve", result.error);
    return kExitSolverFailure;
  }

  const Grid grid{scp.num_nodes};
  const DerivedWeights w = derive_weights(cfg);
  DenseRollout rollout;
  try {
    rollout = rollout_dense(result.trajectory.inputs, cfg, w, grid, scp.ode,
                            options.dense_samples_per_interval);
  } catch (const std::exception& e) {
    std::cerr << "post-processing failed: " << e.what() << "\n";
    write_error(options.out_dir, "rollout_dense", e.what());
    return kExitSolverFailure;
  }

  json report;
  report["objective"] = rollout.nodes.objective;
  report["violation"] = rollout.nodes.violation;
  report["final_time"] = rollout.nodes.final_time;
  report["status"] = to_string(result.status);
  report["iterations"] = result.iterations;
  report["solve_time"] = result.solve_time;
  report["init"] = to_string(options.init);
  report["seed"] = options.seed;
  report["warmstart_time"] = t_offset;
  report["history"] = history_to_json(result.history);
  report["audit"] = audit_to_json(rollout.audit);
  write_text(options.out_dir / "report.json", report.dump(2) + "\n");

  write_text(options.out_dir / "convergence.csv", convergence_csv(result.history));
  {
    std::ofstream out(options.out_dir / "trajectory.csv", std::ios::binary);
    write_trajectory_csv(out, rollout, cfg);
  }
  write_text(options.out_dir / "solution.json",
             serialize_trajectory(result.trajectory));
  return kExitOk;
}

int run_warmstart(const WarmstartOptions& options) {
  ScenarioConfig cfg;
  try {
    cfg = load_scenario(options.scenario_path);
  } catch (const ScenarioValidationError& e) {
    std::cerr << "scenario invalid: " << e.what() << "\n";
    write_error(options.out_dir, "load_scenario", e.what());
    return kExitBadInput;
  } catch (const ScenarioError& e) {
    std::cerr << e.what() << "\n";
    write_error(options.out_dir, "load_scenario", e.what());
    return kExitScenarioNotFound;
  }

  std::filesystem::create_directories(options.out_dir);
  try {
    const DualityModel model = build_duality_model(
        cfg, Grid{options.scp.num_nodes}, options.scp.relaxation);
    FilterDiagnostics diag;
    double t_ws = 0.0;
    const DiscreteTrajectory traj =
        generate_warmstart(cfg, model, options.filter, options.seed, &diag, &t_ws);
    write_text(options.out_dir / "warmstart.json", serialize_trajectory(traj));

    json j;
    j["seed"] = options.seed;
    j["num_particles"] = options.filter.num_particles;
    j["selected_index"] = diag.selected_index;
    j["scores"] = diag.scores;
    j["warmstart_time"] = t_ws;
    j["steps"] = json::array();
    int resample_events = 0;
    for (const auto& s : diag.steps) {
      j["steps"].push_back({{"effective_sample_size", s.effective_sample_size},
                            {"resampled", s.resampled},
                            {"min_eigenvalue_before_repair",
                             s.min_eigenvalue_before_repair}});
      resample_events += s.resampled ? 1 : 0;
    }
    j["resample_events"] = resample_events;
    write_text(options.out_dir / "filter.json", j.dump(2) + "\n");
  } catch (const std::exception& e) {
    std::cerr << "warm-start generation failed: " << e.what() << "\n";
    write_error(options.out_dir, "generate_warmstart", e.what());
    return kExitSolverFailure;
  }
  return kExitOk;
}

int run_benchmark(const BenchmarkSpec& spec, BenchmarkResult* result_out) {
  try {
    spec.validate();
  } catch (const std::exception& e) {
    std::cerr << "invalid benchmark spec: " << e.what() << "\n";
    return kExitBadInput;
  }
  ScenarioConfig cfg;
  try {
    cfg = load_scenario(spec.scenario_path);
  } catch (const ScenarioValidationError& e) {
    std::cerr << "scenario invalid: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const ScenarioError& e) {
    std::cerr << e.what() << "\n";
    return kExitScenarioNotFound;
  }

  std::filesystem::create_directories(spec.out_dir / "trials");
  const std::vector<std::uint64_t> seeds = spec.trial_seeds();
  std::vector<TrialOutcome> outcomes(seeds.size());

  const int hardware = static_cast<int>(std::thread::hardware_concurrency());
  const int jobs = std::max(1, spec.jobs > 0 ? spec.jobs : hardware);
  std::vector<std::thread> workers;
  std::atomic<int> next{0};
  for (int t = 0; t < std::min<int>(jobs, static_cast<int>(seeds.size())); ++t) {
    workers.emplace_back([&]() {
      while (true) {
        const int i = next.fetch_add(1);
        if (i >= static_cast<int>(seeds.size())) break;
        outcomes[i] = run_trial(cfg, spec, seeds[i]);
      }
    });
  }
  for (auto& w : workers) w.join();

  BenchmarkResult result;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    result.trials.push_back(outcomes[i].summary);
    std::ostringstream name;
    name << "trial_" << i << ".csv";
    write_text(spec.out_dir / "trials" / name.str(),
               convergence_csv(outcomes[i].history));
  }

  // Aggregate quantile curves on the fixed time grid over surviving trials.
  const double budget = spec.scp.budget;
  for (int g = 1; g <= spec.time_grid_points; ++g) {
    result.grid_times.push_back(budget * g / spec.time_grid_points);
  }
  std::vector<const std::vector<ScpIteration>*> histories;
  std::vector<double> warmstart_times;
  for (const auto& o : outcomes) {
    if (o.ok) {
      histories.push_back(&o.history);
      warmstart_times.push_back(o.summary.warmstart_time);
    }
  }
  for (const double t : result.grid_times) {
    std::vector<double> obj, vio;
    for (const auto* h : histories) {
      obj.push_back(history_value_at(*h, t, true));
      vio.push_back(history_value_at(*h, t, false));
    }
    result.objective_q25.push_back(linear_quantile(obj, 0.25));
    result.objective_median.push_back(linear_quantile(obj, 0.5));
    result.objective_q75.push_back(linear_quantile(obj, 0.75));
    result.violation_q25.push_back(linear_quantile(vio, 0.25));
    result.violation_median.push_back(linear_quantile(vio, 0.5));
    result.violation_q75.push_back(linear_quantile(vio, 0.75));
  }
  result.median_warmstart_time = linear_quantile(warmstart_times, 0.5);

  std::ostringstream quantiles;
  quantiles << "time_s,objective_q25,objective_median,objective_q75,"
               "violation_q25,violation_median,violation_q75\n";
  for (std::size_t i = 0; i < result.grid_times.size(); ++i) {
    quantiles << format_double(result.grid_times[i]) << ','
              << format_double(result.objective_q25[i]) << ','
              << format_double(result.objective_median[i]) << ','
              << format_double(result.objective_q75[i]) << ','
              << format_double(result.violation_q25[i]) << ','
              << format_double(result.violation_median[i]) << ','
              << format_double(result.violation_q75[i]) << '\n';
  }
  write_text(spec.out_dir / "quantiles.csv", quantiles.str());

  json j;
  j["scenario"] = spec.scenario_path.string();
  j["init"] = to_string(spec.init);
  j["trials"] = spec.trials;
  j["budget"] = budget;
  j["median_warmstart_time"] = result.median_warmstart_time;
  j["trial_summaries"] = json::array();
  for (const auto& t : result.trials) {
    j["trial_summaries"].push_back({{"seed", t.seed},
                                    {"status", t.status},
                                    {"iterations", t.iterations},
                                    {"warmstart_time", t.warmstart_time},
                                    {"solve_time", t.solve_time},
                                    {"final_objective", t.final_objective},
                                    {"final_violation", t.final_violation},
                                    {"error", t.error}});
  }
  write_text(spec.out_dir / "benchmark.json", j.dump(2) + "\n");

  if (result_out != nullptr) *result_out = result;
  return kExitOk;
}

int run_postprocess(const PostprocessOptions& options) {
  ScenarioConfig cfg;
  try {
    cfg = load_scenario(options.scenario_path);
  } catch (const ScenarioValidationError& e) {
    std::cerr << "scenario invalid: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const ScenarioError& e) {
    std::cerr << e.what() << "\n";
    return kExitScenarioNotFound;
  }

  DiscreteTrajectory traj;
  try {
    std::ifstream in(options.trajectory_path);
    if (!in) {
      std::cerr << "trajectory not found: " << options.trajectory_path << "\n";
      return kExitScenarioNotFound;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    traj = parse_trajectory(buf.str());
  } catch (const std::exception& e) {
    std::cerr << "trajectory parse failure: " << e.what() << "\n";
    return kExitBadInput;
  }

  std::filesystem::create_directories(options.out_dir);
  try {
    const Grid grid{static_cast<int>(traj.inputs.size()) + 1};
    const DerivedWeights w = derive_weights(cfg);
    const DenseRollout rollout =
        rollout_dense(traj.inputs, cfg, w, grid, options.ode,
                      options.dense_samples_per_interval);
    json report;
    report["objective"] = rollout.nodes.objective;
    report["violation"] = rollout.nodes.violation;
    report["final_time"] = rollout.nodes.final_time;
    report["audit"] = audit_to_json(rollout.audit);
    write_text(options.out_dir / "report.json", report.dump(2) + "\n");
    std::ofstream out(options.out_dir / "trajectory.csv", std::ios::binary);
    write_trajectory_csv(out, rollout, cfg);
  } catch (const std::exception& e) {
    std::cerr << "post-processing failed: " << e.what() << "\n";
    write_error(options.out_dir, "rollout_dense", e.what());
    return kExitSolverFailure;
  }
  return kExitOk;
}

}  // namespace ctraj
