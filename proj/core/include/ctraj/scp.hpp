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

#ifndef CTRAJ_SCP_HPP_
#define CTRAJ_SCP_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ctraj/qp.hpp"
#include "ctraj/transcription.hpp"

namespace ctraj {

struct ScpSettings {
  int num_nodes = 8;            // N (includes both endpoints)
  double penalty = 20.0;        // beta, l1 weight on dynamics-defect slacks
  double prox_weight = 0.1;     // rho; must satisfy rho >= 1/beta
  double relaxation = 1e-6;     // gamma, bound on the violation coordinate
  int max_iterations = 500;
  double tolerance = 1e-6;      // on the squared iterate displacement
  double budget = 120.0;        // solver-time budget, s (deterministic clock)

  IntegratorSettings ode;       // linearization & post-processing tolerances
  QpSettings qp;

  void validate() const;  // throws std::invalid_argument
};

/// Index map of the stacked subproblem decision vector
/// [states, inputs, defect slacks (+), defect slacks (-)].
struct SubproblemLayout {
  int state_dim = 0;   // per node
  int input_dim = 0;   // per interval
  int num_nodes = 0;

  static SubproblemLayout make(const ScenarioConfig& cfg, int num_nodes);

  int state_offset(int k) const { return state_dim * k; }
  int input_offset(int k) const {
    return state_dim * num_nodes + input_dim * k;
  }
  int slack_up_offset(int k) const {
    return state_dim * num_nodes + input_dim * (num_nodes - 1) + state_dim * k;
  }
  int slack_down_offset(int k) const {
    return slack_up_offset(num_nodes - 1) + state_dim * k;
  }
  int num_vars() const { return slack_down_offset(num_nodes - 1); }
};

/// Builds the proximal linearized subproblem around the reference trajectory:
/// linear-dynamics equalities with two-sided nonnegative defect slacks, exact
/// initial state, exact terminal agent states, the relaxed bound on the
/// violation coordinate at interior and final nodes, and the input box.
QpProblem assemble_subproblem(const std::vector<LinearizedStep>& steps,
                              const DiscreteTrajectory& reference,
                              const ScenarioConfig& cfg,
                              const ScpSettings& settings);

struct SubproblemSolution {
  DiscreteTrajectory trajectory;
  std::vector<Eigen::VectorXd> slack_up;    // q_k >= 0
  std::vector<Eigen::VectorXd> slack_down;  // z_k >= 0
  double slack_mass = 0.0;                  // sum of all slack entries
};

SubproblemSolution split_subproblem_solution(const Eigen::VectorXd& primal,
                                             const SubproblemLayout& layout);

enum class ScpStatus { converged, budget_exhausted, max_iterations, qp_failure };

std::string to_string(ScpStatus status);

struct ScpIteration {
  double time = 0.0;         // cumulative solver time (deterministic clock)
  double objective = 0.0;    // post-processed objective
  double violation = 0.0;    // post-processed violation metric
  double displacement = 0.0; // squared iterate displacement
  double slack_mass = 0.0;
  int qp_iterations = 0;
};

struct ScpResult {
  DiscreteTrajectory trajectory;
  ScpStatus status = ScpStatus::max_iterations;
  int iterations = 0;
  double solve_time = 0.0;  // deterministic clock, includes initial offset
  std::vector<ScpIteration> history;
  std::string error;  // populated on qp_failure
};

/// Observer invoked after every subproblem solve; used by verification
/// harnesses to audit the QP data and solution.
using SubproblemObserver =
    std::function<void(int iteration, const QpProblem&, const QpSolution&)>;

/// Prox-linear loop: linearize the shooting maps around the reference,
/// assemble and solve the proximal subproblem, accept the solution as the
/// next reference, and stop on iterate displacement, iteration cap or budget.
/// `time_offset` seeds the deterministic clock (e.g. with warm-start time).
ScpResult prox_linear_solve(const DiscreteTrajectory& initial,
                            const ScenarioConfig& cfg, const ScpSettings& settings,
                            double time_offset = 0.0,
                            const SubproblemObserver& observer = nullptr);

/// Benchmark initialization: inputs drawn componentwise uniform within the
/// augmented input box, states obtained by forward shooting from the initial
/// boundary state.
DiscreteTrajectory random_initialization(const ScenarioConfig& cfg,
                                         const ScpSettings& settings,
                                         std::uint64_t seed);

/// States from forward shooting under the given inputs.
DiscreteTrajectory forward_shoot(const std::vector<Eigen::VectorXd>& inputs,
                                 const ScenarioConfig& cfg,
                                 const ScpSettings& settings);

}  // namespace ctraj

#endif  // CTRAJ_SCP_HPP_
