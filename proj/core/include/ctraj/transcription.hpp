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

#ifndef CTRAJ_TRANSCRIPTION_HPP_
#define CTRAJ_TRANSCRIPTION_HPP_

#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ctraj/integrator.hpp"
#include "ctraj/scenario.hpp"

namespace ctraj {

/// Uniform normalized-time grid on [0, 1].
struct Grid {
  int num_nodes = 2;  // N >= 2

  double spacing() const { return 1.0 / (num_nodes - 1); }
  // 0-based node index.
  double node(int k) const { return static_cast<double>(k) / (num_nodes - 1); }
  int num_intervals() const { return num_nodes - 1; }
};

/// State parameters at every node and constant input parameters on every
/// interval.
struct DiscreteTrajectory {
  std::vector<Eigen::VectorXd> states;  // N entries, aug_state_dim each
  std::vector<Eigen::VectorXd> inputs;  // N-1 entries, aug_input_dim each

  int num_nodes() const { return static_cast<int>(states.size()); }
};

std::string serialize_trajectory(const DiscreteTrajectory& traj);
DiscreteTrajectory parse_trajectory(const std::string& json_text);

/// First-order model of one interval's shooting map:
/// next_state ~ A state + B input + c.
struct LinearizedStep {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  Eigen::VectorXd c;
};

/// Integrates one interval of the augmented dynamics under a constant input.
Eigen::VectorXd shoot(const Eigen::VectorXd& state, const Eigen::VectorXd& input,
                      const Grid& grid, int interval, const ScenarioConfig& cfg,
                      const DerivedWeights& w, const IntegratorSettings& settings,
                      IntegratorStats* stats = nullptr);

/// Linearizes the interval's shooting map at (state, input) by integrating
/// the variational system; the offset satisfies
/// c = endpoint - A state - B input.
LinearizedStep linearize(const Eigen::VectorXd& state, const Eigen::VectorXd& input,
                         const Grid& grid, int interval, const ScenarioConfig& cfg,
                         const DerivedWeights& w, const IntegratorSettings& settings,
                         IntegratorStats* stats = nullptr);

struct IterationRecord {
  double time = 0.0;       // cumulative solver time, s (deterministic model)
  double objective = 0.0;  // post-processed running cost at the final node
  double violation = 0.0;  // post-processed violation metric
};

struct SolveReport {
  double objective = 0.0;
  double violation = 0.0;
  double final_time = 0.0;  // s
  std::string status;
  int iterations = 0;
  std::vector<IterationRecord> history;
};

/// Reported violation of a post-processed trajectory: the violation
/// coordinate of the re-integrated final state, plus the l1 distance of its
/// first n_x entries from the target boundary state, plus the l1 amount by
/// which each input parameter exceeds its box.
double constraint_violation_metric(const Eigen::VectorXd& final_state,
                                   const std::vector<Eigen::VectorXd>& inputs,
                                   const ScenarioConfig& cfg);

/// Physical final time of a piecewise-constant dilation profile.
double final_time_of(const std::vector<Eigen::VectorXd>& inputs,
                     const ScenarioConfig& cfg, const Grid& grid);

/// Re-integrates the dynamics from the boundary initial state under the
/// given input parameters and evaluates objective, violation and node states.
struct NodeRollout {
  std::vector<Eigen::VectorXd> node_states;  // N entries including x0
  double objective = 0.0;
  double violation = 0.0;
  double final_time = 0.0;
};
NodeRollout rollout_nodes(const std::vector<Eigen::VectorXd>& inputs,
                          const ScenarioConfig& cfg, const DerivedWeights& w,
                          const Grid& grid, const IntegratorSettings& settings,
                          IntegratorStats* stats = nullptr);

/// Worst-case continuous-time constraint figures over dense samples.
struct TrajectoryAudit {
  double min_inter_agent_distance = 0.0;       // m (inf for single agent)
  std::vector<double> min_obstacle_distance;   // m, per obstacle, planar
  double max_speed = 0.0;                      // m/s
  double max_thrust = 0.0;                     // N
  double min_thrust = 0.0;                     // N
  double max_tilt_residual = 0.0;              // cos(tilt_max)|T| - T_z, N
  double max_box_violation = 0.0;              // m
};

struct DenseSample {
  double time = 0.0;  // physical time, s
  Eigen::VectorXd state;
};

struct DenseRollout {
  std::vector<DenseSample> samples;  // samples_per_interval per interval + 1
  NodeRollout nodes;
  TrajectoryAudit audit;
};

/// Dense post-processing rollout: uniformly samples each interval in
/// physical time and audits every path constraint along the samples.
DenseRollout rollout_dense(const std::vector<Eigen::VectorXd>& inputs,
                           const ScenarioConfig& cfg, const DerivedWeights& w,
                           const Grid& grid, const IntegratorSettings& settings,
                           int samples_per_interval = 100);

/// CSV with columns time_s, agent_id, rx, ry, rz, vx, vy, vz, Tx, Ty, Tz.
void write_trajectory_csv(std::ostream& out, const DenseRollout& rollout,
                          const ScenarioConfig& cfg);

/// Shortest round-trip decimal formatting used by all CSV output.
std::string format_double(double value);

}  // namespace ctraj

#endif  // CTRAJ_TRANSCRIPTION_HPP_
