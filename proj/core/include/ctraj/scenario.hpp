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

#ifndef CTRAJ_SCENARIO_HPP_
#define CTRAJ_SCENARIO_HPP_

#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace ctraj {

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed scenario file (I/O or JSON syntax).
class ScenarioParseError : public ScenarioError {
 public:
  using ScenarioError::ScenarioError;
};

/// Structurally valid file whose values violate a scenario invariant. The
/// message names the violated invariant.
class ScenarioValidationError : public ScenarioError {
 public:
  using ScenarioError::ScenarioError;
};

struct CylinderObstacle {
  Eigen::Vector2d center;  // planar (x, y), m
  double radius = 0.0;     // m
};

/// Full state of one vehicle at a trajectory endpoint: position, velocity
/// and thrust, stacked as a 9-vector in that order.
struct BoundaryState {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();  // m
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();  // m/s
  Eigen::Vector3d thrust = Eigen::Vector3d::Zero();    // N

  Eigen::Matrix<double, 9, 1> stacked() const {
    Eigen::Matrix<double, 9, 1> x;
    x << position, velocity, thrust;
    return x;
  }
};

struct AgentBoundary {
  BoundaryState start;
  BoundaryState goal;
};

/// All physical and problem parameters of one scenario. Immutable after
/// validation; safe to share read-only across threads.
struct ScenarioConfig {
  int num_agents = 0;
  double agent_mass = 0.0;  // kg
  double gravity = 9.81;    // m/s^2

  std::vector<CylinderObstacle> obstacles;
  double inter_agent_distance = 0.0;  // m, minimum pairwise separation

  Eigen::Vector3d position_min = Eigen::Vector3d::Zero();  // m
  Eigen::Vector3d position_max = Eigen::Vector3d::Zero();  // m
  double velocity_max = 0.0;                               // m/s
  double thrust_min = 0.0;                                 // N
  double thrust_max = 0.0;                                 // N
  double tilt_max = 0.0;                                   // rad, in [0, pi/2]
  Eigen::Vector3d thrust_rate_min = Eigen::Vector3d::Zero();  // N/s
  Eigen::Vector3d thrust_rate_max = Eigen::Vector3d::Zero();  // N/s
  double time_min = 0.0;  // s
  double time_max = 0.0;  // s

  // Normalized objective weights (final time, thrust rate, thrust); sum to 1.
  Eigen::Vector3d weights = Eigen::Vector3d::Zero();

  std::vector<AgentBoundary> agents;

  // Derived dimensions.
  int num_obstacles() const { return static_cast<int>(obstacles.size()); }
  int state_dim() const { return 9 * num_agents; }       // n_x
  int input_dim() const { return 3 * num_agents; }       // n_u
  int aug_state_dim() const { return state_dim() + 2; }  // states + (y, w)
  int aug_input_dim() const { return input_dim() + 1; }  // rates + dilation
  int per_agent_constraints() const { return 10 + num_obstacles(); }
  int num_pairs() const { return num_agents * (num_agents - 1) / 2; }
  // n_g: per-agent path constraints plus pairwise separation constraints.
  int num_state_constraints() const {
    return num_agents * per_agent_constraints() + num_pairs();
  }
  // n_G: relaxed violation bound plus input box (both sides).
  int num_input_constraints() const { return 2 * input_dim() + 3; }

  /// Thrust that exactly cancels gravity: (0, 0, m_q * g).
  Eigen::Vector3d hover_thrust() const {
    return Eigen::Vector3d(0.0, 0.0, agent_mass * gravity);
  }

  /// Bounds of the augmented input (thrust rates of all agents, then the
  /// time-dilation input bounded by the final-time window).
  Eigen::VectorXd aug_input_min() const;
  Eigen::VectorXd aug_input_max() const;

  /// Throws ScenarioValidationError naming the first violated invariant.
  void validate() const;
};

/// Objective weights scaled to physical units from the normalized triple.
struct DerivedWeights {
  double time_weight = 0.0;         // alpha_1, 1/s
  double thrust_rate_weight = 0.0;  // alpha_2, s/N^2
  double thrust_weight = 0.0;       // alpha_3, 1/(s N^2)
};

DerivedWeights derive_weights(const ScenarioConfig& cfg);

/// Augmented boundary states: all agent boundary states stacked, followed by
/// zero integrated-violation and zero accumulated-cost coordinates.
std::pair<Eigen::VectorXd, Eigen::VectorXd> boundary_augmented_states(
    const ScenarioConfig& cfg);

ScenarioConfig parse_scenario(const std::string& json_text);
std::string serialize_scenario(const ScenarioConfig& cfg);

/// Loads, parses and validates a scenario file.
ScenarioConfig load_scenario(const std::filesystem::path& path);
void save_scenario(const ScenarioConfig& cfg, const std::filesystem::path& path);

/// Bundled demo scenario: Table-style parameter set with start/goal positions
/// on the vertices and edge midpoints of the box spanned by (2,2,2) and
/// (14,14,14). Supported agent counts: 1, 2, 4, 6.
ScenarioConfig make_demo_scenario(int num_agents);

}  // namespace ctraj

#endif  // CTRAJ_SCENARIO_HPP_
