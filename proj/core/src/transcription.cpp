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

#include "ctraj/transcription.hpp"

#include <charconv>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

namespace ctraj {

std::string format_double(double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::string serialize_trajectory(const DiscreteTrajectory& traj) {
  nlohmann::json j;
  j["states"] = nlohmann::json::array();
  for (const auto& x : traj.states) {
    j["states"].push_back(std::vector<double>(x.data(), x.data() + x.size()));
  }
  j["inputs"] = nlohmann::json::array();
  for (const auto& u : traj.inputs) {
    j["inputs"].push_back(std::vector<double>(u.data(), u.data() + u.size()));
  }
  return j.dump(2) + "\n";
}

DiscreteTrajectory parse_trajectory(const std::string& json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text);
  DiscreteTrajectory traj;
  for (const auto& row : j.at("states")) {
    const auto v = row.get<std::vector<double>>();
    traj.states.push_back(Eigen::Map<const Eigen::VectorXd>(v.data(), v.size()));
  }
  for (const auto& row : j.at("inputs")) {
    const auto v = row.get<std::vector<double>>();
    traj.inputs.push_back(Eigen::Map<const Eigen::VectorXd>(v.data(), v.size()));
  }
  return traj;
}

Eigen::VectorXd shoot(const Eigen::VectorXd& state, const Eigen::VectorXd& input,
                      const Grid& grid, int interval, const ScenarioConfig& cfg,
                      const DerivedWeights& w, const IntegratorSettings& settings,
                      IntegratorStats* stats) {
  return integrate_state(state, input, grid.node(interval), grid.node(interval + 1),
                         cfg, w, settings, stats);
}

LinearizedStep linearize(const Eigen::VectorXd& state, const Eigen::VectorXd& input,
                         const Grid& grid, int interval, const ScenarioConfig& cfg,
                         const DerivedWeights& w, const IntegratorSettings& settings,
                         IntegratorStats* stats) {
  const SensitivityBundle bundle =
      integrate_sensitivities(state, input, grid.node(interval),
                              grid.node(interval + 1), cfg, w, settings, stats);
  LinearizedStep step;
  step.A = bundle.state_jacobian;
  step.B = bundle.input_jacobian;
  step.c = bundle.state - step.A * state - step.B * input;
  return step;
}

double constraint_violation_metric(const Eigen::VectorXd& final_state,
                                   const std::vector<Eigen::VectorXd>& inputs,
                                   const ScenarioConfig& cfg) {
  const int nx = cfg.state_dim();
  const auto [x0, xf] = boundary_augmented_states(cfg);
  double v = final_state[nx];
  v += (final_state.head(nx) - xf.head(nx)).lpNorm<1>();
  const Eigen::VectorXd umin = cfg.aug_input_min();
  const Eigen::VectorXd umax = cfg.aug_input_max();
  for (const auto& eta : inputs) {
    v += (eta - umax).cwiseMax(0.0).lpNorm<1>();
    v += (umin - eta).cwiseMax(0.0).lpNorm<1>();
  }
  return v;
}

double final_time_of(const std::vector<Eigen::VectorXd>& inputs,
                     const ScenarioConfig& cfg, const Grid& grid) {
  double tf = 0.0;
  for (const auto& eta : inputs) tf += eta[cfg.input_dim()];
  return tf * grid.spacing();
}

NodeRollout rollout_nodes(const std::vector<Eigen::VectorXd>& inputs,
                          const ScenarioConfig& cfg, const DerivedWeights& w,
                          const Grid& grid, const IntegratorSettings& settings,
                          IntegratorStats* stats) {
  NodeRollout out;
  const auto [x0, xf] = boundary_augmented_states(cfg);
  out.node_states.reserve(grid.num_nodes);
  out.node_states.push_back(x0);
  for (int k = 0; k < grid.num_intervals(); ++k) {
    out.node_states.push_back(
        shoot(out.node_states.back(), inputs[k], grid, k, cfg, w, settings, stats));
  }
  const Eigen::VectorXd& last = out.node_states.back();
  out.objective = last[cfg.state_dim() + 1];
  out.violation = constraint_violation_metric(last, inputs, cfg);
  out.final_time = final_time_of(inputs, cfg, grid);
  return out;
}

namespace {

void audit_sample(const Eigen::VectorXd& state, const ScenarioConfig& cfg,
                  TrajectoryAudit& audit) {
  const int m = cfg.num_agents;
  for (int i = 0; i < m; ++i) {
    const auto r = state.segment<3>(kAgentStateDim * i);
    const auto v = state.segment<3>(kAgentStateDim * i + 3);
    const auto T = state.segment<3>(kAgentStateDim * i + 6);
    audit.max_speed = std::max(audit.max_speed, v.norm());
    const double tn = T.norm();
    audit.max_thrust = std::max(audit.max_thrust, tn);
    audit.min_thrust = std::min(audit.min_thrust, tn);
    audit.max_tilt_residual =
        std::max(audit.max_tilt_residual, std::cos(cfg.tilt_max) * tn - T[2]);
    const double box_violation =
        std::max((r - cfg.position_max).maxCoeff(), (cfg.position_min - r).maxCoeff());
    audit.max_box_violation = std::max(audit.max_box_violation, box_violation);
    for (int l = 0; l < cfg.num_obstacles(); ++l) {
      const double dist = (r.head<2>() - cfg.obstacles[l].center).norm();
      audit.min_obstacle_distance[l] = std::min(audit.min_obstacle_distance[l], dist);
    }
    for (int j = i + 1; j < m; ++j) {
      const auto rj = state.segment<3>(kAgentStateDim * j);
      audit.min_inter_agent_distance =
          std::min(audit.min_inter_agent_distance, (r - rj).norm());
    }
  }
}

}  // namespace

DenseRollout rollout_dense(const std::vector<Eigen::VectorXd>& inputs,
                           const ScenarioConfig& cfg, const DerivedWeights& w,
                           const Grid& grid, const IntegratorSettings& settings,
                           int samples_per_interval) {
  DenseRollout out;
  out.nodes.node_states.reserve(grid.num_nodes);
  out.audit.min_inter_agent_distance = std::numeric_limits<double>::infinity();
  out.audit.min_obstacle_distance.assign(cfg.num_obstacles(),
                                         std::numeric_limits<double>::infinity());
  out.audit.min_thrust = std::numeric_limits<double>::infinity();
  out.audit.max_tilt_residual = -std::numeric_limits<double>::infinity();
  out.audit.max_box_violation = -std::numeric_limits<double>::infinity();

  const auto [x0, xf] = boundary_augmented_states(cfg);
  Eigen::VectorXd state = x0;
  double physical_time = 0.0;
  out.samples.push_back({physical_time, state});
  audit_sample(state, cfg, out.audit);
  out.nodes.node_states.push_back(state);

  for (int k = 0; k < grid.num_intervals(); ++k) {
    const double dilation = inputs[k][cfg.input_dim()];
    const double tau_step = grid.spacing() / samples_per_interval;
    double tau = grid.node(k);
    for (int i = 0; i < samples_per_interval; ++i) {
      state = integrate_state(state, inputs[k], tau, tau + tau_step, cfg, w, settings);
      tau += tau_step;
      physical_time += dilation * tau_step;
      out.samples.push_back({physical_time, state});
      audit_sample(state, cfg, out.audit);
    }
    out.nodes.node_states.push_back(state);
  }

  out.nodes.objective = state[cfg.state_dim() + 1];
  out.nodes.violation = constraint_violation_metric(state, inputs, cfg);
  out.nodes.final_time = final_time_of(inputs, cfg, grid);
  return out;
}

void write_trajectory_csv(std::ostream& out, const DenseRollout& rollout,
                          const ScenarioConfig& cfg) {
  out << "time_s,agent_id,rx,ry,rz,vx,vy,vz,Tx,Ty,Tz\n";
  for (const auto& sample : rollout.samples) {
    for (int i = 0; i < cfg.num_agents; ++i) {
      out << format_double(sample.time) << ',' << (i + 1);
      for (int j = 0; j < 9; ++j) {
        out << ',' << format_double(sample.state[kAgentStateDim * i + j]);
      }
      out << '\n';
    }
  }
}

}  // namespace ctraj
