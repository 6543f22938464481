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

#include "ctraj/dynamics.hpp"

#include <cmath>

namespace ctraj {
namespace {

// Gradient of the Euclidean norm with the zero subgradient at the origin.
template <typename Vec>
Vec norm_gradient(const Vec& v) {
  const double n = v.norm();
  if (n == 0.0) return Vec::Zero(v.size());
  return v / n;
}

}  // namespace

Eigen::MatrixXd position_selector(const ScenarioConfig& cfg) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(3 * cfg.num_agents, cfg.aug_state_dim());
  for (int i = 0; i < cfg.num_agents; ++i) {
    m.block<3, 3>(3 * i, kAgentStateDim * i).setIdentity();
  }
  return m;
}

Eigen::MatrixXd thrust_selector(const ScenarioConfig& cfg) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(3 * cfg.num_agents, cfg.aug_state_dim());
  for (int i = 0; i < cfg.num_agents; ++i) {
    m.block<3, 3>(3 * i, kAgentStateDim * i + 6).setIdentity();
  }
  return m;
}

Eigen::Matrix<double, 9, 1> agent_dynamics(
    const Eigen::Ref<const Eigen::Matrix<double, 9, 1>>& state,
    const Eigen::Ref<const Eigen::Vector3d>& thrust_rate,
    const ScenarioConfig& cfg) {
  Eigen::Matrix<double, 9, 1> dx;
  dx.segment<3>(0) = state.segment<3>(3);
  dx.segment<3>(3) = state.segment<3>(6) / cfg.agent_mass;
  dx[5] -= cfg.gravity;
  dx.segment<3>(6) = thrust_rate;
  return dx;
}

Eigen::VectorXd state_inequalities(
    const Eigen::Ref<const Eigen::VectorXd>& agent_states,
    const ScenarioConfig& cfg) {
  const int m = cfg.num_agents;
  const double cos_tilt = std::cos(cfg.tilt_max);
  Eigen::VectorXd g(cfg.num_state_constraints());
  int row = 0;
  for (int i = 0; i < m; ++i) {
    const auto r = agent_states.segment<3>(kAgentStateDim * i);
    const auto v = agent_states.segment<3>(kAgentStateDim * i + 3);
    const auto T = agent_states.segment<3>(kAgentStateDim * i + 6);
    g.segment<3>(row) = r - cfg.position_max;
    row += 3;
    g.segment<3>(row) = cfg.position_min - r;
    row += 3;
    g[row++] = v.norm() - cfg.velocity_max;
    const double thrust_norm = T.norm();
    g[row++] = thrust_norm - cfg.thrust_max;
    g[row++] = cfg.thrust_min - thrust_norm;
    g[row++] = cos_tilt * thrust_norm - T[2];
    for (const auto& o : cfg.obstacles) {
      g[row++] = o.radius - (r.head<2>() - o.center).norm();
    }
  }
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      const auto ri = agent_states.segment<3>(kAgentStateDim * i);
      const auto rj = agent_states.segment<3>(kAgentStateDim * j);
      g[row++] = cfg.inter_agent_distance - (ri - rj).norm();
    }
  }
  return g;
}

Eigen::MatrixXd state_inequality_jacobian(
    const Eigen::Ref<const Eigen::VectorXd>& agent_states,
    const ScenarioConfig& cfg) {
  const int m = cfg.num_agents;
  const double cos_tilt = std::cos(cfg.tilt_max);
  Eigen::MatrixXd jac =
      Eigen::MatrixXd::Zero(cfg.num_state_constraints(), cfg.state_dim());
  int row = 0;
  for (int i = 0; i < m; ++i) {
    const int rc = kAgentStateDim * i;      // position columns
    const int vc = kAgentStateDim * i + 3;  // velocity columns
    const int tc = kAgentStateDim * i + 6;  // thrust columns
    const auto r = agent_states.segment<3>(rc);
    const auto v = agent_states.segment<3>(vc);
    const auto T = agent_states.segment<3>(tc);
    jac.block<3, 3>(row, rc).setIdentity();
    row += 3;
    jac.block<3, 3>(row, rc) = -Eigen::Matrix3d::Identity();
    row += 3;
    jac.block<1, 3>(row++, vc) = norm_gradient(Eigen::Vector3d(v)).transpose();
    const Eigen::Vector3d t_dir = norm_gradient(Eigen::Vector3d(T));
    jac.block<1, 3>(row++, tc) = t_dir.transpose();
    jac.block<1, 3>(row++, tc) = -t_dir.transpose();
    jac.block<1, 3>(row, tc) = cos_tilt * t_dir.transpose();
    jac(row, tc + 2) -= 1.0;
    ++row;
    for (const auto& o : cfg.obstacles) {
      const Eigen::Vector2d planar = r.head<2>() - o.center;
      const Eigen::Vector2d dir = norm_gradient(planar);
      jac(row, rc) = -dir[0];
      jac(row, rc + 1) = -dir[1];
      ++row;
    }
  }
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      const auto ri = agent_states.segment<3>(kAgentStateDim * i);
      const auto rj = agent_states.segment<3>(kAgentStateDim * j);
      const Eigen::Vector3d dir = norm_gradient(Eigen::Vector3d(ri - rj));
      jac.block<1, 3>(row, kAgentStateDim * i) = -dir.transpose();
      jac.block<1, 3>(row, kAgentStateDim * j) = dir.transpose();
      ++row;
    }
  }
  return jac;
}

Eigen::VectorXd augmented_dynamics(const Eigen::Ref<const Eigen::VectorXd>& aug_state,
                                   const Eigen::Ref<const Eigen::VectorXd>& aug_input,
                                   const ScenarioConfig& cfg,
                                   const DerivedWeights& w) {
  const int m = cfg.num_agents;
  const int nx = cfg.state_dim();
  const double s = aug_input[cfg.input_dim()];

  Eigen::VectorXd dx(cfg.aug_state_dim());
  for (int i = 0; i < m; ++i) {
    dx.segment<9>(kAgentStateDim * i) = agent_dynamics(
        aug_state.segment<9>(kAgentStateDim * i),
        aug_input.segment<3>(kAgentInputDim * i), cfg);
  }
  const Eigen::VectorXd g = state_inequalities(aug_state.head(nx), cfg);
  dx[nx] = g.cwiseMax(0.0).squaredNorm();

  double cost_rate = m * w.time_weight;
  for (int i = 0; i < m; ++i) {
    cost_rate += w.thrust_rate_weight *
                 aug_input.segment<3>(kAgentInputDim * i).squaredNorm();
    cost_rate += w.thrust_weight *
                 aug_state.segment<3>(kAgentStateDim * i + 6).squaredNorm();
  }
  dx[nx + 1] = cost_rate;
  return s * dx;
}

void augmented_jacobians(const Eigen::Ref<const Eigen::VectorXd>& aug_state,
                         const Eigen::Ref<const Eigen::VectorXd>& aug_input,
                         const ScenarioConfig& cfg, const DerivedWeights& w,
                         Eigen::MatrixXd& dstate, Eigen::MatrixXd& dinput) {
  const int m = cfg.num_agents;
  const int nx = cfg.state_dim();
  const int n = cfg.aug_state_dim();
  const int nu = cfg.input_dim();
  const double s = aug_input[nu];

  dstate = Eigen::MatrixXd::Zero(n, n);
  dinput = Eigen::MatrixXd::Zero(n, nu + 1);

  // Agent blocks are linear time-invariant in the undilated time.
  for (int i = 0; i < m; ++i) {
    const int b = kAgentStateDim * i;
    dstate.block<3, 3>(b, b + 3) = s * Eigen::Matrix3d::Identity();
    dstate.block<3, 3>(b + 3, b + 6) =
        (s / cfg.agent_mass) * Eigen::Matrix3d::Identity();
    dinput.block<3, 3>(b + 6, kAgentInputDim * i) =
        s * Eigen::Matrix3d::Identity();
  }

  // Violation-integrator row: d/dx |[g]_+|^2 = 2 [g]_+^T dg/dx.
  const Eigen::VectorXd g = state_inequalities(aug_state.head(nx), cfg);
  const Eigen::VectorXd clamped = g.cwiseMax(0.0);
  if ((clamped.array() > 0.0).any()) {
    const Eigen::MatrixXd g_jac = state_inequality_jacobian(aug_state.head(nx), cfg);
    dstate.block(nx, 0, 1, nx) = 2.0 * s * (clamped.transpose() * g_jac);
  }

  // Running-cost row.
  double cost_rate = m * w.time_weight;
  for (int i = 0; i < m; ++i) {
    const auto T = aug_state.segment<3>(kAgentStateDim * i + 6);
    const auto u = aug_input.segment<3>(kAgentInputDim * i);
    cost_rate += w.thrust_rate_weight * u.squaredNorm();
    cost_rate += w.thrust_weight * T.squaredNorm();
    dstate.block<1, 3>(nx + 1, kAgentStateDim * i + 6) =
        2.0 * s * w.thrust_weight * T.transpose();
    dinput.block<1, 3>(nx + 1, kAgentInputDim * i) =
        2.0 * s * w.thrust_rate_weight * u.transpose();
  }

  // Dilation column: the dynamics are linear in s.
  for (int i = 0; i < m; ++i) {
    dinput.block<9, 1>(kAgentStateDim * i, nu) = agent_dynamics(
        aug_state.segment<9>(kAgentStateDim * i),
        aug_input.segment<3>(kAgentInputDim * i), cfg);
  }
  dinput(nx, nu) = clamped.squaredNorm();
  dinput(nx + 1, nu) = cost_rate;
}

Eigen::VectorXd input_inequalities(const Eigen::Ref<const Eigen::VectorXd>& aug_state,
                                   const Eigen::Ref<const Eigen::VectorXd>& aug_input,
                                   const ScenarioConfig& cfg, double gamma) {
  const int nu1 = cfg.aug_input_dim();
  Eigen::VectorXd G(cfg.num_input_constraints());
  G[0] = aug_state[cfg.state_dim()] - gamma;
  G.segment(1, nu1) = aug_input - cfg.aug_input_max();
  G.segment(1 + nu1, nu1) = cfg.aug_input_min() - aug_input;
  return G;
}

}  // namespace ctraj
