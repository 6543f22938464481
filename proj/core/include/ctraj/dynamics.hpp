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

#ifndef CTRAJ_DYNAMICS_HPP_
#define CTRAJ_DYNAMICS_HPP_

#include <Eigen/Core>

#include "ctraj/scenario.hpp"

namespace ctraj {

// Layout of one agent's 9-dim state block: [position, velocity, thrust].
inline constexpr int kAgentStateDim = 9;
inline constexpr int kAgentInputDim = 3;

/// Planar extractor: picks (x, y) out of a 3-vector.
inline Eigen::Matrix<double, 2, 3> planar_selector() {
  Eigen::Matrix<double, 2, 3> m = Eigen::Matrix<double, 2, 3>::Zero();
  m(0, 0) = 1.0;
  m(1, 1) = 1.0;
  return m;
}

/// Stacked-position extractor (3m x (n_x + 2)): maps the augmented state to
/// the concatenated agent positions.
Eigen::MatrixXd position_selector(const ScenarioConfig& cfg);

/// Stacked-thrust extractor (3m x (n_x + 2)).
Eigen::MatrixXd thrust_selector(const ScenarioConfig& cfg);

/// Double-integrator-with-thrust-rate model of one vehicle:
/// d/dt (r, v, T) = (v, T/m - g e_z, u).
Eigen::Matrix<double, 9, 1> agent_dynamics(
    const Eigen::Ref<const Eigen::Matrix<double, 9, 1>>& state,
    const Eigen::Ref<const Eigen::Vector3d>& thrust_rate,
    const ScenarioConfig& cfg);

/// Stacked state-inequality values for all agents (n_g entries, satisfied
/// when nonpositive). Order is frozen: for each agent in turn,
///   [0..2]  r - r_max
///   [3..5]  r_min - r
///   [6]     |v| - v_max
///   [7]     |T| - T_max
///   [8]     T_min - |T|
///   [9]     cos(tilt_max) |T| - T_z
///   [10..]  rho_l - |planar(r) - c_l| per obstacle,
/// followed by the pairwise blocks d - |r_i - r_j| in lexicographic order
/// (1,2), (1,3), ..., (m-1,m).
Eigen::VectorXd state_inequalities(
    const Eigen::Ref<const Eigen::VectorXd>& agent_states,
    const ScenarioConfig& cfg);

/// Jacobian of state_inequalities w.r.t. the stacked agent states
/// (n_g x n_x). Norm gradients use the zero subgradient at singular points.
Eigen::MatrixXd state_inequality_jacobian(
    const Eigen::Ref<const Eigen::VectorXd>& agent_states,
    const ScenarioConfig& cfg);

/// Time-dilated augmented dynamics: the first n_x rows are the stacked agent
/// derivatives, then the squared norm of the clamped state inequalities
/// (violation integrator) and the running-cost rate, all scaled by the
/// dilation input s.
Eigen::VectorXd augmented_dynamics(const Eigen::Ref<const Eigen::VectorXd>& aug_state,
                                   const Eigen::Ref<const Eigen::VectorXd>& aug_input,
                                   const ScenarioConfig& cfg,
                                   const DerivedWeights& w);

/// Analytic Jacobians of augmented_dynamics w.r.t. the augmented state and
/// input. At clamp kinks ([z]_+ at 0) and norm singularities the zero
/// subgradient is used.
void augmented_jacobians(const Eigen::Ref<const Eigen::VectorXd>& aug_state,
                         const Eigen::Ref<const Eigen::VectorXd>& aug_input,
                         const ScenarioConfig& cfg, const DerivedWeights& w,
                         Eigen::MatrixXd& dstate, Eigen::MatrixXd& dinput);

/// Input-side inequality stack (n_G = 2 n_u + 3 entries):
/// [violation coordinate - gamma; eta - u_max_aug; u_min_aug - eta].
Eigen::VectorXd input_inequalities(const Eigen::Ref<const Eigen::VectorXd>& aug_state,
                                   const Eigen::Ref<const Eigen::VectorXd>& aug_input,
                                   const ScenarioConfig& cfg, double gamma);

}  // namespace ctraj

#endif  // CTRAJ_DYNAMICS_HPP_
