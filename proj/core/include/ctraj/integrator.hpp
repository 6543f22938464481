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

#ifndef CTRAJ_INTEGRATOR_HPP_
#define CTRAJ_INTEGRATOR_HPP_

#include <functional>
#include <stdexcept>

#include <Eigen/Core>

#include "ctraj/dynamics.hpp"
#include "ctraj/scenario.hpp"

namespace ctraj {

class IntegrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct IntegratorSettings {
  double rel_tol = 1e-9;
  double abs_tol = 1e-9;
  int max_steps = 200000;
  // First attempted step as a fraction of the integration interval.
  double initial_step_fraction = 0.05;
};

struct IntegratorStats {
  long steps = 0;       // accepted steps
  long rejected = 0;    // rejected attempts
  long rhs_evals = 0;   // right-hand-side evaluations
};

using OdeRhs =
    std::function<void(double t, const Eigen::VectorXd& x, Eigen::VectorXd& dxdt)>;

/// Adaptive embedded Runge-Kutta 5(4) with Dormand-Prince coefficients.
/// Deterministic for fixed inputs and settings. Throws IntegrationError on
/// step-count exhaustion or non-finite state.
Eigen::VectorXd integrate_ode(const OdeRhs& rhs, Eigen::VectorXd state, double from,
                              double to, const IntegratorSettings& settings,
                              IntegratorStats* stats = nullptr);

/// Integrates the augmented dynamics over [from, to] holding the augmented
/// input constant.
Eigen::VectorXd integrate_state(const Eigen::VectorXd& aug_state,
                                const Eigen::VectorXd& aug_input, double from,
                                double to, const ScenarioConfig& cfg,
                                const DerivedWeights& w,
                                const IntegratorSettings& settings,
                                IntegratorStats* stats = nullptr);

/// Endpoint state together with its Jacobians w.r.t. the interval's initial
/// state and constant input.
struct SensitivityBundle {
  Eigen::VectorXd state;            // x(to)
  Eigen::MatrixXd state_jacobian;   // d x(to) / d x(from)
  Eigen::MatrixXd input_jacobian;   // d x(to) / d input
};

/// Jointly integrates the augmented state with its variational system
/// (initialized to identity / zero at `from`) using the analytic dynamics
/// Jacobians.
SensitivityBundle integrate_sensitivities(const Eigen::VectorXd& aug_state,
                                          const Eigen::VectorXd& aug_input,
                                          double from, double to,
                                          const ScenarioConfig& cfg,
                                          const DerivedWeights& w,
                                          const IntegratorSettings& settings,
                                          IntegratorStats* stats = nullptr);

}  // namespace ctraj

#endif  // CTRAJ_INTEGRATOR_HPP_
