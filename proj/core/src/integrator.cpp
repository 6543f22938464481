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

#include "ctraj/integrator.hpp"

#include <algorithm>
#include <cmath>

namespace ctraj {
namespace {

// Dormand-Prince 5(4) tableau.
constexpr double kC2 = 1.0 / 5.0, kC3 = 3.0 / 10.0, kC4 = 4.0 / 5.0,
                 kC5 = 8.0 / 9.0;
constexpr double kA21 = 1.0 / 5.0;
constexpr double kA31 = 3.0 / 40.0, kA32 = 9.0 / 40.0;
constexpr double kA41 = 44.0 / 45.0, kA42 = -56.0 / 15.0, kA43 = 32.0 / 9.0;
constexpr double kA51 = 19372.0 / 6561.0, kA52 = -25360.0 / 2187.0,
                 kA53 = 64448.0 / 6561.0, kA54 = -212.0 / 729.0;
constexpr double kA61 = 9017.0 / 3168.0, kA62 = -355.0 / 33.0,
                 kA63 = 46732.0 / 5247.0, kA64 = 49.0 / 176.0,
                 kA65 = -5103.0 / 18656.0;
constexpr double kB1 = 35.0 / 384.0, kB3 = 500.0 / 1113.0, kB4 = 125.0 / 192.0,
                 kB5 = -2187.0 / 6784.0, kB6 = 11.0 / 84.0;
// Difference between the 5th- and embedded 4th-order weights.
constexpr double kE1 = 71.0 / 57600.0, kE3 = -71.0 / 16695.0,
                 kE4 = 71.0 / 1920.0, kE5 = -17253.0 / 339200.0,
                 kE6 = 22.0 / 525.0, kE7 = -1.0 / 40.0;

}  // namespace

Eigen::VectorXd integrate_ode(const OdeRhs& rhs, Eigen::VectorXd state, double from,
                              double to, const IntegratorSettings& settings,
                              IntegratorStats* stats) {
  if (!(to > from)) {
    throw IntegrationError("integration interval must satisfy to > from");
  }
  const auto n = state.size();
  Eigen::VectorXd k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n);
  Eigen::VectorXd candidate(n), work(n), error(n);

  double t = from;
  double h = settings.initial_step_fraction * (to - from);
  h = std::min(h, to - from);

  IntegratorStats local;
  rhs(t, state, k1);  // FSAL: k1 carries over accepted steps
  ++local.rhs_evals;

  long attempts = 0;
  while (t < to) {
    if (attempts++ >= settings.max_steps) {
      throw IntegrationError("integrator exceeded max_steps (possible blow-up)");
    }
    h = std::min(h, to - t);

    work = state + h * (kA21 * k1);
    rhs(t + kC2 * h, work, k2);
    work = state + h * (kA31 * k1 + kA32 * k2);
    rhs(t + kC3 * h, work, k3);
    work = state + h * (kA41 * k1 + kA42 * k2 + kA43 * k3);
    rhs(t + kC4 * h, work, k4);
    work = state + h * (kA51 * k1 + kA52 * k2 + kA53 * k3 + kA54 * k4);
    rhs(t + kC5 * h, work, k5);
    work = state + h * (kA61 * k1 + kA62 * k2 + kA63 * k3 + kA64 * k4 + kA65 * k5);
    rhs(t + h, work, k6);
    candidate = state + h * (kB1 * k1 + kB3 * k3 + kB4 * k4 + kB5 * k5 + kB6 * k6);
    rhs(t + h, candidate, k7);
    local.rhs_evals += 6;

    error = h * (kE1 * k1 + kE3 * k3 + kE4 * k4 + kE5 * k5 + kE6 * k6 + kE7 * k7);

    double err_norm_sq = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double scale =
          settings.abs_tol +
          settings.rel_tol * std::max(std::abs(state[i]), std::abs(candidate[i]));
      const double e = error[i] / scale;
      err_norm_sq += e * e;
    }
    const double err = std::sqrt(err_norm_sq / static_cast<double>(n));

    if (!std::isfinite(err) || !candidate.allFinite()) {
      throw IntegrationError("non-finite state encountered during integration");
    }

    if (err <= 1.0) {
      t += h;
      state.swap(candidate);
      k1.swap(k7);
      ++local.steps;
    } else {
      ++local.rejected;
    }
    const double factor =
        (err == 0.0) ? 5.0
                     : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
    h *= factor;
  }

  if (stats != nullptr) {
    stats->steps += local.steps;
    stats->rejected += local.rejected;
    stats->rhs_evals += local.rhs_evals;
  }
  return state;
}

Eigen::VectorXd integrate_state(const Eigen::VectorXd& aug_state,
                                const Eigen::VectorXd& aug_input, double from,
                                double to, const ScenarioConfig& cfg,
                                const DerivedWeights& w,
                                const IntegratorSettings& settings,
                                IntegratorStats* stats) {
  const OdeRhs rhs = [&](double, const Eigen::VectorXd& x, Eigen::VectorXd& dxdt) {
    dxdt = augmented_dynamics(x, aug_input, cfg, w);
  };
  return integrate_ode(rhs, aug_state, from, to, settings, stats);
}

SensitivityBundle integrate_sensitivities(const Eigen::VectorXd& aug_state,
                                          const Eigen::VectorXd& aug_input,
                                          double from, double to,
                                          const ScenarioConfig& cfg,
                                          const DerivedWeights& w,
                                          const IntegratorSettings& settings,
                                          IntegratorStats* stats) {
  const int n = cfg.aug_state_dim();
  const int nu1 = cfg.aug_input_dim();

  // Joint vector [x; vec(Phi_x); vec(Phi_u)], column-major.
  Eigen::VectorXd joint = Eigen::VectorXd::Zero(n + n * n + n * nu1);
  joint.head(n) = aug_state;
  Eigen::Map<Eigen::MatrixXd>(joint.data() + n, n, n).setIdentity();

  Eigen::MatrixXd jac_x(n, n), jac_u(n, nu1);
  const OdeRhs rhs = [&](double, const Eigen::VectorXd& z, Eigen::VectorXd& dzdt) {
    dzdt.resize(z.size());
    const auto x = z.head(n);
    augmented_jacobians(x, aug_input, cfg, w, jac_x, jac_u);
    dzdt.head(n) = augmented_dynamics(x, aug_input, cfg, w);
    Eigen::Map<const Eigen::MatrixXd> phi_x(z.data() + n, n, n);
    Eigen::Map<const Eigen::MatrixXd> phi_u(z.data() + n + n * n, n, nu1);
    Eigen::Map<Eigen::MatrixXd>(dzdt.data() + n, n, n).noalias() = jac_x * phi_x;
    Eigen::Map<Eigen::MatrixXd> dphi_u(dzdt.data() + n + n * n, n, nu1);
    dphi_u.noalias() = jac_x * phi_u;
    dphi_u += jac_u;
  };

  const Eigen::VectorXd out = integrate_ode(rhs, joint, from, to, settings, stats);
  SensitivityBundle bundle;
  bundle.state = out.head(n);
  bundle.state_jacobian = Eigen::Map<const Eigen::MatrixXd>(out.data() + n, n, n);
  bundle.input_jacobian =
      Eigen::Map<const Eigen::MatrixXd>(out.data() + n + n * n, n, nu1);
  return bundle;
}

}  // namespace ctraj
