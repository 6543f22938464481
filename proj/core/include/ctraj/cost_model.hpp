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

#ifndef CTRAJ_COST_MODEL_HPP_
#define CTRAJ_COST_MODEL_HPP_

#include "ctraj/integrator.hpp"
#include "ctraj/scenario.hpp"

namespace ctraj {

/// Deterministic solver-time accounting. All reported and budgeted solver
/// times are derived from operation counts (integrator evaluations, QP
/// iterations) through these constants, so that identical inputs produce
/// byte-identical time columns in every artifact. The constants are
/// calibrated to approximate wall-clock seconds on a commodity core; see the
/// README for the calibration note.
struct CostModel {
  double state_rhs_unit = 3.0e-9;     // per rhs eval, per (n + n_g)
  double sens_rhs_unit = 5.0e-9;      // per rhs eval, per n*(n + n_u + 3)
  double qp_iter_unit = 1.1e-8;       // per iteration, per stacked nonzero
  double filter_step_unit = 1.0e-8;   // per particle step, per chi_dim^3

  static const CostModel& global() {
    static const CostModel model;
    return model;
  }

  double state_integration(const ScenarioConfig& cfg,
                           const IntegratorStats& stats) const {
    const double unit = cfg.aug_state_dim() + cfg.num_state_constraints();
    return state_rhs_unit * unit * static_cast<double>(stats.rhs_evals);
  }

  double sensitivity_integration(const ScenarioConfig& cfg,
                                 const IntegratorStats& stats) const {
    const double n = cfg.aug_state_dim();
    const double unit = n * (n + cfg.aug_input_dim() + 2);
    return sens_rhs_unit * unit * static_cast<double>(stats.rhs_evals);
  }

  double qp_solve(long stacked_nonzeros, int iterations) const {
    return qp_iter_unit * static_cast<double>(stacked_nonzeros) *
           static_cast<double>(iterations);
  }

  double filter_linear_algebra(int chi_dim, long particle_steps) const {
    const double d = chi_dim;
    return filter_step_unit * d * d * d * static_cast<double>(particle_steps);
  }
};

}  // namespace ctraj

#endif  // CTRAJ_COST_MODEL_HPP_
