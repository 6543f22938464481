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

#ifndef CTRAJ_WARMSTART_HPP_
#define CTRAJ_WARMSTART_HPP_

#include <cstdint>
#include <functional>
#include <vector>

#include "ctraj/rng.hpp"
#include "ctraj/transcription.hpp"

namespace ctraj {

/// Cholesky factor of a (nearly) PSD matrix. On factorization failure a
/// jitter of 1e-12 * trace/n is added to the diagonal and escalated by
/// factors of 10 up to 1e-6 * trace/n before reporting failure.
Eigen::MatrixXd cholesky_sqrt(const Eigen::MatrixXd& matrix);

/// Symmetrizes and clips negative eigenvalues to zero. If requested, reports
/// the smallest eigenvalue seen before clipping.
Eigen::MatrixXd repair_psd(const Eigen::MatrixXd& matrix,
                           double* min_eigenvalue_before = nullptr);

struct UtSettings {
  double spread = 0.1;  // theta: sigma-point spread factor
};

struct UtResult {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;        // includes the additive noise term
  Eigen::MatrixXd cross_covariance;  // input deviations vs output deviations
};

/// Scaled sigma-point transform of a mean/covariance pair through `map`,
/// with additive output covariance `cov_add`. Exact on affine maps.
UtResult unscented_transform(
    const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov_in,
    const Eigen::MatrixXd& cov_add,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& map,
    const UtSettings& settings = {});

/// Tracking-form approximation of the trajectory problem used by the filter:
/// per-node position references interpolating the boundary positions, decay-
/// weighted output maps, the shifted input reference, and the process /
/// measurement covariances of the equivalent estimation problem.
struct DualityModel {
  Grid grid;
  double decay = 0.5;        // epsilon in (0,1), end-weighted position tracking
  double penalty_shift = 1.0;  // nu > 0
  double relaxation = 1e-6;    // gamma of the violation bound

  Eigen::MatrixXd position_map;  // 3m x (n_x+2)
  Eigen::MatrixXd thrust_map;    // 3m x (n_x+2)
  Eigen::MatrixXd state_weight;  // Q, 6m x 6m, PD
  Eigen::MatrixXd input_weight;  // R, (n_u+1) x (n_u+1), PD
  Eigen::VectorXd input_reference;  // (0_{n_u}, t_min)

  std::vector<Eigen::VectorXd> position_reference;  // per node, 3m
  std::vector<Eigen::VectorXd> output_reference;    // per node, 6m
  std::vector<Eigen::VectorXd> output_target;       // per node, 6m + n_G
  std::vector<Eigen::MatrixXd> output_maps;         // per node, (6m) x (n_x+2)

  Eigen::MatrixXd process_noise;      // E, chi x chi, PSD with zero state block
  Eigen::MatrixXd measurement_noise;  // F, (6m+n_G) x (6m+n_G), PD

  int chi_dim = 0;     // n_x + n_u + 3
  int output_dim = 0;  // 6m + n_G
};

DualityModel build_duality_model(const ScenarioConfig& cfg, const Grid& grid,
                                 double relaxation);

struct FilterSettings {
  int num_particles = 30;
  double initial_covariance = 1e-2;  // Sigma_1 = this * I
  double bias_variance = 5e-3;       // alpha of the random mean bias
  double resample_threshold = 9.0;   // kappa; resample when kappa*sum(w^2) >= 1
  UtSettings ut;
  IntegratorSettings ode{1e-6, 1e-6};  // tolerance of shooting-map evaluations
};

struct Particle {
  std::vector<Eigen::VectorXd> history;  // chi_1..chi_{k}
  Eigen::MatrixXd covariance;
  double weight = 0.0;
};

struct ParticleEnsemble {
  std::vector<Particle> particles;
  int steps_taken = 0;  // number of completed transitions
};

struct StepDiagnostics {
  double effective_sample_size = 0.0;
  bool resampled = false;
  double min_eigenvalue_before_repair = 0.0;  // min over particles
};

struct FilterDiagnostics {
  std::vector<StepDiagnostics> steps;
  int selected_index = -1;
  std::vector<double> scores;  // per particle
};

ParticleEnsemble make_initial_ensemble(const ScenarioConfig& cfg,
                                       const DualityModel& model,
                                       const FilterSettings& settings);

/// One filter transition (node `step` to `step`+1, 0-based): per particle,
/// propagate mean and covariance through the shooting map and the output map
/// with sigma points, apply the gain-based update with the random bias, and
/// reweight by the output likelihood (log-space). Weights are normalized on
/// return.
void filter_step(ParticleEnsemble& ensemble, int step, const DualityModel& model,
                 const ScenarioConfig& cfg, const DerivedWeights& w,
                 const FilterSettings& settings, std::vector<Rng>& particle_streams,
                 StepDiagnostics* diagnostics = nullptr,
                 IntegratorStats* stats = nullptr);

/// Multinomial resampling when the weight concentration test fires; copies
/// full histories and covariances and resets weights to 1/n_p.
bool maybe_resample(ParticleEnsemble& ensemble, double threshold, Rng& stream);

/// Tracking-plus-dynamics-defect score of one particle history.
double particle_score(const std::vector<Eigen::VectorXd>& history,
                      const DualityModel& model, const ScenarioConfig& cfg,
                      const DerivedWeights& w, const IntegratorSettings& ode,
                      IntegratorStats* stats = nullptr);

/// Converts one combined-state history to a discrete trajectory; the input
/// block of the final node is dropped.
DiscreteTrajectory extract_trajectory(const std::vector<Eigen::VectorXd>& history,
                                      const ScenarioConfig& cfg);

/// Lowest-score particle (ties broken by lowest index), converted to a
/// discrete trajectory; the trailing input block of the final node is
/// dropped.
DiscreteTrajectory select_particle(const ParticleEnsemble& ensemble,
                                   const DualityModel& model,
                                   const ScenarioConfig& cfg,
                                   const DerivedWeights& w,
                                   const FilterSettings& settings,
                                   FilterDiagnostics* diagnostics = nullptr,
                                   IntegratorStats* stats = nullptr);

/// Runs the full filter and particle selection. `solver_time` (if given)
/// receives the deterministic-clock cost of the run.
DiscreteTrajectory generate_warmstart(const ScenarioConfig& cfg,
                                      const DualityModel& model,
                                      const FilterSettings& settings,
                                      std::uint64_t seed,
                                      FilterDiagnostics* diagnostics = nullptr,
                                      double* solver_time = nullptr);

}  // namespace ctraj

#endif  // CTRAJ_WARMSTART_HPP_
