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

#include "ctraj/warmstart.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "ctraj/cost_model.hpp"
#include "ctraj/dynamics.hpp"

namespace ctraj {
namespace {

constexpr std::uint64_t kParticleStreamBase = 0x50415254u;
constexpr std::uint64_t kResampleStream = 0x52455350u;

double jitter_base(const Eigen::MatrixXd& a) {
  const double t = a.trace() / a.rows();
  return t > 0.0 ? t : 1.0;
}

// Cholesky with escalating diagonal ridge; returns factor of A + delta*I.
bool try_cholesky(const Eigen::MatrixXd& a, double max_relative_jitter,
                  Eigen::MatrixXd& factor) {
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() == Eigen::Success) {
    factor = llt.matrixL();
    return true;
  }
  const double base = jitter_base(a);
  for (double rel = 1e-12; rel <= max_relative_jitter * 1.0000001; rel *= 10.0) {
    Eigen::MatrixXd jittered = a;
    jittered.diagonal().array() += rel * base;
    llt.compute(jittered);
    if (llt.info() == Eigen::Success) {
      factor = llt.matrixL();
      return true;
    }
  }
  return false;
}

}  // namespace

Eigen::MatrixXd cholesky_sqrt(const Eigen::MatrixXd& matrix) {
  Eigen::MatrixXd factor;
  if (!try_cholesky(matrix, 1e-6, factor)) {
    throw std::runtime_error(
        "covariance square root failed: matrix indefinite beyond jitter range");
  }
  return factor;
}

Eigen::MatrixXd repair_psd(const Eigen::MatrixXd& matrix,
                           double* min_eigenvalue_before) {
  const Eigen::MatrixXd sym = 0.5 * (matrix + matrix.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success) {
    throw std::runtime_error("eigendecomposition failed during PSD repair");
  }
  if (min_eigenvalue_before != nullptr) {
    *min_eigenvalue_before = eig.eigenvalues().minCoeff();
  }
  const Eigen::VectorXd clipped = eig.eigenvalues().cwiseMax(0.0);
  return eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
}

UtResult unscented_transform(
    const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov_in,
    const Eigen::MatrixXd& cov_add,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& map,
    const UtSettings& settings) {
  const int n = static_cast<int>(mean.size());
  const double theta = settings.spread;
  const double lambda = (theta * theta - 1.0) * n;
  const double scale = n + lambda;  // theta^2 * n > 0
  const double sqrt_scale = std::sqrt(scale);

  const Eigen::MatrixXd root = cholesky_sqrt(cov_in);

  const int count = 2 * n + 1;
  Eigen::MatrixXd points(n, count);
  points.col(0) = mean;
  for (int i = 0; i < n; ++i) {
    points.col(1 + i) = mean + sqrt_scale * root.col(i);
    points.col(1 + n + i) = mean - sqrt_scale * root.col(i);
  }

  Eigen::VectorXd mean_weights(count), cov_weights(count);
  mean_weights[0] = lambda / scale;
  cov_weights[0] = lambda / scale + (3.0 - theta * theta);
  for (int i = 1; i < count; ++i) {
    mean_weights[i] = 0.5 / scale;
    cov_weights[i] = 0.5 / scale;
  }

  const int l = static_cast<int>(cov_add.rows());
  Eigen::MatrixXd images(l, count);
  for (int i = 0; i < count; ++i) images.col(i) = map(points.col(i));

  UtResult result;
  result.mean = images * mean_weights;
  const Eigen::MatrixXd out_dev = images.colwise() - result.mean.col(0);
  const Eigen::MatrixXd in_dev = points.colwise() - mean.col(0);
  result.covariance =
      out_dev * cov_weights.asDiagonal() * out_dev.transpose() + cov_add;
  result.cross_covariance = in_dev * cov_weights.asDiagonal() * out_dev.transpose();
  return result;
}

DualityModel build_duality_model(const ScenarioConfig& cfg, const Grid& grid,
                                 double relaxation) {
  const int m = cfg.num_agents;
  const int N = grid.num_nodes;
  const DerivedWeights w = derive_weights(cfg);

  DualityModel model;
  model.grid = grid;
  model.relaxation = relaxation;
  model.position_map = position_selector(cfg);
  model.thrust_map = thrust_selector(cfg);
  model.chi_dim = cfg.aug_state_dim() + cfg.aug_input_dim();
  model.output_dim = 6 * m + cfg.num_input_constraints();

  model.state_weight = Eigen::MatrixXd::Identity(6 * m, 6 * m);
  Eigen::VectorXd r_diag(cfg.aug_input_dim());
  r_diag.head(cfg.input_dim()).setConstant(w.thrust_rate_weight / w.thrust_weight);
  r_diag[cfg.input_dim()] = w.time_weight / (w.thrust_weight * cfg.time_max);
  model.input_weight = r_diag.asDiagonal();

  model.input_reference = Eigen::VectorXd::Zero(cfg.aug_input_dim());
  model.input_reference[cfg.input_dim()] = cfg.time_min;

  const auto [x0, xf] = boundary_augmented_states(cfg);
  const Eigen::VectorXd p0 = model.position_map * x0;
  const Eigen::VectorXd pf = model.position_map * xf;
  for (int k = 0; k < N; ++k) {
    const double a = static_cast<double>(N - 1 - k) / (N - 1);
    const double b = static_cast<double>(k) / (N - 1);
    model.position_reference.push_back(a * p0 + b * pf);
  }

  for (int k = 0; k < N; ++k) {
    const double fade = std::pow(model.decay, 0.5 * (N - 1 - k));
    Eigen::VectorXd y_ref = Eigen::VectorXd::Zero(6 * m);
    y_ref.head(3 * m) = fade * model.position_reference[k];
    model.output_reference.push_back(y_ref);

    Eigen::MatrixXd c(6 * m, cfg.aug_state_dim());
    c.topRows(3 * m) = fade * model.position_map;
    c.bottomRows(3 * m) = model.thrust_map;
    model.output_maps.push_back(c);

    Eigen::VectorXd target(model.output_dim);
    target.head(6 * m) = y_ref;
    target.tail(cfg.num_input_constraints()).setConstant(-model.penalty_shift);
    model.output_target.push_back(target);
  }

  model.process_noise = Eigen::MatrixXd::Zero(model.chi_dim, model.chi_dim);
  model.process_noise.bottomRightCorner(cfg.aug_input_dim(), cfg.aug_input_dim()) =
      r_diag.cwiseInverse().asDiagonal();

  model.measurement_noise =
      Eigen::MatrixXd::Identity(model.output_dim, model.output_dim);
  model.measurement_noise.topLeftCorner(6 * m, 6 * m) =
      model.state_weight.llt().solve(Eigen::MatrixXd::Identity(6 * m, 6 * m));
  return model;
}

ParticleEnsemble make_initial_ensemble(const ScenarioConfig& cfg,
                                       const DualityModel& model,
                                       const FilterSettings& settings) {
  const auto [x0, xf] = boundary_augmented_states(cfg);
  Eigen::VectorXd chi(model.chi_dim);
  chi << x0, model.input_reference;

  ParticleEnsemble ensemble;
  ensemble.particles.resize(settings.num_particles);
  for (auto& p : ensemble.particles) {
    p.history = {chi};
    p.covariance = settings.initial_covariance *
                   Eigen::MatrixXd::Identity(model.chi_dim, model.chi_dim);
    p.weight = 1.0 / settings.num_particles;
  }
  return ensemble;
}

void filter_step(ParticleEnsemble& ensemble, int step, const DualityModel& model,
                 const ScenarioConfig& cfg, const DerivedWeights& w,
                 const FilterSettings& settings, std::vector<Rng>& particle_streams,
                 StepDiagnostics* diagnostics, IntegratorStats* stats) {
  const int n = cfg.aug_state_dim();
  const int nu1 = cfg.aug_input_dim();
  const Grid& grid = model.grid;
  if (step < 0 || step >= grid.num_intervals()) {
    throw std::invalid_argument("filter step index out of range");
  }

  // Transition map: shoot the state block through the interval, reset the
  // input block to the reference.
  const auto transition = [&](const Eigen::VectorXd& chi) {
    Eigen::VectorXd out(model.chi_dim);
    out.head(n) = integrate_state(chi.head(n), chi.tail(nu1), grid.node(step),
                                  grid.node(step + 1), cfg, w, settings.ode, stats);
    out.tail(nu1) = model.input_reference;
    return out;
  };
  // Output map at the arrival node.
  const int arrival = step + 1;
  const auto output = [&](const Eigen::VectorXd& chi) {
    Eigen::VectorXd out(model.output_dim);
    out.head(model.output_maps[arrival].rows()) =
        model.output_maps[arrival] * chi.head(n);
    out.tail(cfg.num_input_constraints()) =
        input_inequalities(chi.head(n), chi.tail(nu1), cfg, model.relaxation)
            .cwiseMax(0.0);
    return out;
  };

  const Eigen::VectorXd& target = model.output_target[arrival];
  double min_eig = std::numeric_limits<double>::infinity();
  Eigen::VectorXd log_weights(ensemble.particles.size());

  for (std::size_t l = 0; l < ensemble.particles.size(); ++l) {
    Particle& particle = ensemble.particles[l];
    const UtResult predicted =
        unscented_transform(particle.history.back(), particle.covariance,
                            model.process_noise, transition, settings.ut);
    const UtResult observed = unscented_transform(
        predicted.mean, predicted.covariance, model.measurement_noise, output,
        settings.ut);

    // Gain through a Cholesky solve of the innovation covariance, with a
    // single relative ridge retry.
    Eigen::MatrixXd innovation_cov = observed.covariance;
    Eigen::LLT<Eigen::MatrixXd> llt(innovation_cov);
    if (llt.info() != Eigen::Success) {
      innovation_cov.diagonal().array() +=
          1e-12 * jitter_base(observed.covariance);
      llt.compute(innovation_cov);
      if (llt.info() != Eigen::Success) {
        throw std::runtime_error(
            "innovation covariance not invertible after regularization");
      }
    }
    const Eigen::MatrixXd gain =
        llt.solve(observed.cross_covariance.transpose()).transpose();

    double eig_before = 0.0;
    particle.covariance = repair_psd(
        predicted.covariance - gain * observed.covariance * gain.transpose(),
        &eig_before);
    min_eig = std::min(min_eig, eig_before);

    const Eigen::VectorXd residual = target - observed.mean;
    const Eigen::VectorXd bias =
        std::sqrt(settings.bias_variance) *
        particle_streams[l].normal_vector(model.chi_dim);
    particle.history.push_back(predicted.mean + gain * residual +
                               cholesky_sqrt(particle.covariance) * bias);

    // Log-space likelihood: log w - 1/2 log det U - 1/2 |residual|^2_{U^-1}.
    double log_det = 0.0;
    const Eigen::MatrixXd& factor = llt.matrixL();
    for (int i = 0; i < factor.rows(); ++i) log_det += std::log(factor(i, i));
    log_det *= 2.0;
    const double quad = residual.dot(llt.solve(residual));
    log_weights[static_cast<int>(l)] =
        std::log(std::max(particle.weight, 1e-300)) - 0.5 * log_det - 0.5 * quad;
  }

  // Normalize with max subtraction.
  const double shift = log_weights.maxCoeff();
  double total = 0.0;
  for (std::size_t l = 0; l < ensemble.particles.size(); ++l) {
    ensemble.particles[l].weight = std::exp(log_weights[static_cast<int>(l)] - shift);
    total += ensemble.particles[l].weight;
  }
  for (auto& p : ensemble.particles) p.weight /= total;
  ensemble.steps_taken = step + 1;

  if (diagnostics != nullptr) {
    double sum_sq = 0.0;
    for (const auto& p : ensemble.particles) sum_sq += p.weight * p.weight;
    diagnostics->effective_sample_size = 1.0 / sum_sq;
    diagnostics->min_eigenvalue_before_repair = min_eig;
    diagnostics->resampled = false;
  }
}

bool maybe_resample(ParticleEnsemble& ensemble, double threshold, Rng& stream) {
  // Resampling a single particle is an identity operation.
  if (ensemble.particles.size() <= 1) return false;
  double sum_sq = 0.0;
  for (const auto& p : ensemble.particles) sum_sq += p.weight * p.weight;
  if (threshold * sum_sq < 1.0) return false;

  const int count = static_cast<int>(ensemble.particles.size());
  std::vector<double> cumulative(count);
  double acc = 0.0;
  for (int i = 0; i < count; ++i) {
    acc += ensemble.particles[i].weight;
    cumulative[i] = acc;
  }
  cumulative[count - 1] = 1.0;

  std::vector<Particle> resampled;
  resampled.reserve(count);
  for (int i = 0; i < count; ++i) {
    const double u = stream.uniform();
    const int j = static_cast<int>(
        std::lower_bound(cumulative.begin(), cumulative.end(), u) -
        cumulative.begin());
    resampled.push_back(ensemble.particles[j]);
    resampled.back().weight = 1.0 / count;
  }
  ensemble.particles = std::move(resampled);
  return true;
}

double particle_score(const std::vector<Eigen::VectorXd>& history,
                      const DualityModel& model, const ScenarioConfig& cfg,
                      const DerivedWeights& w, const IntegratorSettings& ode,
                      IntegratorStats* stats) {
  const int n = cfg.aug_state_dim();
  const int nu1 = cfg.aug_input_dim();
  const int N = model.grid.num_nodes;
  const double nu = model.penalty_shift;

  double score = 0.0;
  for (int k = 0; k < N; ++k) {
    const auto state = history[k].head(n);
    const auto input = history[k].tail(nu1);
    const Eigen::VectorXd tracking =
        model.output_reference[k] - model.output_maps[k] * state;
    score += tracking.dot(model.state_weight * tracking);
    const Eigen::VectorXd penalty =
        (input_inequalities(state, input, cfg, model.relaxation).cwiseMax(0.0).array() +
         nu)
            .matrix();
    score += penalty.squaredNorm();
    const Eigen::VectorXd input_dev = input - model.input_reference;
    score += input_dev.dot(model.input_weight * input_dev);
  }
  for (int k = 0; k < N - 1; ++k) {
    const Eigen::VectorXd shot =
        integrate_state(history[k].head(n), history[k].tail(nu1),
                        model.grid.node(k), model.grid.node(k + 1), cfg, w, ode,
                        stats);
    score += (shot - history[k + 1].head(n)).lpNorm<1>();
  }
  return score;
}

DiscreteTrajectory extract_trajectory(const std::vector<Eigen::VectorXd>& history,
                                      const ScenarioConfig& cfg) {
  const int n = cfg.aug_state_dim();
  const int nu1 = cfg.aug_input_dim();
  DiscreteTrajectory traj;
  for (const auto& chi : history) traj.states.push_back(chi.head(n));
  for (std::size_t k = 0; k + 1 < history.size(); ++k) {
    traj.inputs.push_back(history[k].tail(nu1));
  }
  return traj;
}

DiscreteTrajectory select_particle(const ParticleEnsemble& ensemble,
                                   const DualityModel& model,
                                   const ScenarioConfig& cfg,
                                   const DerivedWeights& w,
                                   const FilterSettings& settings,
                                   FilterDiagnostics* diagnostics,
                                   IntegratorStats* stats) {
  int best = 0;
  double best_score = std::numeric_limits<double>::infinity();
  std::vector<double> scores;
  scores.reserve(ensemble.particles.size());
  for (std::size_t l = 0; l < ensemble.particles.size(); ++l) {
    const double score = particle_score(ensemble.particles[l].history, model, cfg,
                                        w, settings.ode, stats);
    scores.push_back(score);
    if (score < best_score) {  // strict: ties keep the lowest index
      best_score = score;
      best = static_cast<int>(l);
    }
  }
  if (diagnostics != nullptr) {
    diagnostics->selected_index = best;
    diagnostics->scores = scores;
  }
  return extract_trajectory(ensemble.particles[best].history, cfg);
}

DiscreteTrajectory generate_warmstart(const ScenarioConfig& cfg,
                                      const DualityModel& model,
                                      const FilterSettings& settings,
                                      std::uint64_t seed,
                                      FilterDiagnostics* diagnostics,
                                      double* solver_time) {
  const DerivedWeights w = derive_weights(cfg);
  ParticleEnsemble ensemble = make_initial_ensemble(cfg, model, settings);

  std::vector<Rng> particle_streams;
  particle_streams.reserve(settings.num_particles);
  for (int l = 0; l < settings.num_particles; ++l) {
    particle_streams.push_back(derive_stream(seed, kParticleStreamBase + l));
  }
  Rng resample_stream = derive_stream(seed, kResampleStream);

  IntegratorStats stats;
  for (int step = 0; step < model.grid.num_intervals(); ++step) {
    StepDiagnostics step_diag;
    filter_step(ensemble, step, model, cfg, w, settings, particle_streams,
                &step_diag, &stats);
    step_diag.resampled =
        maybe_resample(ensemble, settings.resample_threshold, resample_stream);
    if (diagnostics != nullptr) diagnostics->steps.push_back(step_diag);
  }

  DiscreteTrajectory traj =
      select_particle(ensemble, model, cfg, w, settings, diagnostics, &stats);

  if (solver_time != nullptr) {
    const CostModel& clock = CostModel::global();
    const long particle_steps = static_cast<long>(settings.num_particles) *
                                model.grid.num_intervals();
    *solver_time = clock.state_integration(cfg, stats) +
                   clock.filter_linear_algebra(model.chi_dim, particle_steps);
  }
  return traj;
}

}  // namespace ctraj
