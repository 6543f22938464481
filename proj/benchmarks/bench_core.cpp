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

#include <benchmark/benchmark.h>

#include "ctraj/scp.hpp"
#include "ctraj/warmstart.hpp"

namespace {

using namespace ctraj;

ScenarioConfig scenario_for(int agents) { return make_demo_scenario(agents); }

void BM_AugmentedDynamics(benchmark::State& state) {
  const ScenarioConfig cfg = scenario_for(static_cast<int>(state.range(0)));
  const DerivedWeights w = derive_weights(cfg);
  const auto [x0, xf] = boundary_augmented_states(cfg);
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(cfg.aug_input_dim());
  eta[cfg.input_dim()] = 12.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(augmented_dynamics(x0, eta, cfg, w));
  }
}
BENCHMARK(BM_AugmentedDynamics)->Arg(2)->Arg(4)->Arg(6);

void BM_AugmentedJacobians(benchmark::State& state) {
  const ScenarioConfig cfg = scenario_for(static_cast<int>(state.range(0)));
  const DerivedWeights w = derive_weights(cfg);
  const auto [x0, xf] = boundary_augmented_states(cfg);
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(cfg.aug_input_dim());
  eta[cfg.input_dim()] = 12.0;
  Eigen::MatrixXd jx, ju;
  for (auto _ : state) {
    augmented_jacobians(x0, eta, cfg, w, jx, ju);
    benchmark::DoNotOptimize(jx.data());
  }
}
BENCHMARK(BM_AugmentedJacobians)->Arg(2)->Arg(6);

void BM_IntervalLinearization(benchmark::State& state) {
  const ScenarioConfig cfg = scenario_for(static_cast<int>(state.range(0)));
  const DerivedWeights w = derive_weights(cfg);
  const Grid grid{8};
  const auto [x0, xf] = boundary_augmented_states(cfg);
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(cfg.aug_input_dim());
  eta[cfg.input_dim()] = 12.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(linearize(x0, eta, grid, 0, cfg, w, {}));
  }
}
BENCHMARK(BM_IntervalLinearization)->Arg(2)->Arg(4);

void BM_SubproblemSolve(benchmark::State& state) {
  const ScenarioConfig cfg = scenario_for(static_cast<int>(state.range(0)));
  const DerivedWeights w = derive_weights(cfg);
  ScpSettings settings;
  const Grid grid{settings.num_nodes};
  const DiscreteTrajectory reference = random_initialization(cfg, settings, 3);
  std::vector<LinearizedStep> steps;
  for (int k = 0; k < grid.num_intervals(); ++k) {
    steps.push_back(linearize(reference.states[k], reference.inputs[k], grid, k,
                              cfg, w, settings.ode));
  }
  const QpProblem prob = assemble_subproblem(steps, reference, cfg, settings);
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_qp(prob, settings.qp));
  }
}
BENCHMARK(BM_SubproblemSolve)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_FilterStep(benchmark::State& state) {
  const ScenarioConfig cfg = scenario_for(static_cast<int>(state.range(0)));
  const DerivedWeights w = derive_weights(cfg);
  const DualityModel model = build_duality_model(cfg, Grid{8}, 1e-6);
  FilterSettings settings;
  settings.num_particles = 4;
  std::vector<Rng> streams;
  for (int l = 0; l < settings.num_particles; ++l) {
    streams.push_back(derive_stream(1, 1000 + l));
  }
  for (auto _ : state) {
    ParticleEnsemble ensemble = make_initial_ensemble(cfg, model, settings);
    filter_step(ensemble, 0, model, cfg, w, settings, streams);
    benchmark::DoNotOptimize(ensemble.particles[0].weight);
  }
}
BENCHMARK(BM_FilterStep)->Arg(2)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
