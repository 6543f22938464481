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

#include "ctraj/scp.hpp"

#include <limits>

#include "ctraj/cost_model.hpp"
#include "ctraj/rng.hpp"

namespace ctraj {

namespace {
constexpr std::uint64_t kRandomInitStream = 0x52414E44u;  // shared seed, own stream
}

void ScpSettings::validate() const {
  if (num_nodes < 2) throw std::invalid_argument("num_nodes must be >= 2");
  if (penalty <= 0.0) throw std::invalid_argument("penalty must be positive");
  if (prox_weight < 1.0 / penalty) {
    throw std::invalid_argument("prox_weight must satisfy rho >= 1/beta");
  }
  if (relaxation <= 0.0) throw std::invalid_argument("relaxation must be positive");
  if (tolerance <= 0.0) throw std::invalid_argument("tolerance must be positive");
  if (budget <= 0.0) throw std::invalid_argument("budget must be positive");
}

SubproblemLayout SubproblemLayout::make(const ScenarioConfig& cfg, int num_nodes) {
  SubproblemLayout layout;
  layout.state_dim = cfg.aug_state_dim();
  layout.input_dim = cfg.aug_input_dim();
  layout.num_nodes = num_nodes;
  return layout;
}

QpProblem assemble_subproblem(const std::vector<LinearizedStep>& steps,
                              const DiscreteTrajectory& reference,
                              const ScenarioConfig& cfg,
                              const ScpSettings& settings) {
  const int N = reference.num_nodes();
  if (static_cast<int>(steps.size()) != N - 1) {
    throw std::invalid_argument("one linearized step per interval required");
  }
  const SubproblemLayout layout = SubproblemLayout::make(cfg, N);
  const int n = layout.state_dim;
  const int nu = layout.input_dim;
  const int nx = cfg.state_dim();
  const int num_vars = layout.num_vars();
  const auto [x0, xf] = boundary_augmented_states(cfg);

  QpProblem prob;

  // Quadratic cost: prox terms on states and inputs only.
  prob.P.resize(num_vars, num_vars);
  std::vector<Eigen::Triplet<double>> p_trip;
  p_trip.reserve(N * n + (N - 1) * nu);
  const double prox_diag = 1.0 / settings.prox_weight;
  for (int k = 0; k < N; ++k) {
    for (int j = 0; j < n; ++j) {
      p_trip.emplace_back(layout.state_offset(k) + j, layout.state_offset(k) + j,
                          prox_diag);
    }
  }
  for (int k = 0; k < N - 1; ++k) {
    for (int j = 0; j < nu; ++j) {
      p_trip.emplace_back(layout.input_offset(k) + j, layout.input_offset(k) + j,
                          prox_diag);
    }
  }
  prob.P.setFromTriplets(p_trip.begin(), p_trip.end());

  prob.q = Eigen::VectorXd::Zero(num_vars);
  for (int k = 0; k < N; ++k) {
    prob.q.segment(layout.state_offset(k), n) = -prox_diag * reference.states[k];
  }
  for (int k = 0; k < N - 1; ++k) {
    prob.q.segment(layout.input_offset(k), nu) = -prox_diag * reference.inputs[k];
  }
  prob.q[layout.state_offset(N - 1) + nx + 1] += 1.0;  // running cost at final node
  for (int k = 0; k < N - 1; ++k) {
    prob.q.segment(layout.slack_up_offset(k), n).array() += settings.penalty;
    prob.q.segment(layout.slack_down_offset(k), n).array() += settings.penalty;
  }

  // Equalities: linearized dynamics with slacks, pinned initial state, exact
  // terminal agent states.
  const int eq_rows = (N - 1) * n + n + nx;
  prob.A_eq.resize(eq_rows, num_vars);
  prob.b_eq.resize(eq_rows);
  std::vector<Eigen::Triplet<double>> eq_trip;
  int row = 0;
  for (int k = 0; k < N - 1; ++k) {
    const LinearizedStep& step = steps[k];
    for (int r = 0; r < n; ++r) {
      eq_trip.emplace_back(row + r, layout.state_offset(k + 1) + r, 1.0);
      for (int c = 0; c < n; ++c) {
        const double a = step.A(r, c);
        if (a != 0.0) eq_trip.emplace_back(row + r, layout.state_offset(k) + c, -a);
      }
      for (int c = 0; c < nu; ++c) {
        const double b = step.B(r, c);
        if (b != 0.0) eq_trip.emplace_back(row + r, layout.input_offset(k) + c, -b);
      }
      eq_trip.emplace_back(row + r, layout.slack_up_offset(k) + r, -1.0);
      eq_trip.emplace_back(row + r, layout.slack_down_offset(k) + r, 1.0);
    }
    prob.b_eq.segment(row, n) = step.c;
    row += n;
  }
  for (int r = 0; r < n; ++r) {
    eq_trip.emplace_back(row + r, layout.state_offset(0) + r, 1.0);
  }
  prob.b_eq.segment(row, n) = x0;
  row += n;
  for (int r = 0; r < nx; ++r) {
    eq_trip.emplace_back(row + r, layout.state_offset(N - 1) + r, 1.0);
  }
  prob.b_eq.segment(row, nx) = xf.head(nx);
  row += nx;
  prob.A_eq.setFromTriplets(eq_trip.begin(), eq_trip.end());

  // Inequalities: violation-coordinate bound at nodes 2..N, input boxes,
  // nonnegative slacks.
  const double inf = std::numeric_limits<double>::infinity();
  const int in_rows = (N - 1) + (N - 1) * nu + 2 * (N - 1) * n;
  prob.A_in.resize(in_rows, num_vars);
  prob.lower.resize(in_rows);
  prob.upper.resize(in_rows);
  std::vector<Eigen::Triplet<double>> in_trip;
  row = 0;
  for (int k = 1; k < N; ++k) {
    in_trip.emplace_back(row, layout.state_offset(k) + nx, 1.0);
    prob.lower[row] = -inf;
    prob.upper[row] = settings.relaxation;
    ++row;
  }
  const Eigen::VectorXd umin = cfg.aug_input_min();
  const Eigen::VectorXd umax = cfg.aug_input_max();
  for (int k = 0; k < N - 1; ++k) {
    for (int j = 0; j < nu; ++j) {
      in_trip.emplace_back(row, layout.input_offset(k) + j, 1.0);
      prob.lower[row] = umin[j];
      prob.upper[row] = umax[j];
      ++row;
    }
  }
  for (int k = 0; k < N - 1; ++k) {
    for (int j = 0; j < n; ++j) {
      in_trip.emplace_back(row, layout.slack_up_offset(k) + j, 1.0);
      prob.lower[row] = 0.0;
      prob.upper[row] = inf;
      ++row;
    }
  }
  for (int k = 0; k < N - 1; ++k) {
    for (int j = 0; j < n; ++j) {
      in_trip.emplace_back(row, layout.slack_down_offset(k) + j, 1.0);
      prob.lower[row] = 0.0;
      prob.upper[row] = inf;
      ++row;
    }
  }
  prob.A_in.setFromTriplets(in_trip.begin(), in_trip.end());
  return prob;
}

SubproblemSolution split_subproblem_solution(const Eigen::VectorXd& primal,
                                             const SubproblemLayout& layout) {
  SubproblemSolution sol;
  const int N = layout.num_nodes;
  sol.trajectory.states.reserve(N);
  sol.trajectory.inputs.reserve(N - 1);
  for (int k = 0; k < N; ++k) {
    sol.trajectory.states.push_back(
        primal.segment(layout.state_offset(k), layout.state_dim));
  }
  for (int k = 0; k < N - 1; ++k) {
    sol.trajectory.inputs.push_back(
        primal.segment(layout.input_offset(k), layout.input_dim));
  }
  double mass = 0.0;
  for (int k = 0; k < N - 1; ++k) {
    sol.slack_up.push_back(primal.segment(layout.slack_up_offset(k), layout.state_dim));
    sol.slack_down.push_back(
        primal.segment(layout.slack_down_offset(k), layout.state_dim));
    mass += sol.slack_up.back().sum() + sol.slack_down.back().sum();
  }
  sol.slack_mass = mass;
  return sol;
}

std::string to_string(ScpStatus status) {
  switch (status) {
    case ScpStatus::converged:
      return "converged";
    case ScpStatus::budget_exhausted:
      return "budget_exhausted";
    case ScpStatus::max_iterations:
      return "max_iterations";
    case ScpStatus::qp_failure:
      return "qp_failure";
  }
  return "unknown";
}

ScpResult prox_linear_solve(const DiscreteTrajectory& initial,
                            const ScenarioConfig& cfg, const ScpSettings& settings,
                            double time_offset,
                            const SubproblemObserver& observer) {
  settings.validate();
  const int N = settings.num_nodes;
  if (initial.num_nodes() != N ||
      static_cast<int>(initial.inputs.size()) != N - 1) {
    throw std::invalid_argument("initial trajectory shape does not match grid");
  }
  const Grid grid{N};
  const DerivedWeights w = derive_weights(cfg);
  const SubproblemLayout layout = SubproblemLayout::make(cfg, N);
  const CostModel& clock = CostModel::global();

  ScpResult result;
  result.trajectory = initial;
  double vtime = time_offset;

  QpSettings qp_settings = settings.qp;
  std::vector<LinearizedStep> steps(N - 1);

  for (int iter = 0; iter < settings.max_iterations; ++iter) {
    IntegratorStats lin_stats;
    for (int k = 0; k < N - 1; ++k) {
      steps[k] = linearize(result.trajectory.states[k], result.trajectory.inputs[k],
                           grid, k, cfg, w, settings.ode, &lin_stats);
    }
    vtime += clock.sensitivity_integration(cfg, lin_stats);

    const QpProblem prob =
        assemble_subproblem(steps, result.trajectory, cfg, settings);
    QpSolution qp_sol;
    try {
      qp_sol = solve_qp(prob, qp_settings);
    } catch (const std::exception& e) {
      result.status = ScpStatus::qp_failure;
      result.error = "iteration " + std::to_string(iter) + ": " + e.what();
      result.solve_time = vtime;
      return result;
    }
    if (qp_sol.status == QpStatus::primal_infeasible ||
        qp_sol.status == QpStatus::dual_infeasible) {
      // Slacks make the subproblem feasible by construction; an infeasibility
      // certificate indicates corrupted data.
      result.status = ScpStatus::qp_failure;
      result.error = "iteration " + std::to_string(iter) + ": subproblem reported " +
                     (qp_sol.status == QpStatus::primal_infeasible
                          ? "primal_infeasible"
                          : "dual_infeasible");
      result.solve_time = vtime;
      return result;
    }
    const long stacked_nnz =
        prob.P.nonZeros() + 2 * (prob.A_eq.nonZeros() + prob.A_in.nonZeros());
    vtime += clock.qp_solve(stacked_nnz, qp_sol.iterations);

    if (observer) observer(iter, prob, qp_sol);

    SubproblemSolution sub = split_subproblem_solution(qp_sol.primal, layout);

    double displacement = 0.0;
    for (int k = 0; k < N; ++k) {
      displacement +=
          (result.trajectory.states[k] - sub.trajectory.states[k]).squaredNorm();
    }
    for (int k = 0; k < N - 1; ++k) {
      displacement +=
          (result.trajectory.inputs[k] - sub.trajectory.inputs[k]).squaredNorm();
    }

    // Warm-start the next subproblem with this solve's primal/dual pair.
    qp_settings.warm_primal = qp_sol.primal;
    qp_settings.warm_dual.resize(qp_sol.dual_eq.size() + qp_sol.dual_in.size());
    qp_settings.warm_dual << qp_sol.dual_eq, qp_sol.dual_in;

    result.trajectory = std::move(sub.trajectory);
    result.iterations = iter + 1;

    // Post-processing for the convergence record (reporting only; excluded
    // from the solver-time account).
    const NodeRollout rollout =
        rollout_nodes(result.trajectory.inputs, cfg, w, grid, settings.ode);
    ScpIteration record;
    record.time = vtime;
    record.objective = rollout.objective;
    record.violation = rollout.violation;
    record.displacement = displacement;
    record.slack_mass = sub.slack_mass;
    record.qp_iterations = qp_sol.iterations;
    result.history.push_back(record);

    if (displacement <= settings.tolerance) {
      result.status = ScpStatus::converged;
      break;
    }
    if (vtime >= settings.budget) {
      result.status = ScpStatus::budget_exhausted;
      break;
    }
    if (iter + 1 == settings.max_iterations) {
      result.status = ScpStatus::max_iterations;
    }
  }
  result.solve_time = vtime;
  return result;
}

DiscreteTrajectory forward_shoot(const std::vector<Eigen::VectorXd>& inputs,
                                 const ScenarioConfig& cfg,
                                 const ScpSettings& settings) {
  const Grid grid{settings.num_nodes};
  const DerivedWeights w = derive_weights(cfg);
  const auto [x0, xf] = boundary_augmented_states(cfg);
  DiscreteTrajectory traj;
  traj.inputs = inputs;
  traj.states.push_back(x0);
  for (int k = 0; k < grid.num_intervals(); ++k) {
    traj.states.push_back(
        shoot(traj.states.back(), inputs[k], grid, k, cfg, w, settings.ode));
  }
  return traj;
}

DiscreteTrajectory random_initialization(const ScenarioConfig& cfg,
                                         const ScpSettings& settings,
                                         std::uint64_t seed) {
  Rng rng = derive_stream(seed, kRandomInitStream);
  const Eigen::VectorXd umin = cfg.aug_input_min();
  const Eigen::VectorXd umax = cfg.aug_input_max();
  std::vector<Eigen::VectorXd> inputs;
  for (int k = 0; k < settings.num_nodes - 1; ++k) {
    Eigen::VectorXd eta(cfg.aug_input_dim());
    for (int j = 0; j < eta.size(); ++j) eta[j] = rng.uniform(umin[j], umax[j]);
    inputs.push_back(eta);
  }
  return forward_shoot(inputs, cfg, settings);
}

}  // namespace ctraj
