#include <doctest.h>

#include <sstream>

#include "ctraj/rng.hpp"
#include "ctraj/transcription.hpp"
#include "oracles.hpp"

using namespace ctraj;

namespace {

std::vector<Eigen::VectorXd> hover_inputs(const ScenarioConfig& cfg, int count,
                                          double dilation) {
  std::vector<Eigen::VectorXd> inputs;
  for (int k = 0; k < count; ++k) {
    Eigen::VectorXd eta = Eigen::VectorXd::Zero(cfg.aug_input_dim());
    eta[cfg.input_dim()] = dilation;
    inputs.push_back(eta);
  }
  return inputs;
}

}  // namespace

TEST_CASE("grid nodes are uniform on [0, 1]") {
  const Grid grid{8};
  CHECK(grid.node(0) == 0.0);
  CHECK(grid.node(7) == 1.0);
  CHECK(grid.spacing() == doctest::Approx(1.0 / 7.0));
  for (int k = 0; k < 7; ++k) {
    CHECK(grid.node(k + 1) - grid.node(k) == doctest::Approx(grid.spacing()));
  }
}

TEST_CASE("trajectory JSON round-trip is bit-exact") {
  const ScenarioConfig cfg = make_demo_scenario(2);
  Rng rng(17);
  DiscreteTrajectory traj;
  for (int k = 0; k < 4; ++k) {
    traj.states.push_back(rng.normal_vector(cfg.aug_state_dim()));
  }
  for (int k = 0; k < 3; ++k) {
    traj.inputs.push_back(rng.normal_vector(cfg.aug_input_dim()));
  }
  const DiscreteTrajectory back = parse_trajectory(serialize_trajectory(traj));
  REQUIRE(back.states.size() == traj.states.size());
  REQUIRE(back.inputs.size() == traj.inputs.size());
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    CHECK(back.states[k] == traj.states[k]);
  }
  for (std::size_t k = 0; k < traj.inputs.size(); ++k) {
    CHECK(back.inputs[k] == traj.inputs[k]);
  }
}

TEST_CASE("shooting over one interval") {
  const ScenarioConfig cfg = make_demo_scenario(2);
  const DerivedWeights w = derive_weights(cfg);
  const Grid grid{8};
  IntegratorSettings settings;
  const auto [x0, xf] = boundary_augmented_states(cfg);

  SUBCASE("hover leaves agents, violation and cost rate intact") {
    Eigen::VectorXd eta = Eigen::VectorXd::Zero(cfg.aug_input_dim());
    eta[cfg.input_dim()] = 10.0;
    const Eigen::VectorXd next = shoot(x0, eta, grid, 0, cfg, w, settings);
    CHECK((next.head(cfg.state_dim()) - x0.head(cfg.state_dim())).norm() < 1e-10);
    CHECK(next[cfg.state_dim()] == 0.0);
    const double rate =
        10.0 * (2.0 * w.time_weight +
                w.thrust_weight * 2.0 * cfg.hover_thrust().squaredNorm());
    CHECK(next[cfg.state_dim() + 1] ==
          doctest::Approx(rate * grid.spacing()).epsilon(1e-9));
  }

  SUBCASE("agent block equals the closed form") {
    Eigen::VectorXd eta(cfg.aug_input_dim());
    Rng rng(29);
    eta << 0.2 * rng.normal_vector(6), 11.0;
    const Eigen::VectorXd next = shoot(x0, eta, grid, 3, cfg, w, settings);
    const Eigen::Matrix<double, 9, 1> expected = oracles::agent_closed_form(
        x0.head<9>(), eta.head<3>(), cfg.agent_mass, cfg.gravity, 11.0,
        grid.spacing());
    CHECK((next.head<9>() - expected).lpNorm<Eigen::Infinity>() < 1e-8);
  }
}

TEST_CASE("linearization properties") {
  const ScenarioConfig cfg = make_demo_scenario(2);
  const DerivedWeights w = derive_weights(cfg);
  const Grid grid{8};
  IntegratorSettings settings;
  const auto [x0, xf] = boundary_augmented_states(cfg);
  Rng rng(41);
  Eigen::VectorXd eta(cfg.aug_input_dim());
  eta << 0.1 * rng.normal_vector(6), 12.0;

  const LinearizedStep step = linearize(x0, eta, grid, 0, cfg, w, settings);

  SUBCASE("offset closes the affine identity at the reference") {
    const Eigen::VectorXd shot = shoot(x0, eta, grid, 0, cfg, w, settings);
    CHECK((step.A * x0 + step.B * eta + step.c - shot).lpNorm<Eigen::Infinity>() <
          1e-9);
  }

  SUBCASE("defect decays quadratically with the perturbation") {
    const Eigen::VectorXd dx_dir = rng.normal_vector(cfg.aug_state_dim()).normalized();
    const Eigen::VectorXd du_dir = rng.normal_vector(cfg.aug_input_dim()).normalized();
    auto defect = [&](double scale) {
      const Eigen::VectorXd xp = x0 + scale * dx_dir;
      const Eigen::VectorXd up = eta + scale * du_dir;
      const Eigen::VectorXd shot = shoot(xp, up, grid, 0, cfg, w, settings);
      return (shot - (step.A * xp + step.B * up + step.c)).norm();
    };
    const double d1 = defect(0.08);
    const double d2 = defect(0.04);
    CHECK(d1 / d2 > 3.5);
    CHECK(d1 / d2 < 4.5);
  }

  SUBCASE("agent transition block is nonsingular for positive dilation") {
    const double det = step.A.topLeftCorner(9, 9).determinant();
    CHECK(std::abs(det) > 0.5);
  }

  SUBCASE("thrust-rate inputs of one agent do not reach the other") {
    CHECK(step.B.block(0, 3, 9, 3).norm() == 0.0);
    CHECK(step.B.block(9, 0, 9, 3).norm() == 0.0);
  }
}

TEST_CASE("violation metric") {
  const ScenarioConfig cfg = make_demo_scenario(2);
  const auto [x0, xf] = boundary_augmented_states(cfg);
  const auto inputs = hover_inputs(cfg, 7, 10.0);

  SUBCASE("zero at an exact arrival with no input violations") {
    CHECK(constraint_violation_metric(xf, inputs, cfg) == 0.0);
  }

  SUBCASE("single bound excess contributes exactly itself") {
    auto pushed = inputs;
    pushed[3][1] = cfg.thrust_rate_max[1] + 0.5;
    CHECK(constraint_violation_metric(xf, pushed, cfg) == doctest::Approx(0.5));
    auto low = inputs;
    low[2][cfg.input_dim()] = cfg.time_min - 0.25;
    CHECK(constraint_violation_metric(xf, low, cfg) == doctest::Approx(0.25));
  }

  SUBCASE("appending in-bound inputs changes nothing") {
    auto extended = inputs;
    extended.insert(extended.end(), inputs.begin(), inputs.end());
    CHECK(constraint_violation_metric(xf, extended, cfg) ==
          constraint_violation_metric(xf, inputs, cfg));
  }

  SUBCASE("terminal mismatch enters through the l1 norm") {
    Eigen::VectorXd off = xf;
    off[0] += 0.125;
    off[13] -= 0.25;
    CHECK(constraint_violation_metric(off, inputs, cfg) == doctest::Approx(0.375));
  }
}

TEST_CASE("final time equals the mean dilation") {
  const ScenarioConfig cfg = make_demo_scenario(2);
  const Grid grid{8};
  auto inputs = hover_inputs(cfg, 7, 0.0);
  double sum = 0.0;
  Rng rng(53);
  for (auto& eta : inputs) {
    eta[cfg.input_dim()] = rng.uniform(7.0, 28.0);
    sum += eta[cfg.input_dim()];
  }
  CHECK(final_time_of(inputs, cfg, grid) == sum * grid.spacing());

  SUBCASE("constant dilation reproduces itself") {
    const auto constant = hover_inputs(cfg, 7, 13.25);
    CHECK(final_time_of(constant, cfg, grid) == doctest::Approx(13.25));
  }
}

TEST_CASE("node rollout composes shooting across the horizon") {
  const ScenarioConfig cfg = make_demo_scenario(2);
  const DerivedWeights w = derive_weights(cfg);
  const Grid grid{8};
  IntegratorSettings settings;
  Rng rng(61);
  auto inputs = hover_inputs(cfg, 7, 10.0);
  for (auto& eta : inputs) eta.head(6) = 0.05 * rng.normal_vector(6);

  const NodeRollout rollout = rollout_nodes(inputs, cfg, w, grid, settings);
  REQUIRE(rollout.node_states.size() == 8);

  // Whole-horizon integration with the same piecewise-constant inputs.
  Eigen::VectorXd state = rollout.node_states.front();
  for (int k = 0; k < 7; ++k) {
    state = integrate_state(state, inputs[k], grid.node(k), grid.node(k + 1), cfg,
                            w, settings);
  }
  CHECK((state - rollout.node_states.back()).lpNorm<Eigen::Infinity>() <
        10.0 * 1e-9 * std::max(1.0, state.norm()));
  CHECK(rollout.objective == rollout.node_states.back()[cfg.state_dim() + 1]);
}

TEST_CASE("dense rollout audits the sampled path") {
  const ScenarioConfig cfg = make_demo_scenario(2);
  const DerivedWeights w = derive_weights(cfg);
  const Grid grid{4};
  const auto inputs = hover_inputs(cfg, 3, 9.0);
  const DenseRollout rollout = rollout_dense(inputs, cfg, w, grid, {}, 25);

  REQUIRE(rollout.samples.size() == 3 * 25 + 1);
  CHECK(rollout.samples.back().time == doctest::Approx(9.0));
  // Hovering at the demo start positions: separation stays at the boundary
  // distance, speeds stay zero.
  const double expected_distance =
      (cfg.agents[0].start.position - cfg.agents[1].start.position).norm();
  CHECK(rollout.audit.min_inter_agent_distance ==
        doctest::Approx(expected_distance).epsilon(1e-9));
  CHECK(rollout.audit.max_speed < 1e-9);
  CHECK(rollout.audit.max_thrust == doctest::Approx(cfg.hover_thrust().norm()));
  CHECK(rollout.audit.min_obstacle_distance.size() == 2);

  SUBCASE("trajectory CSV carries the documented columns") {
    std::ostringstream out;
    write_trajectory_csv(out, rollout, cfg);
    std::istringstream in(out.str());
    std::string header;
    std::getline(in, header);
    CHECK(header == "time_s,agent_id,rx,ry,rz,vx,vy,vz,Tx,Ty,Tz");
    int rows = 0;
    std::string line;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == static_cast<int>(rollout.samples.size()) * cfg.num_agents);
  }
}
