#include <doctest.h>

#include "ctraj/dynamics.hpp"
#include "ctraj/rng.hpp"
#include "oracles.hpp"

using namespace ctraj;

namespace {

// Strictly feasible augmented state: positions well inside the box and away
// from obstacles and from each other, moderate speed, thrust near hover.
Eigen::VectorXd sample_feasible_state(const ScenarioConfig& cfg, Rng& rng) {
  while (true) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(cfg.aug_state_dim());
    for (int i = 0; i < cfg.num_agents; ++i) {
      Eigen::Vector3d r;
      for (int j = 0; j < 3; ++j) {
        r[j] = rng.uniform(cfg.position_min[j] + 1.0, cfg.position_max[j] - 1.0);
      }
      Eigen::Vector3d v = 0.25 * cfg.velocity_max * rng.normal_vector(3);
      Eigen::Vector3d t = cfg.hover_thrust() + 0.2 * rng.normal_vector(3);
      x.segment<3>(9 * i) = r;
      x.segment<3>(9 * i + 3) = v;
      x.segment<3>(9 * i + 6) = t;
    }
    x[cfg.state_dim()] = rng.uniform(0.0, 1e-3);
    x[cfg.state_dim() + 1] = rng.uniform(0.0, 0.5);
    const Eigen::VectorXd g = state_inequalities(x.head(cfg.state_dim()), cfg);
    if (g.maxCoeff() < -1e-2) return x;
  }
}

Eigen::VectorXd sample_input(const ScenarioConfig& cfg, Rng& rng) {
  const Eigen::VectorXd lo = cfg.aug_input_min();
  const Eigen::VectorXd hi = cfg.aug_input_max();
  Eigen::VectorXd u(cfg.aug_input_dim());
  for (int j = 0; j < u.size(); ++j) u[j] = rng.uniform(lo[j], hi[j]);
  return u;
}

}  // namespace

TEST_CASE("single-vehicle dynamics") {
  const ScenarioConfig cfg = make_demo_scenario(1);
  Eigen::Matrix<double, 9, 1> hover = Eigen::Matrix<double, 9, 1>::Zero();
  hover.segment<3>(6) = cfg.hover_thrust();

  SUBCASE("hover is an equilibrium") {
    CHECK(agent_dynamics(hover, Eigen::Vector3d::Zero(), cfg).norm() == 0.0);
  }
  SUBCASE("thrust rate passes through") {
    const auto dx = agent_dynamics(hover, Eigen::Vector3d(0, 0, 1), cfg);
    CHECK(dx.head<6>().norm() == 0.0);
    CHECK(dx.segment<3>(6) == Eigen::Vector3d(0, 0, 1));
  }
  SUBCASE("vertical acceleration from plain thrust") {
    Eigen::Matrix<double, 9, 1> x = Eigen::Matrix<double, 9, 1>::Zero();
    x.segment<3>(6) = Eigen::Vector3d(0, 0, 5);
    const auto dx = agent_dynamics(x, Eigen::Vector3d::Zero(), cfg);
    CHECK(dx[5] == doctest::Approx(5.0 / 0.35 - 9.81).epsilon(1e-15));
  }
}

TEST_CASE("state inequality stack: values and frozen ordering") {
  const ScenarioConfig cfg = make_demo_scenario(2);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(cfg.state_dim());
  // Agent 1 planar position exactly at the first obstacle center.
  x.segment<3>(0) = Eigen::Vector3d(5.0, 8.0, 5.0);
  x.segment<3>(6) = Eigen::Vector3d(0.0, 0.0, 3.0);
  // Agent 2 exactly at the minimum separation from agent 1.
  x.segment<3>(9) = Eigen::Vector3d(5.0, 8.0, 5.0 + cfg.inter_agent_distance);
  x.segment<3>(15) = cfg.hover_thrust();

  const Eigen::VectorXd g = state_inequalities(x, cfg);
  REQUIRE(g.size() == 25);
  // Per-agent block: box (6), speed, thrust max/min, tilt, obstacles (2).
  CHECK(g[6] == -cfg.velocity_max);
  CHECK(g[7] == 3.0 - cfg.thrust_max);
  CHECK(g[8] == cfg.thrust_min - 3.0);
  CHECK(g[9] == doctest::Approx((std::cos(cfg.tilt_max) - 1.0) * 3.0));
  CHECK(g[9] < 0.0);
  CHECK(g[10] == 2.0);  // sitting on the obstacle-1 axis
  CHECK(g[11] == doctest::Approx(1.5 - (Eigen::Vector2d(5, 8) -
                                        Eigen::Vector2d(9, 5)).norm()));
  // Pairwise block is last; exact-contact distance gives a zero entry.
  CHECK(g[24] == doctest::Approx(0.0));
}

TEST_CASE("state inequalities are permutation-equivariant") {
  const ScenarioConfig cfg = make_demo_scenario(4);
  Rng rng(7);
  Eigen::VectorXd x(cfg.state_dim());
  for (int i = 0; i < x.size(); ++i) x[i] = rng.uniform(0.0, 15.0);

  // Swap agents 0 and 2.
  std::vector<int> perm = {2, 1, 0, 3};
  Eigen::VectorXd xp(cfg.state_dim());
  for (int i = 0; i < 4; ++i) xp.segment<9>(9 * i) = x.segment<9>(9 * perm[i]);

  const Eigen::VectorXd g = state_inequalities(x, cfg);
  const Eigen::VectorXd gp = state_inequalities(xp, cfg);
  const int blk = cfg.per_agent_constraints();
  for (int i = 0; i < 4; ++i) {
    CHECK((gp.segment(blk * i, blk) - g.segment(blk * perm[i], blk)).norm() ==
          doctest::Approx(0.0));
  }
  // Pairwise entries permute consistently: the (i,j) entry of the permuted
  // stack equals the (perm(i), perm(j)) entry of the original.
  auto pair_index = [](int m, int i, int j) {
    if (i > j) std::swap(i, j);
    int idx = 0;
    for (int a = 0; a < i; ++a) idx += m - 1 - a;
    return idx + (j - i - 1);
  };
  const int base = 4 * blk;
  for (int i = 0; i < 4; ++i) {
    for (int j = i + 1; j < 4; ++j) {
      CHECK(gp[base + pair_index(4, i, j)] ==
            doctest::Approx(g[base + pair_index(4, perm[i], perm[j])]));
    }
  }
}

TEST_CASE("augmented dynamics") {
  const ScenarioConfig cfg = make_demo_scenario(2);
  const DerivedWeights w = derive_weights(cfg);
  Rng rng(11);

  SUBCASE("violation rate vanishes on strictly feasible states") {
    for (int trial = 0; trial < 20; ++trial) {
      const Eigen::VectorXd x = sample_feasible_state(cfg, rng);
      const Eigen::VectorXd u = sample_input(cfg, rng);
      CHECK(augmented_dynamics(x, u, cfg, w)[cfg.state_dim()] == 0.0);
    }
  }

  SUBCASE("zero dilation freezes the flow") {
    const Eigen::VectorXd x = sample_feasible_state(cfg, rng);
    Eigen::VectorXd u = sample_input(cfg, rng);
    u[cfg.input_dim()] = 0.0;
    CHECK(augmented_dynamics(x, u, cfg, w).norm() == 0.0);
  }

  SUBCASE("hover cost rate at minimum dilation") {
    const auto [x0, xf] = boundary_augmented_states(cfg);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(cfg.aug_input_dim());
    u[cfg.input_dim()] = 7.0;
    const double hover_sq = cfg.hover_thrust().squaredNorm();
    const double expected =
        7.0 * (2.0 * w.time_weight + w.thrust_weight * 2.0 * hover_sq);
    CHECK(augmented_dynamics(x0, u, cfg, w)[cfg.state_dim() + 1] ==
          doctest::Approx(expected).epsilon(1e-14));
  }

  SUBCASE("positively homogeneous of degree one in the dilation") {
    for (int trial = 0; trial < 20; ++trial) {
      Eigen::VectorXd x(cfg.aug_state_dim());
      for (int i = 0; i < x.size(); ++i) x[i] = rng.uniform(-5.0, 15.0);
      Eigen::VectorXd u = sample_input(cfg, rng);
      Eigen::VectorXd u2 = u;
      u2[cfg.input_dim()] = 2.0 * u[cfg.input_dim()];
      const Eigen::VectorXd f1 = augmented_dynamics(x, u, cfg, w);
      const Eigen::VectorXd f2 = augmented_dynamics(x, u2, cfg, w);
      CHECK((f2 - 2.0 * f1).lpNorm<Eigen::Infinity>() <
            1e-12 * std::max(1.0, f1.lpNorm<Eigen::Infinity>()));
    }
  }

  SUBCASE("violation and cost rates are nonnegative for s >= 0") {
    for (int trial = 0; trial < 100; ++trial) {
      Eigen::VectorXd x(cfg.aug_state_dim());
      for (int i = 0; i < x.size(); ++i) x[i] = rng.uniform(-20.0, 20.0);
      Eigen::VectorXd u = sample_input(cfg, rng);
      const Eigen::VectorXd f = augmented_dynamics(x, u, cfg, w);
      CHECK(f[cfg.state_dim()] >= 0.0);
      CHECK(f[cfg.state_dim() + 1] >= 0.0);
    }
  }
}

TEST_CASE("analytic Jacobians match central differences") {
  const ScenarioConfig cfg = make_demo_scenario(2);
  const DerivedWeights w = derive_weights(cfg);
  Rng rng(23);
  const int n = cfg.aug_state_dim();
  const int nu1 = cfg.aug_input_dim();

  Eigen::MatrixXd jx, ju;
  int tested = 0;
  double worst = 0.0;
  while (tested < 1000) {
    const Eigen::VectorXd x = sample_feasible_state(cfg, rng);
    const Eigen::VectorXd u = sample_input(cfg, rng);
    augmented_jacobians(x, u, cfg, w, jx, ju);

    const auto fx = [&](const Eigen::VectorXd& xx) {
      return augmented_dynamics(xx, u, cfg, w);
    };
    const auto fu = [&](const Eigen::VectorXd& uu) {
      return augmented_dynamics(x, uu, cfg, w);
    };
    const Eigen::MatrixXd jx_fd = oracles::central_difference_jacobian(fx, x);
    const Eigen::MatrixXd ju_fd = oracles::central_difference_jacobian(fu, u);
    worst = std::max(worst, oracles::relative_error(jx, jx_fd));
    worst = std::max(worst, oracles::relative_error(ju, ju_fd));
    ++tested;
  }
  CHECK(worst < 1e-6);

  SUBCASE("structure checks at a generic point") {
    const Eigen::VectorXd x = sample_feasible_state(cfg, rng);
    const Eigen::VectorXd u = sample_input(cfg, rng);
    const double s = u[cfg.input_dim()];
    augmented_jacobians(x, u, cfg, w, jx, ju);
    // Dilation column equals the dynamics divided by s.
    const Eigen::VectorXd f = augmented_dynamics(x, u, cfg, w);
    CHECK((ju.col(nu1 - 1) - f / s).lpNorm<Eigen::Infinity>() < 1e-12);
    // Agent block equals s times the constant system matrix.
    const Eigen::MatrixXd a9 = oracles::agent_system_matrix(cfg.agent_mass);
    CHECK((jx.topLeftCorner(9, 9) - s * a9).norm() == doctest::Approx(0.0));
    // Cross-agent blocks vanish (decoupled vehicles).
    CHECK(jx.block(0, 9, 9, 9).norm() == 0.0);
    CHECK(ju.block(0, 3, 9, 3).norm() == 0.0);
    // Nothing depends on the accumulated violation or cost coordinates.
    CHECK(jx.col(n - 1).norm() == 0.0);
    CHECK(jx.col(n - 2).norm() == 0.0);
  }
}

TEST_CASE("Jacobians also match at smoothly infeasible points") {
  const ScenarioConfig cfg = make_demo_scenario(2);
  const DerivedWeights w = derive_weights(cfg);
  Rng rng(31);
  Eigen::MatrixXd jx, ju;
  int tested = 0;
  double worst = 0.0;
  while (tested < 200) {
    Eigen::VectorXd x(cfg.aug_state_dim());
    for (int i = 0; i < x.size(); ++i) x[i] = rng.uniform(-10.0, 25.0);
    const Eigen::VectorXd g = state_inequalities(x.head(cfg.state_dim()), cfg);
    if (g.cwiseAbs().minCoeff() < 1e-3) continue;  // keep clear of the kink
    const Eigen::VectorXd u = sample_input(cfg, rng);
    augmented_jacobians(x, u, cfg, w, jx, ju);
    const auto fx = [&](const Eigen::VectorXd& xx) {
      return augmented_dynamics(xx, u, cfg, w);
    };
    const Eigen::MatrixXd jx_fd = oracles::central_difference_jacobian(fx, x, 1e-7);
    worst = std::max(worst, oracles::relative_error(jx, jx_fd));
    ++tested;
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("input inequality stack") {
  const ScenarioConfig cfg = make_demo_scenario(2);
  const double gamma = 1e-6;
  const int nu1 = cfg.aug_input_dim();
  Eigen::VectorXd xi = Eigen::VectorXd::Zero(cfg.aug_state_dim());

  SUBCASE("all entries vanish at the exact boundary") {
    xi[cfg.state_dim()] = gamma;
    // eta at the upper bound makes the first box block zero but the lower
    // block strictly negative: use upper bound for block 1 check.
    const Eigen::VectorXd eta = cfg.aug_input_max();
    const Eigen::VectorXd g = input_inequalities(xi, eta, cfg, gamma);
    REQUIRE(g.size() == 15);
    CHECK(g[0] == 0.0);
    CHECK(g.segment(1, nu1).lpNorm<Eigen::Infinity>() == 0.0);
  }

  SUBCASE("unit violation of the relaxed bound") {
    xi[cfg.state_dim()] = gamma + 1.0;
    const Eigen::VectorXd g =
        input_inequalities(xi, cfg.aug_input_max(), cfg, gamma);
    CHECK(g[0] == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("zero thrust rates at minimum dilation") {
    Eigen::VectorXd eta = Eigen::VectorXd::Zero(nu1);
    eta[cfg.input_dim()] = 7.0;
    const Eigen::VectorXd g = input_inequalities(xi, eta, cfg, gamma);
    // Upper block: eta - u_max = (-2,...,-2, 7-28); lower: u_min - eta.
    CHECK(g.segment(1, cfg.input_dim()).isConstant(-2.0));
    CHECK(g[1 + cfg.input_dim()] == 7.0 - 28.0);
    CHECK(g.segment(1 + nu1, cfg.input_dim()).isConstant(-2.0));
    CHECK(g[1 + nu1 + cfg.input_dim()] == 0.0);
  }
}
