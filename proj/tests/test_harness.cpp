#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "ctraj/harness.hpp"
#include "ctraj/rng.hpp"

using namespace ctraj;

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct TempTree {
  std::filesystem::path root;
  explicit TempTree(const std::string& name) {
    root = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(root);
    std::filesystem::create_directories(root);
  }
  ~TempTree() { std::filesystem::remove_all(root); }
};

std::filesystem::path write_demo(const TempTree& tree, int agents) {
  const auto path = tree.root / "scenario.json";
  save_scenario(make_demo_scenario(agents), path);
  return path;
}

// Fast single-agent settings for harness-level tests.
void shrink(ScpSettings* scp, FilterSettings* filter) {
  scp->num_nodes = 5;
  scp->max_iterations = 60;
  scp->budget = 30.0;
  filter->num_particles = 5;
}

}  // namespace

TEST_CASE("quantiles interpolate between order statistics") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const int count = 1 + static_cast<int>(rng.uniform(0.0, 30.0));
    std::vector<double> values;
    for (int i = 0; i < count; ++i) values.push_back(rng.normal());
    for (const double p : {0.25, 0.5, 0.75}) {
      // Sort-based oracle with the same interpolation convention.
      std::vector<double> sorted = values;
      std::sort(sorted.begin(), sorted.end());
      const double pos = p * (count - 1);
      const int lo = static_cast<int>(std::floor(pos));
      const int hi = static_cast<int>(std::ceil(pos));
      const double expected =
          sorted[lo] + (pos - lo) * (sorted[hi] - sorted[lo]);
      CHECK(linear_quantile(values, p) == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("missing scenario file exits with the documented code") {
  SolveOptions options;
  options.scenario_path = "/definitely/not/here.json";
  options.out_dir = std::filesystem::temp_directory_path() / "ctraj_missing_out";
  CHECK(run_solve(options) == kExitScenarioNotFound);
  std::filesystem::remove_all(options.out_dir);
}

TEST_CASE("solve artifacts are byte-identical under a fixed seed") {
  TempTree tree("ctraj_solve_det");
  const auto scenario = write_demo(tree, 1);

  SolveOptions options;
  options.scenario_path = scenario;
  options.init = InitMode::random_shooting;
  options.seed = 7;
  shrink(&options.scp, &options.filter);

  options.out_dir = tree.root / "a";
  REQUIRE(run_solve(options) == kExitOk);
  options.out_dir = tree.root / "b";
  REQUIRE(run_solve(options) == kExitOk);

  for (const char* name :
       {"report.json", "convergence.csv", "trajectory.csv", "solution.json"}) {
    CHECK(slurp(tree.root / "a" / name) == slurp(tree.root / "b" / name));
  }

  SUBCASE("a different seed produces different artifacts") {
    options.seed = 8;
    options.out_dir = tree.root / "c";
    REQUIRE(run_solve(options) == kExitOk);
    CHECK(slurp(tree.root / "a" / "solution.json") !=
          slurp(tree.root / "c" / "solution.json"));
  }
}

TEST_CASE("warm-start driver emits diagnostics") {
  TempTree tree("ctraj_ws_out");
  const auto scenario = write_demo(tree, 1);

  WarmstartOptions options;
  options.scenario_path = scenario;
  options.seed = 11;
  options.out_dir = tree.root / "ws";
  shrink(&options.scp, &options.filter);

  SUBCASE("single-particle run cannot resample") {
    options.filter.num_particles = 1;
    REQUIRE(run_warmstart(options) == kExitOk);
    const std::string diag = slurp(options.out_dir / "filter.json");
    CHECK(diag.find("\"resample_events\": 0") != std::string::npos);
    CHECK(diag.find("\"selected_index\": 0") != std::string::npos);
  }

  SUBCASE("selected score is minimal and reproducible") {
    REQUIRE(run_warmstart(options) == kExitOk);
    const std::string a = slurp(options.out_dir / "warmstart.json");
    options.out_dir = tree.root / "ws2";
    REQUIRE(run_warmstart(options) == kExitOk);
    CHECK(a == slurp(options.out_dir / "warmstart.json"));
  }
}

TEST_CASE("benchmark aggregates repeated seeds into degenerate quantiles") {
  TempTree tree("ctraj_bench_rep");
  const auto scenario = write_demo(tree, 1);

  BenchmarkSpec spec;
  spec.scenario_path = scenario;
  spec.trials = 2;
  spec.seeds = {5, 5};  // identical trials
  spec.init = InitMode::random_shooting;
  spec.out_dir = tree.root / "bench";
  spec.time_grid_points = 8;
  shrink(&spec.scp, &spec.filter);

  BenchmarkResult result;
  REQUIRE(run_benchmark(spec, &result) == kExitOk);
  REQUIRE(result.trials.size() == 2);
  CHECK(result.trials[0].final_objective == result.trials[1].final_objective);
  for (std::size_t i = 0; i < result.grid_times.size(); ++i) {
    CHECK(result.objective_q25[i] == result.objective_median[i]);
    CHECK(result.objective_median[i] == result.objective_q75[i]);
    CHECK(result.violation_q25[i] == result.violation_q75[i]);
  }
  CHECK(slurp(tree.root / "bench" / "trials" / "trial_0.csv") ==
        slurp(tree.root / "bench" / "trials" / "trial_1.csv"));
}

TEST_CASE("postprocess re-audits a stored trajectory") {
  TempTree tree("ctraj_postprocess");
  const auto scenario = write_demo(tree, 1);
  const ScenarioConfig cfg = make_demo_scenario(1);

  // Hover inputs: a valid discrete trajectory at the start position.
  ScpSettings scp;
  scp.num_nodes = 4;
  std::vector<Eigen::VectorXd> inputs;
  for (int k = 0; k < 3; ++k) {
    Eigen::VectorXd eta = Eigen::VectorXd::Zero(cfg.aug_input_dim());
    eta[cfg.input_dim()] = 9.0;
    inputs.push_back(eta);
  }
  const DiscreteTrajectory traj = forward_shoot(inputs, cfg, scp);
  const auto traj_path = tree.root / "traj.json";
  std::ofstream(traj_path) << serialize_trajectory(traj);

  PostprocessOptions options;
  options.scenario_path = scenario;
  options.trajectory_path = traj_path;
  options.out_dir = tree.root / "pp";
  REQUIRE(run_postprocess(options) == kExitOk);

  const std::string report = slurp(options.out_dir / "report.json");
  CHECK(report.find("\"final_time\": 9.0") != std::string::npos);
  CHECK(std::filesystem::exists(options.out_dir / "trajectory.csv"));
}
