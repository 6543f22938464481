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

#include "ctraj/scenario.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace ctraj {
namespace {

using nlohmann::json;

Eigen::Vector3d vec3_from_json(const json& j, const char* field) {
  if (!j.is_array() || j.size() != 3) {
    throw ScenarioParseError(std::string(field) + ": expected array of 3 numbers");
  }
  return Eigen::Vector3d(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

json vec3_to_json(const Eigen::Vector3d& v) { return json::array({v[0], v[1], v[2]}); }

BoundaryState boundary_from_json(const json& j) {
  BoundaryState b;
  b.position = vec3_from_json(j.at("position"), "position");
  b.velocity = vec3_from_json(j.at("velocity"), "velocity");
  b.thrust = vec3_from_json(j.at("thrust"), "thrust");
  return b;
}

json boundary_to_json(const BoundaryState& b) {
  return json{{"position", vec3_to_json(b.position)},
              {"velocity", vec3_to_json(b.velocity)},
              {"thrust", vec3_to_json(b.thrust)}};
}

void check(bool ok, const std::string& message) {
  if (!ok) throw ScenarioValidationError(message);
}

}  // namespace

Eigen::VectorXd ScenarioConfig::aug_input_min() const {
  Eigen::VectorXd u(aug_input_dim());
  for (int i = 0; i < num_agents; ++i) u.segment<3>(3 * i) = thrust_rate_min;
  u[input_dim()] = time_min;
  return u;
}

Eigen::VectorXd ScenarioConfig::aug_input_max() const {
  Eigen::VectorXd u(aug_input_dim());
  for (int i = 0; i < num_agents; ++i) u.segment<3>(3 * i) = thrust_rate_max;
  u[input_dim()] = time_max;
  return u;
}

void ScenarioConfig::validate() const {
  check(num_agents >= 1, "num_agents must be >= 1");
  check(agent_mass > 0.0, "agent_mass must be positive");
  check(gravity > 0.0, "gravity must be positive");
  check(static_cast<int>(agents.size()) == num_agents,
        "agents list length must equal num_agents");
  check((position_min.array() < position_max.array()).all(),
        "position_min must be componentwise below position_max");
  check((thrust_rate_min.array() < thrust_rate_max.array()).all(),
        "thrust_rate_min must be componentwise below thrust_rate_max");
  check(thrust_min > 0.0 && thrust_min < thrust_max,
        "thrust bounds must satisfy 0 < thrust_min < thrust_max");
  check(time_min > 0.0 && time_min < time_max,
        "time bounds must satisfy 0 < time_min < time_max");
  check(velocity_max > 0.0, "velocity_max must be positive");
  check(tilt_max >= 0.0 && tilt_max <= M_PI / 2.0,
        "tilt_max must lie in [0, pi/2]");
  check(inter_agent_distance > 0.0, "inter_agent_distance must be positive");
  check((weights.array() >= 0.0).all(), "weights must be nonnegative");
  check(std::abs(weights.sum() - 1.0) <= 1e-9, "weights must sum to 1");
  for (const auto& o : obstacles) {
    check(o.radius > 0.0, "obstacle radius must be positive");
  }

  auto inside_box = [&](const Eigen::Vector3d& r) {
    return (r.array() >= position_min.array()).all() &&
           (r.array() <= position_max.array()).all();
  };
  auto clears_obstacles = [&](const Eigen::Vector3d& r) {
    for (const auto& o : obstacles) {
      if ((r.head<2>() - o.center).norm() < o.radius) return false;
    }
    return true;
  };
  for (int i = 0; i < num_agents; ++i) {
    check(inside_box(agents[i].start.position),
          "initial position outside position box");
    check(inside_box(agents[i].goal.position),
          "final position outside position box");
    check(clears_obstacles(agents[i].start.position),
          "initial position inside an obstacle");
    check(clears_obstacles(agents[i].goal.position),
          "final position inside an obstacle");
  }
  for (int i = 0; i < num_agents; ++i) {
    for (int j = i + 1; j < num_agents; ++j) {
      check((agents[i].start.position - agents[j].start.position).norm() >=
                inter_agent_distance,
            "initial separation < d");
      check((agents[i].goal.position - agents[j].goal.position).norm() >=
                inter_agent_distance,
            "final separation < d");
    }
  }
}

DerivedWeights derive_weights(const ScenarioConfig& cfg) {
  DerivedWeights w;
  w.time_weight = cfg.weights[0] / cfg.time_max;
  w.thrust_rate_weight =
      cfg.weights[1] / (cfg.time_max * cfg.thrust_rate_max.squaredNorm());
  w.thrust_weight =
      cfg.weights[2] / (cfg.time_max * cfg.thrust_max * cfg.thrust_max);
  return w;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> boundary_augmented_states(
    const ScenarioConfig& cfg) {
  const int n = cfg.aug_state_dim();
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd xf = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < cfg.num_agents; ++i) {
    x0.segment<9>(9 * i) = cfg.agents[i].start.stacked();
    xf.segment<9>(9 * i) = cfg.agents[i].goal.stacked();
  }
  return {x0, xf};
}

ScenarioConfig parse_scenario(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ScenarioParseError(std::string("scenario JSON parse failure: ") + e.what());
  }
  ScenarioConfig cfg;
  try {
    cfg.num_agents = j.at("num_agents").get<int>();
    cfg.agent_mass = j.at("agent_mass").get<double>();
    cfg.gravity = j.value("gravity", 9.81);
    for (const auto& jo : j.at("obstacles")) {
      CylinderObstacle o;
      const auto& c = jo.at("center");
      if (!c.is_array() || c.size() != 2) {
        throw ScenarioParseError("obstacle center: expected array of 2 numbers");
      }
      o.center = Eigen::Vector2d(c[0].get<double>(), c[1].get<double>());
      o.radius = jo.at("radius").get<double>();
      cfg.obstacles.push_back(o);
    }
    cfg.inter_agent_distance = j.at("inter_agent_distance").get<double>();
    cfg.position_min = vec3_from_json(j.at("position_min"), "position_min");
    cfg.position_max = vec3_from_json(j.at("position_max"), "position_max");
    cfg.velocity_max = j.at("velocity_max").get<double>();
    cfg.thrust_min = j.at("thrust_min").get<double>();
    cfg.thrust_max = j.at("thrust_max").get<double>();
    cfg.tilt_max = j.at("tilt_max").get<double>();
    cfg.thrust_rate_min = vec3_from_json(j.at("thrust_rate_min"), "thrust_rate_min");
    cfg.thrust_rate_max = vec3_from_json(j.at("thrust_rate_max"), "thrust_rate_max");
    cfg.time_min = j.at("time_min").get<double>();
    cfg.time_max = j.at("time_max").get<double>();
    const auto& w = j.at("weights");
    if (!w.is_array() || w.size() != 3) {
      throw ScenarioParseError("weights: expected array of 3 numbers");
    }
    cfg.weights = Eigen::Vector3d(w[0].get<double>(), w[1].get<double>(), w[2].get<double>());
    for (const auto& ja : j.at("agents")) {
      AgentBoundary a;
      a.start = boundary_from_json(ja.at("start"));
      a.goal = boundary_from_json(ja.at("goal"));
      cfg.agents.push_back(a);
    }
  } catch (const json::exception& e) {
    throw ScenarioParseError(std::string("scenario JSON field error: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::string serialize_scenario(const ScenarioConfig& cfg) {
  json j;
  j["num_agents"] = cfg.num_agents;
  j["agent_mass"] = cfg.agent_mass;
  j["gravity"] = cfg.gravity;
  j["obstacles"] = json::array();
  for (const auto& o : cfg.obstacles) {
    j["obstacles"].push_back(
        {{"center", json::array({o.center[0], o.center[1]})}, {"radius", o.radius}});
  }
  j["inter_agent_distance"] = cfg.inter_agent_distance;
  j["position_min"] = vec3_to_json(cfg.position_min);
  j["position_max"] = vec3_to_json(cfg.position_max);
  j["velocity_max"] = cfg.velocity_max;
  j["thrust_min"] = cfg.thrust_min;
  j["thrust_max"] = cfg.thrust_max;
  j["tilt_max"] = cfg.tilt_max;
  j["thrust_rate_min"] = vec3_to_json(cfg.thrust_rate_min);
  j["thrust_rate_max"] = vec3_to_json(cfg.thrust_rate_max);
  j["time_min"] = cfg.time_min;
  j["time_max"] = cfg.time_max;
  j["weights"] = json::array({cfg.weights[0], cfg.weights[1], cfg.weights[2]});
  j["agents"] = json::array();
  for (const auto& a : cfg.agents) {
    j["agents"].push_back({{"start", boundary_to_json(a.start)},
                           {"goal", boundary_to_json(a.goal)}});
  }
  return j.dump(2) + "\n";
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ScenarioParseError("scenario not found: " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

void save_scenario(const ScenarioConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw ScenarioError("cannot open scenario file for writing: " + path.string());
  }
  out << serialize_scenario(cfg);
}

ScenarioConfig make_demo_scenario(int num_agents) {
  ScenarioConfig cfg;
  cfg.num_agents = num_agents;
  cfg.agent_mass = 0.35;
  cfg.gravity = 9.81;
  cfg.obstacles = {{Eigen::Vector2d(5.0, 8.0), 2.0},
                   {Eigen::Vector2d(9.0, 5.0), 1.5}};
  cfg.inter_agent_distance = 1.0;
  cfg.position_min = Eigen::Vector3d(0.0, 0.0, 0.0);
  cfg.position_max = Eigen::Vector3d(15.0, 15.0, 15.0);
  cfg.velocity_max = 3.0;
  cfg.thrust_min = 2.0;
  cfg.thrust_max = 5.0;
  cfg.tilt_max = M_PI / 4.0;
  cfg.thrust_rate_min = Eigen::Vector3d(-2.0, -2.0, -2.0);
  cfg.thrust_rate_max = Eigen::Vector3d(2.0, 2.0, 2.0);
  cfg.time_min = 7.0;
  cfg.time_max = 28.0;
  cfg.weights = Eigen::Vector3d(0.1, 0.8, 0.1);

  // Start/goal assignments on the demo bounding box (corners (2,2,2) and
  // (14,14,14)): opposite vertices for the first four agents, opposite edge
  // midpoints for agents five and six.
  const std::vector<std::pair<Eigen::Vector3d, Eigen::Vector3d>> routes = {
      {{2.0, 2.0, 2.0}, {14.0, 14.0, 14.0}},
      {{14.0, 14.0, 2.0}, {2.0, 2.0, 14.0}},
      {{2.0, 14.0, 2.0}, {14.0, 2.0, 14.0}},
      {{14.0, 2.0, 2.0}, {2.0, 14.0, 14.0}},
      {{8.0, 2.0, 2.0}, {8.0, 14.0, 14.0}},
      {{8.0, 14.0, 2.0}, {8.0, 2.0, 14.0}},
  };
  if (num_agents < 1 || num_agents > static_cast<int>(routes.size())) {
    throw ScenarioError("demo scenarios support 1 to 6 agents");
  }
  for (int i = 0; i < num_agents; ++i) {
    AgentBoundary a;
    a.start.position = routes[i].first;
    a.goal.position = routes[i].second;
    a.start.thrust = cfg.hover_thrust();
    a.goal.thrust = cfg.hover_thrust();
    cfg.agents.push_back(a);
  }
  cfg.validate();
  return cfg;
}

}  // namespace ctraj
