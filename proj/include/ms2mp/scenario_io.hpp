#pragma once

// Scenario files (JSON) and the seeded cluttered-pocket suite generator.
//
// Top-level keys: name, workspace, robot, start, goal, start_velocity,
// goal_velocity, planner, suite. See scenarios/SCHEMA.md.

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ms2mp/errors.hpp"
#include "ms2mp/scenario.hpp"

namespace ms2mp {

namespace detail {

using nlohmann::json;

inline void rejectUnknownKeys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!ok.count(it.key())) {
      throw ScenarioError(where.empty() ? it.key() : where + "." + it.key(), "unknown key");
    }
  }
}

inline const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) {
    throw ScenarioError(where.empty() ? key : where + "." + key, "missing required key");
  }
  return j.at(key);
}

template <typename T>
T readAs(const json& j, const std::string& field) {
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    throw ScenarioError(field, std::string("wrong type: ") + e.what());
  }
}

inline Vector readVector(const json& j, const std::string& field) {
  if (!j.is_array()) throw ScenarioError(field, "expected an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) v[static_cast<Eigen::Index>(k)] = readAs<double>(j[k], field);
  return v;
}

inline Point2 readPoint(const json& j, const std::string& field) {
  const Vector v = readVector(j, field);
  if (v.size() != 2) throw ScenarioError(field, "expected [x, y]");
  return {v[0], v[1]};
}

inline json toJson(const Vector& v) {
  json a = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v[k]);
  return a;
}

inline Workspace readWorkspace(const json& j) {
  rejectUnknownKeys(j, "workspace", {"bounds", "obstacles"});
  Workspace ws;
  const json& b = require(j, "bounds", "workspace");
  ws.bounds.min = readPoint(require(b, "min", "workspace.bounds"), "workspace.bounds.min");
  ws.bounds.max = readPoint(require(b, "max", "workspace.bounds"), "workspace.bounds.max");
  if (j.contains("obstacles")) {
    const json& obs = j.at("obstacles");
    if (!obs.is_array()) throw ScenarioError("workspace.obstacles", "expected an array");
    for (std::size_t k = 0; k < obs.size(); ++k) {
      const std::string where = "workspace.obstacles[" + std::to_string(k) + "]";
      const auto type = readAs<std::string>(require(obs[k], "type", where), where + ".type");
      if (type == "circle") {
        rejectUnknownKeys(obs[k], where, {"type", "center", "radius"});
        ws.obstacles.emplace_back(Circle{readPoint(require(obs[k], "center", where), where + ".center"),
                                         readAs<double>(require(obs[k], "radius", where), where + ".radius")});
      } else if (type == "box") {
        rejectUnknownKeys(obs[k], where, {"type", "min", "max"});
        ws.obstacles.emplace_back(Box{readPoint(require(obs[k], "min", where), where + ".min"),
                                      readPoint(require(obs[k], "max", where), where + ".max")});
      } else {
        throw ScenarioError(where + ".type", "expected \"circle\" or \"box\"");
      }
    }
  }
  return ws;
}

inline RobotModel readRobot(const json& j) {
  const auto kind = readAs<std::string>(require(j, "kind", "robot"), "robot.kind");
  Eigen::Vector2d base = Eigen::Vector2d::Zero();
  if (j.contains("base")) base = readPoint(j.at("base"), "robot.base");
  try {
    if (kind == "point") {
      rejectUnknownKeys(j, "robot", {"kind", "radius", "base"});
      return RobotModel::point(readAs<double>(require(j, "radius", "robot"), "robot.radius"), base);
    }
    if (kind == "planar_arm") {
      rejectUnknownKeys(j, "robot", {"kind", "links", "spheres", "base", "heading"});
      std::vector<double> links;
      for (const auto& l : require(j, "links", "robot")) links.push_back(readAs<double>(l, "robot.links"));
      std::vector<BodySphere> spheres;
      const json& sj = require(j, "spheres", "robot");
      for (std::size_t k = 0; k < sj.size(); ++k) {
        const std::string where = "robot.spheres[" + std::to_string(k) + "]";
        rejectUnknownKeys(sj[k], where, {"link", "offset", "radius"});
        spheres.push_back({readAs<int>(require(sj[k], "link", where), where + ".link"),
                           readAs<double>(require(sj[k], "offset", where), where + ".offset"),
                           readAs<double>(require(sj[k], "radius", where), where + ".radius")});
      }
      const double heading = j.contains("heading") ? readAs<double>(j.at("heading"), "robot.heading") : 0.0;
      return RobotModel::planarArm(std::move(links), std::move(spheres), base, heading);
    }
  } catch (const std::invalid_argument& e) {
    throw ScenarioError("robot", e.what());
  }
  throw ScenarioError("robot.kind", "expected \"point\" or \"planar_arm\"");
}

inline PlannerParams readPlanner(const json& j) {
  rejectUnknownKeys(j, "planner", {"eps", "sigma_obs", "N", "n_ip", "total_time", "qc", "cell_size",
                                   "anchor_sigma2", "mid_scale", "mid_prior"});
  PlannerParams p;
  auto num = [&](const char* key, double& dst) {
    if (j.contains(key)) dst = readAs<double>(j.at(key), std::string("planner.") + key);
  };
  auto count = [&](const char* key, std::size_t& dst) {
    if (!j.contains(key)) return;
    const auto v = readAs<double>(j.at(key), std::string("planner.") + key);
    if (v < 0 || v != std::floor(v)) throw ScenarioError(std::string("planner.") + key, "expected a non-negative integer");
    dst = static_cast<std::size_t>(v);
  };
  num("eps", p.eps);
  num("sigma_obs", p.sigma_obs);
  count("N", p.support_states);
  count("n_ip", p.n_ip);
  num("total_time", p.total_time);
  num("qc", p.qc);
  num("cell_size", p.cell_size);
  num("anchor_sigma2", p.anchor_sigma2);
  num("mid_scale", p.mid_scale);
  if (j.contains("mid_prior")) p.mid_prior = readAs<bool>(j.at("mid_prior"), "planner.mid_prior");
  return p;
}

inline SuiteDescriptor readSuite(const json& j) {
  rejectUnknownKeys(j, "suite", {"count", "obstacle_count", "seed"});
  SuiteDescriptor d;
  if (j.contains("count")) d.count = readAs<std::size_t>(j.at("count"), "suite.count");
  if (j.contains("obstacle_count")) {
    const Vector range = readVector(j.at("obstacle_count"), "suite.obstacle_count");
    if (range.size() != 2 || range[0] < 0 || range[1] < 0) throw ScenarioError("suite.obstacle_count", "expected [min, max]");
    d.min_obstacles = static_cast<std::size_t>(range[0]);
    d.max_obstacles = static_cast<std::size_t>(range[1]);
  }
  if (j.contains("seed")) d.seed = readAs<std::uint64_t>(j.at("seed"), "suite.seed");
  return d;
}

}  // namespace detail

/// Parse and validate; defaults fill omitted planner parameters.
inline Scenario parseScenario(const std::string& text) {
  using detail::json;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ScenarioError("", std::string("parse error: ") + e.what());
  }
  if (!j.is_object()) throw ScenarioError("", "top level must be an object");
  detail::rejectUnknownKeys(j, "", {"name", "workspace", "robot", "start", "goal", "start_velocity",
                                    "goal_velocity", "planner", "suite"});
  Scenario s;
  s.name = j.contains("name") ? detail::readAs<std::string>(j.at("name"), "name") : "scenario";
  s.workspace = detail::readWorkspace(detail::require(j, "workspace", ""));
  s.robot = detail::readRobot(detail::require(j, "robot", ""));
  s.start = detail::readVector(detail::require(j, "start", ""), "start");
  s.goal = detail::readVector(detail::require(j, "goal", ""), "goal");
  if (j.contains("start_velocity")) s.start_velocity = detail::readVector(j.at("start_velocity"), "start_velocity");
  if (j.contains("goal_velocity")) s.goal_velocity = detail::readVector(j.at("goal_velocity"), "goal_velocity");
  if (j.contains("planner")) s.planner = detail::readPlanner(j.at("planner"));
  if (j.contains("suite")) s.suite = detail::readSuite(j.at("suite"));
  s.validate();
  return s;
}

inline Scenario loadScenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parseScenario(ss.str());
  } catch (const ScenarioError& e) {
    throw ScenarioError(e, path.string());
  }
}

inline nlohmann::json scenarioToJson(const Scenario& s) {
  using detail::json;
  using detail::toJson;
  json j;
  j["name"] = s.name;
  json obstacles = json::array();
  for (const auto& o : s.workspace.obstacles) {
    if (const auto* c = std::get_if<Circle>(&o)) {
      obstacles.push_back({{"type", "circle"}, {"center", toJson(c->center)}, {"radius", c->radius}});
    } else {
      const auto& b = std::get<Box>(o);
      obstacles.push_back({{"type", "box"}, {"min", toJson(b.min)}, {"max", toJson(b.max)}});
    }
  }
  j["workspace"] = {{"bounds", {{"min", toJson(s.workspace.bounds.min)}, {"max", toJson(s.workspace.bounds.max)}}},
                    {"obstacles", obstacles}};
  if (s.robot.kind == RobotKind::kPoint) {
    j["robot"] = {{"kind", "point"}, {"radius", s.robot.spheres[0].radius}, {"base", toJson(s.robot.base_position)}};
  } else {
    json spheres = json::array();
    for (const auto& sp : s.robot.spheres) spheres.push_back({{"link", sp.link}, {"offset", sp.offset}, {"radius", sp.radius}});
    j["robot"] = {{"kind", "planar_arm"}, {"links", s.robot.link_lengths}, {"spheres", spheres},
                  {"base", toJson(s.robot.base_position)}, {"heading", s.robot.base_heading}};
  }
  j["start"] = toJson(s.start);
  j["goal"] = toJson(s.goal);
  if (s.start_velocity) j["start_velocity"] = toJson(*s.start_velocity);
  if (s.goal_velocity) j["goal_velocity"] = toJson(*s.goal_velocity);
  const auto& p = s.planner;
  j["planner"] = {{"eps", p.eps},           {"sigma_obs", p.sigma_obs},   {"N", p.support_states},
                  {"n_ip", p.n_ip},         {"total_time", p.total_time}, {"qc", p.qc},
                  {"cell_size", p.cell_size}, {"anchor_sigma2", p.anchor_sigma2}, {"mid_scale", p.mid_scale},
                  {"mid_prior", p.mid_prior}};
  if (s.suite) {
    j["suite"] = {{"count", s.suite->count},
                  {"obstacle_count", {s.suite->min_obstacles, s.suite->max_obstacles}},
                  {"seed", s.suite->seed}};
  }
  return j;
}

inline void saveScenario(const Scenario& s, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << scenarioToJson(s).dump(2) << '\n';
  if (!out) throw IoError(path.string(), "write failed");
}

// ---------------------------------------------------------------------------
// Suite generation

namespace detail {

/// Uniform double in [lo, hi) from the raw 64-bit engine output, so the
/// sequence does not depend on the standard library's distributions.
class SuiteRng {
 public:
  explicit SuiteRng(std::uint64_t seed) : engine_(seed) {}
  double uniform(double lo, double hi) {
    const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
  }
  std::size_t index(std::size_t lo, std::size_t hi) {  // inclusive
    return lo + static_cast<std::size_t>(engine_() % (hi - lo + 1));
  }

 private:
  std::mt19937_64 engine_;
};

inline std::uint64_t mixSeed(std::uint64_t seed, std::uint64_t k) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (k + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Desk-scale cluttered scene: a three-walled pocket holds the start pressed
/// against an inner wall (clearance in [0.01, 0.05] m); the goal lies outside
/// among random circular clutter.
inline Scenario generateScenario(const SuiteDescriptor& desc, std::size_t index) {
  detail::SuiteRng rng(detail::mixSeed(desc.seed, index));
  constexpr double kRadius = 0.05;
  constexpr double kWall = 0.05;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    Scenario s;
    s.name = "pocket_" + std::to_string(desc.seed) + "_" + std::to_string(index);
    s.workspace.bounds = {Point2(0.0, 0.0), Point2(3.0, 3.0)};
    s.robot = RobotModel::point(kRadius);

    const Point2 center(rng.uniform(0.9, 2.1), rng.uniform(0.9, 2.1));
    const double hw = 0.5 * rng.uniform(0.6, 0.9);
    const double hh = 0.5 * rng.uniform(0.5, 0.7);
    const int open_side = static_cast<int>(rng.index(0, 3));  // 0:+x 1:+y 2:-x 3:-y
    const Point2 lo = center - Point2(hw, hh);
    const Point2 hi = center + Point2(hw, hh);
    std::vector<Box> walls;
    if (open_side != 0) walls.push_back({Point2(hi.x(), lo.y() - kWall), Point2(hi.x() + kWall, hi.y() + kWall)});
    if (open_side != 1) walls.push_back({Point2(lo.x() - kWall, hi.y()), Point2(hi.x() + kWall, hi.y() + kWall)});
    if (open_side != 2) walls.push_back({Point2(lo.x() - kWall, lo.y() - kWall), Point2(lo.x(), hi.y() + kWall)});
    if (open_side != 3) walls.push_back({Point2(lo.x() - kWall, lo.y() - kWall), Point2(hi.x() + kWall, lo.y())});
    for (const auto& w : walls) s.workspace.obstacles.emplace_back(w);

    // Start hugs the wall opposite the opening.
    const double gap = kRadius + rng.uniform(0.01, 0.05);
    const double along = rng.uniform(0.2, 0.8);
    Point2 start;
    switch (open_side) {
      case 0: start = {lo.x() + gap, lo.y() + along * 2 * hh}; break;
      case 1: start = {lo.x() + along * 2 * hw, lo.y() + gap}; break;
      case 2: start = {hi.x() - gap, lo.y() + along * 2 * hh}; break;
      default: start = {lo.x() + along * 2 * hw, hi.y() - gap}; break;
    }

    const Point2 pocket_lo = lo - Point2(kWall, kWall);
    const Point2 pocket_hi = hi + Point2(kWall, kWall);
    auto insidePocketBox = [&](const Point2& p, double margin) {
      return p.x() > pocket_lo.x() - margin && p.x() < pocket_hi.x() + margin && p.y() > pocket_lo.y() - margin &&
             p.y() < pocket_hi.y() + margin;
    };

    Point2 goal;
    bool goal_ok = false;
    for (int g = 0; g < 200 && !goal_ok; ++g) {
      goal = Point2(rng.uniform(0.3, 2.7), rng.uniform(0.3, 2.7));
      goal_ok = !insidePocketBox(goal, 0.3) && (goal - start).norm() > 1.0;
    }
    if (!goal_ok) continue;

    const std::size_t clutter = rng.index(desc.min_obstacles, desc.max_obstacles);
    std::size_t placed = 0;
    for (int c = 0; c < 400 && placed < clutter; ++c) {
      const Circle circle{Point2(rng.uniform(0.2, 2.8), rng.uniform(0.2, 2.8)), rng.uniform(0.08, 0.18)};
      if (insidePocketBox(circle.center, circle.radius + 0.05)) continue;
      if ((circle.center - goal).norm() < circle.radius + kRadius + 0.3) continue;
      if ((circle.center - start).norm() < circle.radius + kRadius + 0.3) continue;
      s.workspace.obstacles.emplace_back(circle);
      ++placed;
    }

    s.start = Vector(2);
    s.start << start.x(), start.y();
    s.goal = Vector(2);
    s.goal << goal.x(), goal.y();
    try {
      s.validate();
    } catch (const ScenarioError&) {
      continue;
    }
    return s;
  }
  throw std::runtime_error("generateScenario: could not place a valid scene");
}

inline std::vector<Scenario> generateSuite(const SuiteDescriptor& desc) {
  std::vector<Scenario> out;
  out.reserve(desc.count);
  for (std::size_t k = 0; k < desc.count; ++k) out.push_back(generateScenario(desc, k));
  return out;
}

}  // namespace ms2mp
