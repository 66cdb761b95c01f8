#pragma once

// Planning scenario: workspace, robot, endpoints and planner defaults.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ms2mp/environment.hpp"
#include "ms2mp/errors.hpp"
#include "ms2mp/gp_prior.hpp"
#include "ms2mp/kinematics.hpp"

namespace ms2mp {

struct PlannerParams {
  double eps = 0.2;
  double sigma_obs = 0.001;
  std::size_t support_states = 11;  // N+1 in chain indexing
  std::size_t n_ip = 4;
  double total_time = 1.0;
  double qc = 1.0;  // isotropic power spectral density
  double cell_size = 0.01;
  double anchor_sigma2 = 1e-8;
  double mid_scale = 1.0;
  bool mid_prior = true;
};

struct SuiteDescriptor {
  std::size_t count = 24;
  std::size_t min_obstacles = 2;
  std::size_t max_obstacles = 5;
  std::uint64_t seed = 0;
};

/// Lowest sphere clearance (obstacle distance minus radius) of a configuration,
/// measured on the exact primitives.
inline double configurationClearance(const Workspace& ws, const RobotModel& robot, const Vector& q) {
  double best = kFarDistance;
  const auto poses = forwardKinematics(robot, q);
  for (std::size_t s = 0; s < poses.size(); ++s) {
    best = std::min(best, ws.distance(poses[s].center) - robot.spheres[s].radius);
  }
  return best;
}

inline bool configurationInBounds(const Workspace& ws, const RobotModel& robot, const Vector& q) {
  for (const auto& pose : forwardKinematics(robot, q)) {
    if (!ws.bounds.contains(pose.center)) return false;
  }
  return true;
}

struct Scenario {
  std::string name;
  Workspace workspace;
  RobotModel robot;
  Vector start;
  Vector goal;
  std::optional<Vector> start_velocity;
  std::optional<Vector> goal_velocity;
  PlannerParams planner;
  std::optional<SuiteDescriptor> suite;

  Eigen::Index configDim() const { return robot.configDim(); }

  /// Endpoint velocity defaults to the straight-line velocity.
  State startState() const {
    return makeState(start, start_velocity.value_or((goal - start) / planner.total_time));
  }
  State goalState() const {
    return makeState(goal, goal_velocity.value_or((goal - start) / planner.total_time));
  }

  void validate() const {
    try {
      workspace.validate();
    } catch (const std::invalid_argument& e) {
      throw ScenarioError("workspace", e.what());
    }
    try {
      robot.validate();
    } catch (const std::invalid_argument& e) {
      throw ScenarioError("robot", e.what());
    }
    const auto& p = planner;
    if (!(p.eps > 0.0)) throw ScenarioError("planner.eps", "must be > 0");
    if (!(p.sigma_obs > 0.0)) throw ScenarioError("planner.sigma_obs", "must be > 0");
    if (p.support_states < 2) throw ScenarioError("planner.N", "need at least 2 support states");
    if (!(p.total_time > 0.0)) throw ScenarioError("planner.total_time", "must be > 0");
    if (!(p.qc > 0.0)) throw ScenarioError("planner.qc", "must be > 0");
    if (!(p.cell_size > 0.0)) throw ScenarioError("planner.cell_size", "must be > 0");
    if (!(p.anchor_sigma2 > 0.0)) throw ScenarioError("planner.anchor_sigma2", "must be > 0");
    if (!(p.mid_scale > 0.0)) throw ScenarioError("planner.mid_scale", "must be > 0");
    const auto dim = configDim();
    auto checkConfig = [&](const char* field, const Vector& q) {
      if (q.size() != dim) {
        throw ScenarioError(field, "expected " + std::to_string(dim) + " values, got " + std::to_string(q.size()));
      }
      if (!q.allFinite()) throw ScenarioError(field, "non-finite value");
      if (!configurationInBounds(workspace, robot, q)) throw ScenarioError(field, "outside workspace bounds");
      const double clearance = configurationClearance(workspace, robot, q);
      if (!(clearance > 0.0)) {
        throw ScenarioError(field, "configuration in collision (clearance " + std::to_string(clearance) + ")");
      }
    };
    checkConfig("start", start);
    checkConfig("goal", goal);
    if (start_velocity && start_velocity->size() != dim) throw ScenarioError("start_velocity", "dimension mismatch");
    if (goal_velocity && goal_velocity->size() != dim) throw ScenarioError("goal_velocity", "dimension mismatch");
    if (suite && suite->min_obstacles > suite->max_obstacles) {
      throw ScenarioError("suite.obstacle_count", "min exceeds max");
    }
  }
};

}  // namespace ms2mp
