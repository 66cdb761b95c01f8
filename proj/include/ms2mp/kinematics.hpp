#pragma once

// Collision-sphere forward kinematics for planar robots.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace ms2mp {

enum class RobotKind { kPoint, kPlanarArm };

struct BodySphere {
  int link = 0;
  double offset = 0.0;  // distance along the link from its joint
  double radius = 0.0;
};

struct RobotModel {
  RobotKind kind = RobotKind::kPoint;
  std::vector<double> link_lengths;  // planar arm only
  std::vector<BodySphere> spheres;   // sorted by (link, offset)
  Eigen::Vector2d base_position = Eigen::Vector2d::Zero();
  double base_heading = 0.0;

  static RobotModel point(double radius, const Eigen::Vector2d& base = Eigen::Vector2d::Zero()) {
    RobotModel m;
    m.kind = RobotKind::kPoint;
    m.spheres = {{0, 0.0, radius}};
    m.base_position = base;
    m.validate();
    return m;
  }

  static RobotModel planarArm(std::vector<double> link_lengths, std::vector<BodySphere> spheres,
                              const Eigen::Vector2d& base = Eigen::Vector2d::Zero(),
                              double heading = 0.0) {
    RobotModel m;
    m.kind = RobotKind::kPlanarArm;
    m.link_lengths = std::move(link_lengths);
    m.spheres = std::move(spheres);
    m.base_position = base;
    m.base_heading = heading;
    m.normalize();
    m.validate();
    return m;
  }

  /// Evenly spaced spheres of one radius along every link, `per_link` each.
  static RobotModel uniformArm(std::vector<double> link_lengths, int per_link, double radius,
                               const Eigen::Vector2d& base = Eigen::Vector2d::Zero(),
                               double heading = 0.0) {
    std::vector<BodySphere> spheres;
    for (std::size_t k = 0; k < link_lengths.size(); ++k) {
      for (int s = 1; s <= per_link; ++s) {
        spheres.push_back({static_cast<int>(k), link_lengths[k] * (static_cast<double>(s) / per_link), radius});
      }
    }
    return planarArm(std::move(link_lengths), std::move(spheres), base, heading);
  }

  Eigen::Index configDim() const {
    return kind == RobotKind::kPoint ? 2 : static_cast<Eigen::Index>(link_lengths.size());
  }

  void normalize() {
    std::stable_sort(spheres.begin(), spheres.end(), [](const BodySphere& a, const BodySphere& b) {
      return a.link != b.link ? a.link < b.link : a.offset < b.offset;
    });
  }

  void validate() const {
    if (spheres.empty()) throw std::invalid_argument("RobotModel: no body spheres");
    for (const auto& s : spheres) {
      if (!(s.radius > 0.0)) throw std::invalid_argument("RobotModel: sphere radius must be > 0");
    }
    if (kind == RobotKind::kPoint) {
      if (spheres.size() != 1 || spheres[0].link != 0 || spheres[0].offset != 0.0) {
        throw std::invalid_argument("RobotModel: point robot needs exactly one sphere at link 0, offset 0");
      }
      return;
    }
    if (link_lengths.empty()) throw std::invalid_argument("RobotModel: arm without links");
    for (double l : link_lengths) {
      if (!(l > 0.0)) throw std::invalid_argument("RobotModel: link lengths must be > 0");
    }
    for (const auto& s : spheres) {
      if (s.link < 0 || s.link >= static_cast<int>(link_lengths.size())) {
        throw std::invalid_argument("RobotModel: sphere link index out of range");
      }
      if (s.offset < 0.0 || s.offset > link_lengths[static_cast<std::size_t>(s.link)]) {
        throw std::invalid_argument("RobotModel: sphere offset outside its link");
      }
    }
  }
};

struct SpherePose {
  Eigen::Vector2d center;
  Eigen::Matrix<double, 2, Eigen::Dynamic> jacobian;  // d center / d q
};

inline std::vector<SpherePose> forwardKinematics(const RobotModel& model, const Eigen::VectorXd& q) {
  const auto dim = model.configDim();
  if (q.size() != dim) {
    throw std::invalid_argument("forwardKinematics: expected configuration of length " +
                                std::to_string(dim) + ", got " + std::to_string(q.size()));
  }
  std::vector<SpherePose> out;
  out.reserve(model.spheres.size());
  if (model.kind == RobotKind::kPoint) {
    out.push_back({model.base_position + q.head<2>(), Eigen::Matrix2d::Identity()});
    return out;
  }

  // Joint k sits at joints[k]; link k points along heading angles[k].
  const auto links = model.link_lengths.size();
  std::vector<Eigen::Vector2d> joints(links);
  std::vector<double> angles(links);
  Eigen::Vector2d p = model.base_position;
  double theta = model.base_heading;
  for (std::size_t k = 0; k < links; ++k) {
    theta += q[static_cast<Eigen::Index>(k)];
    joints[k] = p;
    angles[k] = theta;
    p += model.link_lengths[k] * Eigen::Vector2d(std::cos(theta), std::sin(theta));
  }

  for (const auto& s : model.spheres) {
    const auto k = static_cast<std::size_t>(s.link);
    SpherePose pose;
    pose.center = joints[k] + s.offset * Eigen::Vector2d(std::cos(angles[k]), std::sin(angles[k]));
    pose.jacobian = Eigen::Matrix<double, 2, Eigen::Dynamic>::Zero(2, dim);
    for (std::size_t m = 0; m <= k; ++m) {
      const Eigen::Vector2d lever = pose.center - joints[m];
      pose.jacobian.col(static_cast<Eigen::Index>(m)) = Eigen::Vector2d(-lever.y(), lever.x());
    }
    out.push_back(std::move(pose));
  }
  return out;
}

}  // namespace ms2mp
