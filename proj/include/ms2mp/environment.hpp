#pragma once

// Planar workspace, gridded signed distance field and hinge obstacle cost.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "ms2mp/errors.hpp"

namespace ms2mp {

using Point2 = Eigen::Vector2d;

/// Distance reported for an empty workspace and for out-of-grid lookups.
inline constexpr double kFarDistance = 1e6;

struct Circle {
  Point2 center;
  double radius;
};

struct Box {
  Point2 min;
  Point2 max;
};

using Obstacle = std::variant<Circle, Box>;

struct Bounds {
  Point2 min;
  Point2 max;

  bool contains(const Point2& p) const {
    return p.x() >= min.x() && p.x() <= max.x() && p.y() >= min.y() && p.y() <= max.y();
  }
};

inline double signedDistance(const Circle& c, const Point2& p) { return (p - c.center).norm() - c.radius; }

inline double signedDistance(const Box& b, const Point2& p) {
  const Point2 center = 0.5 * (b.min + b.max);
  const Point2 half = 0.5 * (b.max - b.min);
  const Point2 q = (p - center).cwiseAbs() - half;
  const double outside = q.cwiseMax(0.0).norm();
  const double inside = std::min(std::max(q.x(), q.y()), 0.0);
  return outside + inside;
}

/// Smallest feature size of a primitive (radius, or half the thinner box side).
inline double featureRadius(const Obstacle& o) {
  return std::visit(
      [](const auto& prim) -> double {
        using T = std::decay_t<decltype(prim)>;
        if constexpr (std::is_same_v<T, Circle>) {
          return prim.radius;
        } else {
          return 0.5 * (prim.max - prim.min).minCoeff();
        }
      },
      o);
}

struct Workspace {
  Bounds bounds;
  std::vector<Obstacle> obstacles;

  void validate() const {
    if (!(bounds.max.x() > bounds.min.x() && bounds.max.y() > bounds.min.y())) {
      throw std::invalid_argument("Workspace: degenerate bounds");
    }
    for (const auto& o : obstacles) {
      if (const auto* c = std::get_if<Circle>(&o)) {
        if (!(c->radius > 0.0)) throw std::invalid_argument("Workspace: circle radius must be > 0");
      } else {
        const auto& b = std::get<Box>(o);
        if (!(b.max.x() > b.min.x() && b.max.y() > b.min.y())) {
          throw std::invalid_argument("Workspace: box corners must be ordered");
        }
      }
    }
  }

  /// Exact signed distance: min over primitives, kFarDistance when empty.
  double distance(const Point2& p) const {
    double d = kFarDistance;
    for (const auto& o : obstacles) {
      d = std::min(d, std::visit([&](const auto& prim) { return signedDistance(prim, p); }, o));
    }
    return d;
  }
};

struct SdfSample {
  double distance;
  Point2 gradient;
};

/// Node (r, c) sits at origin + (c * cell_size, r * cell_size); values are
/// stored row-major, rows along y.
class SignedDistanceField {
 public:
  SignedDistanceField() = default;
  SignedDistanceField(Point2 origin, double cell_size, Eigen::Index rows, Eigen::Index cols,
                      std::vector<double> values)
      : origin_(origin), cell_size_(cell_size), rows_(rows), cols_(cols), values_(std::move(values)) {
    if (!(cell_size_ > 0.0)) throw std::invalid_argument("SignedDistanceField: cell_size must be > 0");
    if (rows_ < 2 || cols_ < 2) throw std::invalid_argument("SignedDistanceField: need >= 2x2 nodes");
    if (static_cast<Eigen::Index>(values_.size()) != rows_ * cols_) {
      throw std::invalid_argument("SignedDistanceField: value count does not match rows*cols");
    }
    for (double v : values_) {
      if (!std::isfinite(v)) throw std::invalid_argument("SignedDistanceField: non-finite value");
    }
  }

  const Point2& origin() const { return origin_; }
  double cellSize() const { return cell_size_; }
  Eigen::Index rows() const { return rows_; }
  Eigen::Index cols() const { return cols_; }
  const std::vector<double>& values() const { return values_; }
  double value(Eigen::Index r, Eigen::Index c) const { return values_[r * cols_ + c]; }

  Point2 nodePosition(Eigen::Index r, Eigen::Index c) const {
    return origin_ + cell_size_ * Point2(static_cast<double>(c), static_cast<double>(r));
  }

  bool contains(const Point2& p) const {
    const Point2 rel = (p - origin_) / cell_size_;
    return rel.x() >= 0.0 && rel.y() >= 0.0 && rel.x() <= static_cast<double>(cols_ - 1) &&
           rel.y() <= static_cast<double>(rows_ - 1);
  }

  /// Bilinear interpolation; the gradient is the exact derivative of the
  /// interpolant inside the containing cell.
  SdfSample query(const Point2& p) const {
    if (!contains(p)) {
      std::ostringstream os;
      os << "SignedDistanceField: point (" << p.x() << ", " << p.y() << ") outside grid";
      throw OutOfBoundsError(os.str());
    }
    const Point2 rel = (p - origin_) / cell_size_;
    const auto c = std::min<Eigen::Index>(static_cast<Eigen::Index>(std::floor(rel.x())), cols_ - 2);
    const auto r = std::min<Eigen::Index>(static_cast<Eigen::Index>(std::floor(rel.y())), rows_ - 2);
    const double u = rel.x() - static_cast<double>(c);
    const double v = rel.y() - static_cast<double>(r);
    const double v00 = value(r, c), v01 = value(r, c + 1);
    const double v10 = value(r + 1, c), v11 = value(r + 1, c + 1);
    SdfSample s;
    s.distance = (1 - u) * (1 - v) * v00 + u * (1 - v) * v01 + (1 - u) * v * v10 + u * v * v11;
    s.gradient.x() = ((1 - v) * (v01 - v00) + v * (v11 - v10)) / cell_size_;
    s.gradient.y() = ((1 - u) * (v10 - v00) + u * (v11 - v01)) / cell_size_;
    return s;
  }

  /// Same as query(), but off-grid points read as far free space with zero gradient.
  SdfSample queryOrFar(const Point2& p) const {
    if (!contains(p)) return {kFarDistance, Point2::Zero()};
    return query(p);
  }

 private:
  Point2 origin_ = Point2::Zero();
  double cell_size_ = 1.0;
  Eigen::Index rows_ = 0;
  Eigen::Index cols_ = 0;
  std::vector<double> values_;
};

/// Sample the exact primitive distance on a grid covering the workspace bounds.
inline SignedDistanceField buildSdf(const Workspace& ws, double cell_size) {
  ws.validate();
  if (!(cell_size > 0.0)) throw std::invalid_argument("buildSdf: cell_size must be > 0");
  for (const auto& o : ws.obstacles) {
    if (cell_size > featureRadius(o)) {
      throw std::invalid_argument("buildSdf: cell_size exceeds the smallest obstacle radius");
    }
  }
  const Point2 extent = ws.bounds.max - ws.bounds.min;
  const auto cols = static_cast<Eigen::Index>(std::ceil(extent.x() / cell_size - 1e-9)) + 1;
  const auto rows = static_cast<Eigen::Index>(std::ceil(extent.y() / cell_size - 1e-9)) + 1;
  std::vector<double> values(static_cast<std::size_t>(rows * cols));
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      const Point2 p = ws.bounds.min + cell_size * Point2(static_cast<double>(c), static_cast<double>(r));
      values[static_cast<std::size_t>(r * cols + c)] = ws.distance(p);
    }
  }
  return SignedDistanceField(ws.bounds.min, cell_size, rows, cols, std::move(values));
}

struct HingeValue {
  double cost;
  double slope;
};

/// max(eps - d, 0); the kink d == eps belongs to the active branch (slope -1).
inline HingeValue hingeCost(double d, double eps) {
  if (!(eps >= 0.0)) throw std::invalid_argument("hingeCost: eps must be >= 0");
  if (d <= eps) return {eps - d, -1.0};
  return {0.0, 0.0};
}

/// Text grid: "origin_x origin_y cell_size rows cols" then row-major values.
inline void writeSdf(std::ostream& os, const SignedDistanceField& sdf) {
  os.precision(17);
  os << sdf.origin().x() << ' ' << sdf.origin().y() << ' ' << sdf.cellSize() << ' ' << sdf.rows()
     << ' ' << sdf.cols() << '\n';
  for (Eigen::Index r = 0; r < sdf.rows(); ++r) {
    for (Eigen::Index c = 0; c < sdf.cols(); ++c) {
      if (c > 0) os << ' ';
      os << sdf.value(r, c);
    }
    os << '\n';
  }
}

inline SignedDistanceField readSdf(std::istream& is) {
  double ox = 0, oy = 0, cell = 0;
  Eigen::Index rows = 0, cols = 0;
  if (!(is >> ox >> oy >> cell >> rows >> cols)) {
    throw std::runtime_error("readSdf: malformed header");
  }
  if (rows < 2 || cols < 2) throw std::runtime_error("readSdf: grid too small");
  std::vector<double> values(static_cast<std::size_t>(rows * cols));
  for (auto& v : values) {
    if (!(is >> v)) throw std::runtime_error("readSdf: truncated value list");
  }
  return SignedDistanceField(Point2(ox, oy), cell, rows, cols, std::move(values));
}

}  // namespace ms2mp
