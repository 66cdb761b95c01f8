#pragma once

// Planning factor graph and its compound-node chain form.
//
// Every factor is a weighted least-squares term 0.5 * r^T W r. Unary factors
// touch one support state, binary factors touch two consecutive ones. The
// compound transform groups them into per-state self-potentials and
// per-interval edge-potentials without changing the objective.

#include <Eigen/Dense>

#include <cstddef>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "ms2mp/environment.hpp"
#include "ms2mp/errors.hpp"
#include "ms2mp/gp_prior.hpp"
#include "ms2mp/kinematics.hpp"

namespace ms2mp {

/// Everything an obstacle factor needs; shared by all obstacle factors of a graph.
struct ObstacleContext {
  RobotModel robot;
  std::shared_ptr<const SignedDistanceField> sdf;
  double eps = 0.2;
  double sigma_obs = 0.001;
};

/// Per-sphere hinge residual and its Jacobian w.r.t. the configuration.
struct ObstacleCost {
  Vector residual;  // one entry per body sphere
  Matrix jacobian;  // spheres x d_cfg
};

inline ObstacleCost obstacleCostVector(const RobotModel& model, const SignedDistanceField& sdf,
                                       const Vector& q, double eps) {
  const auto poses = forwardKinematics(model, q);
  ObstacleCost out;
  out.residual.resize(static_cast<Eigen::Index>(poses.size()));
  out.jacobian.resize(static_cast<Eigen::Index>(poses.size()), q.size());
  for (std::size_t s = 0; s < poses.size(); ++s) {
    const auto row = static_cast<Eigen::Index>(s);
    const SdfSample sample = sdf.queryOrFar(poses[s].center);
    const HingeValue h = hingeCost(sample.distance - model.spheres[s].radius, eps);
    out.residual[row] = h.cost;
    out.jacobian.row(row) = h.slope * sample.gradient.transpose() * poses[s].jacobian;
  }
  return out;
}

/// Obstacle residual of the GP-interpolated state at tau, chained through Lambda and Psi.
inline BinaryResidual interpObstacleCost(const State& x_i, const State& x_j, double dt, double tau,
                                         const RobotModel& model, const SignedDistanceField& sdf,
                                         double eps) {
  if (!(tau > 0.0 && tau < dt)) {
    throw std::invalid_argument("interpObstacleCost: tau must lie strictly inside (0, dt)");
  }
  const InterpolatedState mid = interpolateState(x_i, x_j, dt, tau);
  const auto d_cfg = configDim(x_i);
  const ObstacleCost c = obstacleCostVector(model, sdf, mid.state.head(d_cfg), eps);
  BinaryResidual out;
  out.residual = c.residual;
  out.jac_first = c.jacobian * mid.jac_first.topRows(d_cfg);
  out.jac_second = c.jacobian * mid.jac_second.topRows(d_cfg);
  return out;
}

enum class FactorKind { kAnchor, kPrior, kGp, kObstacle, kInterpolatedObstacle };

inline const char* toString(FactorKind k) {
  switch (k) {
    case FactorKind::kAnchor: return "anchor";
    case FactorKind::kPrior: return "prior";
    case FactorKind::kGp: return "gp";
    case FactorKind::kObstacle: return "obstacle_unary";
    case FactorKind::kInterpolatedObstacle: return "obstacle_interp";
  }
  return "?";
}

/// Residual and Jacobians at a point; jac_second is empty for unary factors.
struct Linearization {
  Vector residual;
  Matrix jac_first;
  Matrix jac_second;
};

class Factor {
 public:
  /// Start/goal anchor: r = x - mean, weighted by cov^{-1}.
  static Factor anchor(std::size_t index, State mean, const Matrix& cov) {
    return meanFactor(FactorKind::kAnchor, index, std::move(mean), cov);
  }

  /// Interior deviation-from-prior term, same form as an anchor.
  static Factor prior(std::size_t index, State mean, const Matrix& cov) {
    return meanFactor(FactorKind::kPrior, index, std::move(mean), cov);
  }

  static Factor gp(std::size_t i, std::size_t j, double dt, const Matrix& qc) {
    Factor f(FactorKind::kGp, i, j);
    f.dt_ = dt;
    f.phi_ = transitionMatrix(dt, qc.rows());
    f.information_ = invertSpd(processNoiseCov(dt, qc), "gp");
    return f;
  }

  static Factor obstacle(std::size_t index, std::shared_ptr<const ObstacleContext> ctx) {
    Factor f(FactorKind::kObstacle, index, index);
    f.setObstacle(std::move(ctx));
    return f;
  }

  static Factor interpolatedObstacle(std::size_t i, std::size_t j, double dt, double tau,
                                     std::shared_ptr<const ObstacleContext> ctx) {
    if (!(tau > 0.0 && tau < dt)) {
      throw std::invalid_argument("interpolatedObstacle: tau must lie strictly inside (0, dt)");
    }
    Factor f(FactorKind::kInterpolatedObstacle, i, j);
    f.dt_ = dt;
    f.tau_ = tau;
    f.setObstacle(std::move(ctx));
    return f;
  }

  FactorKind kind() const { return kind_; }
  bool isBinary() const { return kind_ == FactorKind::kGp || kind_ == FactorKind::kInterpolatedObstacle; }
  std::size_t first() const { return first_; }
  std::size_t second() const { return second_; }
  double dt() const { return dt_; }
  double tau() const { return tau_; }
  const State& mean() const { return mean_; }
  const Matrix& information() const { return information_; }

  Linearization linearize(const State& a) const {
    requireUnary();
    Linearization lin;
    if (kind_ == FactorKind::kObstacle) {
      const auto d_cfg = configDim(a);
      const ObstacleCost c = obstacleCostVector(obstacle_->robot, *obstacle_->sdf, a.head(d_cfg), obstacle_->eps);
      lin.residual = c.residual;
      lin.jac_first = Matrix::Zero(c.residual.size(), a.size());
      lin.jac_first.leftCols(d_cfg) = c.jacobian;
    } else {
      lin.residual = anchorFactorError(a, mean_);
      lin.jac_first = Matrix::Identity(a.size(), a.size());
    }
    return lin;
  }

  Linearization linearize(const State& a, const State& b) const {
    requireBinary();
    BinaryResidual r = kind_ == FactorKind::kGp
                           ? gpFactorError(a, b, dt_)
                           : interpObstacleCost(a, b, dt_, tau_, obstacle_->robot, *obstacle_->sdf,
                                                obstacle_->eps);
    return {std::move(r.residual), std::move(r.jac_first), std::move(r.jac_second)};
  }

  Vector residual(const State& a) const {
    requireUnary();
    if (kind_ == FactorKind::kObstacle) {
      return obstacleCostVector(obstacle_->robot, *obstacle_->sdf, a.head(configDim(a)), obstacle_->eps).residual;
    }
    return anchorFactorError(a, mean_);
  }

  Vector residual(const State& a, const State& b) const {
    requireBinary();
    if (kind_ == FactorKind::kGp) return phi_ * a - b;
    const InterpolatedState mid = interpolateState(a, b, dt_, tau_);
    return obstacleCostVector(obstacle_->robot, *obstacle_->sdf, mid.state.head(configDim(a)), obstacle_->eps)
        .residual;
  }

  double cost(const State& a) const { return weighted(residual(a)); }
  double cost(const State& a, const State& b) const { return weighted(residual(a, b)); }

  /// Cost at a trajectory, picking the states this factor touches.
  double cost(const Trajectory& traj) const {
    return isBinary() ? cost(traj.states.at(first_), traj.states.at(second_)) : cost(traj.states.at(first_));
  }

 private:
  Factor(FactorKind kind, std::size_t first, std::size_t second) : kind_(kind), first_(first), second_(second) {}

  static Factor meanFactor(FactorKind kind, std::size_t index, State mean, const Matrix& cov) {
    if (cov.rows() != mean.size() || cov.cols() != mean.size()) {
      throw std::invalid_argument(std::string(toString(kind)) + " factor: covariance dimension mismatch");
    }
    Factor f(kind, index, index);
    f.mean_ = std::move(mean);
    f.information_ = invertSpd(cov, toString(kind));
    return f;
  }

  static Matrix invertSpd(const Matrix& m, const std::string& what) {
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success) throw std::invalid_argument(what + " factor: covariance not SPD");
    Matrix inv = llt.solve(Matrix::Identity(m.rows(), m.cols()));
    return 0.5 * (inv + inv.transpose());
  }

  void setObstacle(std::shared_ptr<const ObstacleContext> ctx) {
    if (!ctx || !ctx->sdf) throw std::invalid_argument("obstacle factor: missing context");
    if (!(ctx->sigma_obs > 0.0)) throw std::invalid_argument("obstacle factor: sigma_obs must be > 0");
    const auto spheres = static_cast<Eigen::Index>(ctx->robot.spheres.size());
    information_ = Matrix::Identity(spheres, spheres) / (ctx->sigma_obs * ctx->sigma_obs);
    obstacle_ = std::move(ctx);
  }

  void requireUnary() const {
    if (isBinary()) throw std::logic_error("Factor: binary factor evaluated with one state");
  }
  void requireBinary() const {
    if (!isBinary()) throw std::logic_error("Factor: unary factor evaluated with two states");
  }

  double weighted(const Vector& r) const { return 0.5 * r.dot(information_ * r); }

  FactorKind kind_;
  std::size_t first_;
  std::size_t second_;
  Matrix information_;
  State mean_;
  double dt_ = 0.0;
  double tau_ = 0.0;
  Matrix phi_;
  std::shared_ptr<const ObstacleContext> obstacle_;
};

struct FactorGraph {
  std::size_t num_states = 0;
  std::vector<double> times;
  Eigen::Index state_dim = 0;
  std::vector<Factor> factors;

  std::size_t lastIndex() const { return num_states - 1; }

  std::size_t count(FactorKind kind) const {
    std::size_t n = 0;
    for (const auto& f : factors) n += f.kind() == kind ? 1 : 0;
    return n;
  }

  double objective(const Trajectory& traj) const {
    double total = 0.0;
    for (const auto& f : factors) total += f.cost(traj);
    return total;
  }

  void validate() const {
    if (num_states < 2) throw StructureError("FactorGraph: need at least two states");
    bool anchor_start = false, anchor_goal = false;
    std::vector<std::size_t> parent(num_states);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t v) {
      while (parent[v] != v) v = parent[v] = parent[parent[v]];
      return v;
    };
    for (const auto& f : factors) {
      if (f.first() >= num_states || f.second() >= num_states) {
        throw StructureError("FactorGraph: factor references a state outside [0, N]");
      }
      if (f.kind() == FactorKind::kAnchor) {
        anchor_start |= f.first() == 0;
        anchor_goal |= f.first() == lastIndex();
      }
      if (f.isBinary()) parent[find(f.first())] = find(f.second());
    }
    if (!anchor_start || !anchor_goal) throw StructureError("FactorGraph: anchors missing at start or goal");
    for (std::size_t i = 1; i < num_states; ++i) {
      if (find(i) != find(0)) throw StructureError("FactorGraph: graph is not connected");
    }
  }
};

struct AssembleOptions {
  std::size_t n_ip = 0;
  bool mid_prior = true;  // deviation-from-prior term at interior states
};

/// Builds anchors, interior priors, GP links, unary obstacle factors and
/// `n_ip` interpolated obstacle factors per interval.
inline FactorGraph assembleGraph(const GPPriorModel& prior, const Trajectory& traj,
                                 std::shared_ptr<const ObstacleContext> ctx, const AssembleOptions& opts) {
  prior.validate();
  traj.validate();
  if (traj.stateDim() != prior.stateDim()) throw std::invalid_argument("assembleGraph: state dimension mismatch");
  if (ctx && ctx->robot.configDim() != prior.configDim()) {
    throw std::invalid_argument("assembleGraph: robot configuration dimension mismatch");
  }
  const std::size_t last = traj.lastIndex();
  FactorGraph g;
  g.num_states = traj.size();
  g.times = traj.times;
  g.state_dim = traj.stateDim();

  g.factors.push_back(Factor::anchor(0, prior.start_mean, prior.anchor_cov));
  g.factors.push_back(Factor::anchor(last, prior.goal_mean, prior.anchor_cov));
  if (opts.mid_prior) {
    const Vector p0 = positionOf(prior.start_mean);
    const Vector p1 = positionOf(prior.goal_mean);
    const double span = traj.times.back() - traj.times.front();
    const Vector velocity = (p1 - p0) / span;
    for (std::size_t i = 1; i < last; ++i) {
      const double s = (traj.times[i] - traj.times.front()) / span;
      g.factors.push_back(Factor::prior(i, makeState(p0 + s * (p1 - p0), velocity), prior.mid_cov));
    }
  }
  for (std::size_t i = 0; i < last; ++i) g.factors.push_back(Factor::gp(i, i + 1, traj.dt(i), prior.qc));
  if (ctx) {
    for (std::size_t i = 0; i <= last; ++i) g.factors.push_back(Factor::obstacle(i, ctx));
    for (std::size_t i = 0; i < last; ++i) {
      const double dt = traj.dt(i);
      for (std::size_t j = 1; j <= opts.n_ip; ++j) {
        const double tau = dt * static_cast<double>(j) / static_cast<double>(opts.n_ip + 1);
        g.factors.push_back(Factor::interpolatedObstacle(i, i + 1, dt, tau, ctx));
      }
    }
  }
  g.validate();
  return g;
}

inline FactorGraph assembleGraph(const GPPriorModel& prior, const Trajectory& traj, const RobotModel& model,
                                 std::shared_ptr<const SignedDistanceField> sdf, std::size_t n_ip, double eps,
                                 double sigma_obs, bool mid_prior = true) {
  auto ctx = std::make_shared<const ObstacleContext>(ObstacleContext{model, std::move(sdf), eps, sigma_obs});
  return assembleGraph(prior, traj, std::move(ctx), AssembleOptions{n_ip, mid_prior});
}

/// Chain of self-potentials phi_i (all unary factors at i) and edge-potentials
/// psi_i (all binary factors on (i, i+1)). Holds factor indices into the
/// source graph.
class CompoundGraph {
 public:
  CompoundGraph(std::shared_ptr<const FactorGraph> graph, std::vector<std::vector<std::size_t>> self,
                std::vector<std::vector<std::size_t>> edge)
      : graph_(std::move(graph)), self_(std::move(self)), edge_(std::move(edge)) {}

  const FactorGraph& graph() const { return *graph_; }
  std::shared_ptr<const FactorGraph> graphPtr() const { return graph_; }
  std::size_t numStates() const { return self_.size(); }
  std::size_t numEdges() const { return edge_.size(); }
  const std::vector<std::size_t>& selfPotential(std::size_t i) const { return self_.at(i); }
  const std::vector<std::size_t>& edgePotential(std::size_t i) const { return edge_.at(i); }
  const Factor& factor(std::size_t k) const { return graph_->factors[k]; }

  double selfValue(std::size_t i, const State& x) const {
    double v = 0.0;
    for (auto k : self_.at(i)) v += graph_->factors[k].cost(x);
    return v;
  }

  double edgeValue(std::size_t i, const State& x_i, const State& x_j) const {
    double v = 0.0;
    for (auto k : edge_.at(i)) v += graph_->factors[k].cost(x_i, x_j);
    return v;
  }

  double objective(const Trajectory& traj) const {
    double total = 0.0;
    for (std::size_t i = 0; i < numStates(); ++i) total += selfValue(i, traj.states[i]);
    for (std::size_t i = 0; i < numEdges(); ++i) total += edgeValue(i, traj.states[i], traj.states[i + 1]);
    return total;
  }

 private:
  std::shared_ptr<const FactorGraph> graph_;
  std::vector<std::vector<std::size_t>> self_;
  std::vector<std::vector<std::size_t>> edge_;
};

inline CompoundGraph compoundTransform(std::shared_ptr<const FactorGraph> g) {
  if (!g || g->num_states < 1) throw StructureError("compoundTransform: empty graph");
  std::vector<std::vector<std::size_t>> self(g->num_states);
  std::vector<std::vector<std::size_t>> edge(g->num_states - 1);
  for (std::size_t k = 0; k < g->factors.size(); ++k) {
    const Factor& f = g->factors[k];
    if (f.first() >= g->num_states || f.second() >= g->num_states) {
      throw StructureError("compoundTransform: factor references a state outside [0, N]");
    }
    if (!f.isBinary()) {
      self[f.first()].push_back(k);
    } else if (f.second() == f.first() + 1) {
      edge[f.first()].push_back(k);
    } else {
      throw StructureError("compoundTransform: binary factor on (" + std::to_string(f.first()) + ", " +
                           std::to_string(f.second()) + ") does not join consecutive states");
    }
  }
  return CompoundGraph(std::move(g), std::move(self), std::move(edge));
}

inline CompoundGraph compoundTransform(FactorGraph g) {
  return compoundTransform(std::make_shared<const FactorGraph>(std::move(g)));
}

}  // namespace ms2mp
