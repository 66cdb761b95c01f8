#pragma once

// Constant-velocity (white-noise-on-acceleration) Gaussian-process trajectory
// prior. A state stacks configuration position and velocity: x = [q; dq].

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace ms2mp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Full state [position; velocity], length 2 * config dimension.
using State = Eigen::VectorXd;

inline State makeState(const Vector& position, const Vector& velocity) {
  if (position.size() != velocity.size()) {
    throw std::invalid_argument("makeState: position and velocity lengths differ");
  }
  State x(position.size() * 2);
  x << position, velocity;
  return x;
}

inline Eigen::Index configDim(const State& x) { return x.size() / 2; }
inline Vector positionOf(const State& x) { return x.head(configDim(x)); }
inline Vector velocityOf(const State& x) { return x.tail(configDim(x)); }

struct Trajectory {
  std::vector<State> states;
  std::vector<double> times;

  std::size_t size() const { return states.size(); }
  /// Index of the last support state.
  std::size_t lastIndex() const { return states.size() - 1; }
  Eigen::Index stateDim() const { return states.empty() ? 0 : states.front().size(); }
  double dt(std::size_t i) const { return times[i + 1] - times[i]; }

  void validate() const {
    if (states.size() < 2 || states.size() != times.size()) {
      throw std::invalid_argument("Trajectory: need >= 2 states with one time each");
    }
    const auto dim = states.front().size();
    if (dim == 0 || dim % 2 != 0) {
      throw std::invalid_argument("Trajectory: state dimension must be even and positive");
    }
    for (std::size_t i = 0; i < states.size(); ++i) {
      if (states[i].size() != dim || !states[i].allFinite()) {
        throw std::invalid_argument("Trajectory: state " + std::to_string(i) + " malformed");
      }
      if (i > 0 && !(times[i] > times[i - 1])) {
        throw std::invalid_argument("Trajectory: times must be strictly increasing");
      }
    }
  }
};

namespace detail {

inline bool isSymmetricPositiveDefinite(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0 || !m.allFinite()) return false;
  if (!m.isApprox(m.transpose(), 1e-12)) return false;
  Eigen::LLT<Matrix> llt(m);
  return llt.info() == Eigen::Success;
}

// Q(dt) without the dt > 0 guard; Q(0) = 0 is needed by interpolation.
inline Matrix processNoiseUnchecked(double dt, const Matrix& qc) {
  const auto n = qc.rows();
  Matrix q(2 * n, 2 * n);
  q.topLeftCorner(n, n) = dt * dt * dt / 3.0 * qc;
  q.topRightCorner(n, n) = dt * dt / 2.0 * qc;
  q.bottomLeftCorner(n, n) = dt * dt / 2.0 * qc;
  q.bottomRightCorner(n, n) = dt * qc;
  return q;
}

inline Eigen::Matrix2d scalarTransition(double dt) {
  Eigen::Matrix2d phi;
  phi << 1.0, dt, 0.0, 1.0;
  return phi;
}

inline Eigen::Matrix2d scalarNoise(double dt) {
  Eigen::Matrix2d q;
  q << dt * dt * dt / 3.0, dt * dt / 2.0, dt * dt / 2.0, dt;
  return q;
}

inline Eigen::Matrix2d scalarNoiseInverse(double dt) {
  Eigen::Matrix2d q;
  q << 12.0 / (dt * dt * dt), -6.0 / (dt * dt), -6.0 / (dt * dt), 4.0 / dt;
  return q;
}

// Expand a 2x2 (position/velocity) block pattern to d_cfg-sized blocks.
inline Matrix kronIdentity(const Eigen::Matrix2d& m, Eigen::Index d_cfg) {
  Matrix out = Matrix::Zero(2 * d_cfg, 2 * d_cfg);
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 2; ++c) {
      out.block(r * d_cfg, c * d_cfg, d_cfg, d_cfg).diagonal().setConstant(m(r, c));
    }
  }
  return out;
}

}  // namespace detail

/// Phi(dt) = [[I, dt I], [0, I]].
inline Matrix transitionMatrix(double dt, Eigen::Index d_cfg) {
  if (!(dt >= 0.0)) throw std::invalid_argument("transitionMatrix: dt must be >= 0");
  if (d_cfg <= 0) throw std::invalid_argument("transitionMatrix: d_cfg must be positive");
  return detail::kronIdentity(detail::scalarTransition(dt), d_cfg);
}

/// Process noise covariance accumulated over dt for power spectral density qc.
inline Matrix processNoiseCov(double dt, const Matrix& qc) {
  if (!(dt > 0.0)) throw std::invalid_argument("processNoiseCov: dt must be > 0");
  if (!detail::isSymmetricPositiveDefinite(qc)) {
    throw std::invalid_argument("processNoiseCov: qc must be symmetric positive definite");
  }
  return detail::processNoiseUnchecked(dt, qc);
}

/// Prior parameters. Covariances are full-state (D x D) except qc (d_cfg x d_cfg).
struct GPPriorModel {
  Matrix qc;
  State start_mean;
  State goal_mean;
  Matrix anchor_cov;
  Matrix mid_cov;

  Eigen::Index configDim() const { return qc.rows(); }
  Eigen::Index stateDim() const { return 2 * qc.rows(); }

  /// anchor_cov = anchor_sigma2 * I; mid_cov = mid_scale * max|qc_kk| * I.
  static GPPriorModel make(const Matrix& qc, const State& start, const State& goal,
                           double anchor_sigma2 = 1e-8, double mid_scale = 1.0) {
    GPPriorModel m;
    m.qc = qc;
    m.start_mean = start;
    m.goal_mean = goal;
    const auto dim = 2 * qc.rows();
    m.anchor_cov = anchor_sigma2 * Matrix::Identity(dim, dim);
    m.mid_cov = mid_scale * qc.diagonal().cwiseAbs().maxCoeff() * Matrix::Identity(dim, dim);
    m.validate();
    return m;
  }

  void validate() const {
    using detail::isSymmetricPositiveDefinite;
    if (!isSymmetricPositiveDefinite(qc)) throw std::invalid_argument("GPPriorModel: qc not SPD");
    if (!isSymmetricPositiveDefinite(anchor_cov)) {
      throw std::invalid_argument("GPPriorModel: anchor_cov not SPD");
    }
    if (!isSymmetricPositiveDefinite(mid_cov)) {
      throw std::invalid_argument("GPPriorModel: mid_cov not SPD");
    }
    const auto dim = stateDim();
    if (start_mean.size() != dim || goal_mean.size() != dim || anchor_cov.rows() != dim ||
        mid_cov.rows() != dim) {
      throw std::invalid_argument("GPPriorModel: dimension mismatch");
    }
  }
};

inline std::vector<double> uniformTimes(std::size_t n, double total_time) {
  std::vector<double> t(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    t[i] = total_time * static_cast<double>(i) / static_cast<double>(n);
  }
  return t;
}

/// Constant-velocity straight line from start to goal with n intervals.
inline Trajectory priorMeanTrajectory(const State& start, const State& goal, std::size_t n,
                                      double total_time) {
  if (n < 1) throw std::invalid_argument("priorMeanTrajectory: n must be >= 1");
  if (!(total_time > 0.0)) throw std::invalid_argument("priorMeanTrajectory: total_time must be > 0");
  if (start.size() != goal.size() || start.size() % 2 != 0) {
    throw std::invalid_argument("priorMeanTrajectory: dimension mismatch");
  }
  const Vector p0 = positionOf(start);
  const Vector p1 = positionOf(goal);
  const Vector velocity = (p1 - p0) / total_time;
  Trajectory traj;
  traj.times = uniformTimes(n, total_time);
  traj.states.reserve(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    const double s = static_cast<double>(i) / static_cast<double>(n);
    traj.states.push_back(makeState(p0 + s * (p1 - p0), velocity));
  }
  return traj;
}

/// Binary residual with its two Jacobians.
struct BinaryResidual {
  Vector residual;
  Matrix jac_first;
  Matrix jac_second;
};

/// r = Phi(dt) x_i - x_j (zero-mean increments).
inline BinaryResidual gpFactorError(const State& x_i, const State& x_j, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("gpFactorError: dt must be > 0");
  if (x_i.size() != x_j.size() || x_i.size() % 2 != 0) {
    throw std::invalid_argument("gpFactorError: dimension mismatch");
  }
  BinaryResidual out;
  out.jac_first = transitionMatrix(dt, configDim(x_i));
  out.jac_second = -Matrix::Identity(x_i.size(), x_i.size());
  out.residual = out.jac_first * x_i - x_j;
  return out;
}

/// r = x - mean (Jacobian is the identity).
inline Vector anchorFactorError(const State& x, const State& mean) {
  if (x.size() != mean.size()) throw std::invalid_argument("anchorFactorError: dimension mismatch");
  return x - mean;
}

/// 0.5 * r^T cov^{-1} r.
inline double mahalanobisCost(const Vector& residual, const Matrix& cov) {
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("mahalanobisCost: cov not SPD");
  return 0.5 * residual.dot(llt.solve(residual));
}

/// Lambda(tau), Psi(tau) with x(tau) = Lambda x_i + Psi x_j. Independent of qc.
struct InterpolationWeights {
  Matrix lambda;
  Matrix psi;
};

inline InterpolationWeights interpolationWeights(double dt, double tau, Eigen::Index d_cfg) {
  if (!(dt > 0.0)) throw std::invalid_argument("interpolationWeights: dt must be > 0");
  if (!(tau >= 0.0 && tau <= dt)) {
    throw std::invalid_argument("interpolationWeights: tau must lie in [0, dt]");
  }
  using namespace detail;
  const Eigen::Matrix2d psi =
      scalarNoise(tau) * scalarTransition(dt - tau).transpose() * scalarNoiseInverse(dt);
  const Eigen::Matrix2d lambda = scalarTransition(tau) - psi * scalarTransition(dt);
  return {kronIdentity(lambda, d_cfg), kronIdentity(psi, d_cfg)};
}

struct InterpolatedState {
  State state;
  Matrix jac_first;   // Lambda
  Matrix jac_second;  // Psi
};

inline InterpolatedState interpolateState(const State& x_i, const State& x_j, double dt,
                                          double tau) {
  if (x_i.size() != x_j.size() || x_i.size() % 2 != 0) {
    throw std::invalid_argument("interpolateState: dimension mismatch");
  }
  auto w = interpolationWeights(dt, tau, configDim(x_i));
  InterpolatedState out;
  out.state = w.lambda * x_i + w.psi * x_j;
  out.jac_first = std::move(w.lambda);
  out.jac_second = std::move(w.psi);
  return out;
}

/// Densify a trajectory by inserting `factor - 1` GP-interpolated states per interval.
inline Trajectory upsampleTrajectory(const Trajectory& traj, std::size_t factor) {
  if (factor < 1) throw std::invalid_argument("upsampleTrajectory: factor must be >= 1");
  traj.validate();
  Trajectory out;
  for (std::size_t i = 0; i + 1 < traj.size(); ++i) {
    const double dt = traj.dt(i);
    for (std::size_t k = 0; k < factor; ++k) {
      const double tau = dt * static_cast<double>(k) / static_cast<double>(factor);
      out.states.push_back(k == 0 ? traj.states[i]
                                  : interpolateState(traj.states[i], traj.states[i + 1], dt, tau).state);
      out.times.push_back(traj.times[i] + tau);
    }
  }
  out.states.push_back(traj.states.back());
  out.times.push_back(traj.times.back());
  return out;
}

}  // namespace ms2mp
