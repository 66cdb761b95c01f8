#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <stdexcept>

#include "ms2mp/errors.hpp"
#include "ms2mp/factors.hpp"
#include "ms2mp/gp_prior.hpp"

namespace ms2mp {

/// m(x) = 0.5 x^T L x - eta^T x + c in absolute coordinates.
struct QuadraticMessage {
  Matrix information;
  Vector vector;
  double constant = 0.0;

  static QuadraticMessage zero(Eigen::Index dim) {
    return {Matrix::Zero(dim, dim), Vector::Zero(dim), 0.0};
  }

  Eigen::Index dim() const { return vector.size(); }

  double evaluate(const Vector& x) const { return 0.5 * x.dot(information * x) - vector.dot(x) + constant; }
  Vector gradient(const Vector& x) const { return information * x - vector; }

  QuadraticMessage& operator+=(const QuadraticMessage& o) {
    information += o.information;
    vector += o.vector;
    constant += o.constant;
    return *this;
  }

  friend QuadraticMessage operator+(QuadraticMessage a, const QuadraticMessage& b) { return a += b; }

  /// Symmetric and PSD up to round-off relative to the matrix scale.
  bool isValid() const {
    if (!information.allFinite() || !vector.allFinite() || !std::isfinite(constant)) return false;
    const double scale = std::max(1.0, information.cwiseAbs().maxCoeff());
    if (!information.isApprox(information.transpose(), 1e-12) &&
        (information - information.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
      return false;
    }
    if (dim() == 0) return true;
    Eigen::SelfAdjointEigenSolver<Matrix> es(information, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff() >= -1e-10 * scale;
  }
};

/// Gauss-Newton quadratic of a unary factor linearized at `at`.
inline QuadraticMessage unaryQuadratic(const Linearization& lin, const Matrix& weight, const State& at) {
  const Matrix jw = lin.jac_first.transpose() * weight;
  const Vector offset = lin.residual - lin.jac_first * at;  // r(x) ~ offset + J x
  QuadraticMessage q;
  q.information = jw * lin.jac_first;
  q.vector = -jw * offset;
  q.constant = 0.5 * offset.dot(weight * offset);
  return q;
}

/// Gauss-Newton quadratic of a binary factor over the stacked variable [a; b].
inline QuadraticMessage jointQuadratic(const Linearization& lin, const Matrix& weight, const State& a,
                                       const State& b) {
  const auto n = a.size();
  Matrix jac(lin.residual.size(), 2 * n);
  jac << lin.jac_first, lin.jac_second;
  Vector at(2 * n);
  at << a, b;
  const Matrix jw = jac.transpose() * weight;
  const Vector offset = lin.residual - jac * at;
  QuadraticMessage q;
  q.information = jw * jac;
  q.vector = -jw * offset;
  q.constant = 0.5 * offset.dot(weight * offset);
  return q;
}

/// 0.5 * weight * |x - center|^2, the proximal term used for outer step control.
inline QuadraticMessage proximalQuadratic(const Vector& center, double weight) {
  const auto n = center.size();
  return {weight * Matrix::Identity(n, n), weight * center, 0.5 * weight * center.squaredNorm()};
}

enum class Keep { kFirst, kSecond };

/// Minimize a joint quadratic over one half of [a; b] by Schur complement.
inline QuadraticMessage marginalize(const QuadraticMessage& joint, Keep keep, std::size_t node) {
  const auto n = joint.dim() / 2;
  const Eigen::Index kept = keep == Keep::kFirst ? 0 : n;
  const Eigen::Index gone = keep == Keep::kFirst ? n : 0;
  const Matrix l_gg = joint.information.block(gone, gone, n, n);
  const Matrix l_gk = joint.information.block(gone, kept, n, n);
  const Matrix l_kk = joint.information.block(kept, kept, n, n);
  Eigen::LLT<Matrix> llt(l_gg);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("marginalize: eliminated block is not positive definite", node);
  }
  const Vector eta_g = joint.vector.segment(gone, n);
  const Vector solved_eta = llt.solve(eta_g);
  const Matrix solved_l = llt.solve(l_gk);
  QuadraticMessage out;
  out.information = l_kk - l_gk.transpose() * solved_l;
  out.information = 0.5 * (out.information + out.information.transpose());
  out.vector = joint.vector.segment(kept, n) - l_gk.transpose() * solved_eta;
  out.constant = joint.constant - 0.5 * eta_g.dot(solved_eta);
  return out;
}

/// Restrict a joint quadratic to one half with the other half held at `fixed`.
inline QuadraticMessage condition(const QuadraticMessage& joint, Keep keep, const Vector& fixed) {
  const auto n = joint.dim() / 2;
  const Eigen::Index kept = keep == Keep::kFirst ? 0 : n;
  const Eigen::Index gone = keep == Keep::kFirst ? n : 0;
  const Matrix l_gg = joint.information.block(gone, gone, n, n);
  QuadraticMessage out;
  out.information = joint.information.block(kept, kept, n, n);
  out.vector = joint.vector.segment(kept, n) - joint.information.block(kept, gone, n, n) * fixed;
  out.constant = joint.constant + 0.5 * fixed.dot(l_gg * fixed) - joint.vector.segment(gone, n).dot(fixed);
  return out;
}

/// Embed a single-variable quadratic into the first or second half of a joint one.
inline QuadraticMessage& addToJoint(QuadraticMessage& joint, const QuadraticMessage& part, Keep slot) {
  const auto n = part.dim();
  const Eigen::Index off = slot == Keep::kFirst ? 0 : n;
  joint.information.block(off, off, n, n) += part.information;
  joint.vector.segment(off, n) += part.vector;
  joint.constant += part.constant;
  return joint;
}

}  // namespace ms2mp
