#pragma once

// Damped Gauss-Newton for small local least-squares problems of the form
//   0.5 * sum_k r_k(x)^T W_k r_k(x) + m(x)
// where m is a fixed quadratic (e.g. a sum of incoming messages).

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cstddef>
#include <limits>
#include <vector>

#include "ms2mp/errors.hpp"
#include "ms2mp/quadratic.hpp"

namespace ms2mp {

struct LocalTerm {
  Vector residual;
  Matrix jacobian;  // d residual / d x
  const Matrix* weight;
};

struct GaussNewtonOptions {
  int max_inner = 20;
  double damping_init = 1e-4;
  double damping_max = 1e12;
  double gradient_tol = 1e-9;
};

struct GaussNewtonResult {
  Vector x;
  double objective = 0.0;
  int iterations = 0;  // accepted steps
  bool converged = false;
};

/// `terms(x)` returns the residual terms linearized at x. Additive damping
/// starts at zero; a rejected step raises it (damping_init, then x10), an
/// accepted step lowers it (/10, snapping back to zero below damping_init).
template <typename TermsFn>
GaussNewtonResult gaussNewtonLocal(TermsFn&& terms, const QuadraticMessage& quad, Vector x0,
                                   const GaussNewtonOptions& opts, std::size_t node) {
  auto termCost = [&](const Vector& x) {
    double v = 0.0;
    for (const LocalTerm& t : terms(x)) v += 0.5 * t.residual.dot(*t.weight * t.residual);
    return v;
  };

  // Objective changes are taken relative to the current point: the quadratic
  // part of m carries large absolute constants that would swamp the decrease.
  GaussNewtonResult res;
  res.x = std::move(x0);
  double lambda = 0.0;
  for (int it = 0; it < opts.max_inner; ++it) {
    Matrix h = quad.information;
    const Vector quad_grad = quad.gradient(res.x);
    Vector g = quad_grad;
    double term_cost = 0.0;
    for (const LocalTerm& t : terms(res.x)) {
      const Matrix jw = t.jacobian.transpose() * *t.weight;
      h.noalias() += jw * t.jacobian;
      g.noalias() += jw * t.residual;
      term_cost += 0.5 * t.residual.dot(*t.weight * t.residual);
    }
    if (g.norm() <= opts.gradient_tol) {
      res.converged = true;
      break;
    }

    bool accepted = false;
    bool stalled = false;
    while (true) {
      Matrix damped = h;
      damped.diagonal().array() += lambda;
      Eigen::LLT<Matrix> llt(damped);
      if (llt.info() == Eigen::Success) {
        const Vector step = -llt.solve(g);
        if (step.cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + res.x.cwiseAbs().maxCoeff())) {
          stalled = true;
          break;
        }
        const Vector candidate = res.x + step;
        const double change = termCost(candidate) - term_cost + quad_grad.dot(step) +
                              0.5 * step.dot(quad.information * step);
        if (change <= 0.0) {
          res.x = candidate;
          ++res.iterations;
          lambda = lambda / 10.0 < opts.damping_init ? 0.0 : lambda / 10.0;
          accepted = true;
          break;
        }
      } else if (lambda >= opts.damping_max) {
        throw NumericalError("gaussNewtonLocal: normal matrix singular after damping escalation", node);
      }
      lambda = lambda == 0.0 ? opts.damping_init : lambda * 10.0;
      if (lambda > opts.damping_max) break;
    }
    if (stalled || !accepted) {
      // Step below round-off, or no damped step decreases the objective.
      res.converged = true;
      break;
    }
  }
  res.objective = quad.evaluate(res.x) + termCost(res.x);
  return res;
}

}  // namespace ms2mp
