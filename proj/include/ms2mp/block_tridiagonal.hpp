#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cstddef>
#include <vector>

#include "ms2mp/errors.hpp"

namespace ms2mp {

/// Symmetric block-tridiagonal matrix: diag[i] = (i, i), upper[i] = (i, i+1).
struct BlockTridiagonal {
  std::vector<Eigen::MatrixXd> diag;
  std::vector<Eigen::MatrixXd> upper;

  static BlockTridiagonal zero(std::size_t blocks, Eigen::Index dim) {
    BlockTridiagonal m;
    m.diag.assign(blocks, Eigen::MatrixXd::Zero(dim, dim));
    m.upper.assign(blocks > 0 ? blocks - 1 : 0, Eigen::MatrixXd::Zero(dim, dim));
    return m;
  }

  std::size_t blocks() const { return diag.size(); }

  void addDiagonal(double lambda) {
    for (auto& d : diag) d.diagonal().array() += lambda;
  }

  /// Block Cholesky elimination down the chain. Throws NumericalError with the
  /// block index when a Schur complement loses positive definiteness.
  std::vector<Eigen::VectorXd> solve(const std::vector<Eigen::VectorXd>& rhs) const {
    const std::size_t n = blocks();
    std::vector<Eigen::LLT<Eigen::MatrixXd>> schur(n);
    std::vector<Eigen::VectorXd> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      Eigen::MatrixXd s = diag[i];
      y[i] = rhs[i];
      if (i > 0) {
        const Eigen::MatrixXd coupling = schur[i - 1].solve(upper[i - 1]);
        s.noalias() -= upper[i - 1].transpose() * coupling;
        y[i].noalias() -= coupling.transpose() * y[i - 1];
      }
      schur[i].compute(0.5 * (s + s.transpose()));
      if (schur[i].info() != Eigen::Success) {
        throw NumericalError("BlockTridiagonal: matrix not positive definite", i);
      }
    }
    std::vector<Eigen::VectorXd> x(n);
    for (std::size_t k = n; k-- > 0;) {
      Eigen::VectorXd r = y[k];
      if (k + 1 < n) r.noalias() -= upper[k] * x[k + 1];
      x[k] = schur[k].solve(r);
    }
    return x;
  }

  Eigen::MatrixXd toDense() const {
    const std::size_t n = blocks();
    const auto d = n > 0 ? diag[0].rows() : 0;
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n) * d, static_cast<Eigen::Index>(n) * d);
    for (std::size_t i = 0; i < n; ++i) {
      const auto o = static_cast<Eigen::Index>(i) * d;
      m.block(o, o, d, d) = diag[i];
      if (i + 1 < n) {
        m.block(o, o + d, d, d) = upper[i];
        m.block(o + d, o, d, d) = upper[i].transpose();
      }
    }
    return m;
  }
};

}  // namespace ms2mp
