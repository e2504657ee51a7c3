#pragma once

/// @file linsolve.hpp
/// @brief Sparse linear solves: direct LU for moderate systems, ILU-preconditioned
///        BiCGSTAB for large ones, with a residual check either way.

#include <Eigen/Sparse>
#include <string>

namespace ifhom {

class SparseSolver {
 public:
  /// Factor the matrix; switches to the iterative backend above `direct_limit`
  /// unknowns.  Throws std::runtime_error if factorization fails.
  explicit SparseSolver(const Eigen::SparseMatrix<double>& A,
                        std::int64_t direct_limit = 300000);

  /// Solve A x = b and verify the relative residual (<= tol * max(1, |b|)).
  Eigen::VectorXd solve(const Eigen::VectorXd& b, double tol = 1e-10) const;

  const std::string& method() const { return method_; }
  double last_residual() const { return last_residual_; }

 private:
  Eigen::SparseMatrix<double> A_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
  Eigen::BiCGSTAB<Eigen::SparseMatrix<double>, Eigen::IncompleteLUT<double>> bicg_;
  bool direct_ = true;
  std::string method_;
  mutable double last_residual_ = 0;
};

}  // namespace ifhom
