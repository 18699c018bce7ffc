#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace nird {

using SparseMatrix = Eigen::SparseMatrix<double>;

enum class SolverKind { Auto, Direct, ConjugateGradient };

struct SolverOptions {
  SolverKind kind = SolverKind::Auto;
  /// Required relative residual ||Ax - b|| / ||b||.
  double tol = 1e-10;
  /// Iteration cap for conjugate gradients; 0 selects 10 * n.
  int max_iter = 0;
  /// Auto switches from factorization to conjugate gradients above this size.
  Eigen::Index direct_limit = 200000;
};

struct SolveReport {
  SolverKind used = SolverKind::Direct;
  int iterations = 0;
  double residual = 0.0;
};

/// Solves A x = b for symmetric positive definite A.  Throws NirdError
/// (stage "solver") for asymmetric or non-positive-diagonal input and when
/// the residual contract cannot be met.  `guess` warm-starts the iterative
/// path and is ignored by the factorization.
Eigen::VectorXd solve_spd(const SparseMatrix& A, const Eigen::VectorXd& b,
                          const SolverOptions& options = {},
                          const Eigen::VectorXd* guess = nullptr, SolveReport* report = nullptr);

}  // namespace nird
