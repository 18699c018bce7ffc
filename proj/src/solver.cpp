#include "nird/solver.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <cmath>
#include <string>

#include "nird/error.hpp"

namespace nird {

namespace {

void check_input(const SparseMatrix& A, const Eigen::VectorXd& b) {
  if (A.rows() != A.cols() || A.rows() != b.size()) {
    throw NirdError("solver", "dimension mismatch");
  }
  const SparseMatrix diff = SparseMatrix(A.transpose()) - A;
  double scale = 0.0;
  for (int k = 0; k < A.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(A, k); it; ++it) scale = std::max(scale, std::abs(it.value()));
  }
  double asym = 0.0;
  for (int k = 0; k < diff.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(diff, k); it; ++it) asym = std::max(asym, std::abs(it.value()));
  }
  if (asym > 1e-12 * scale) {
    throw NirdError("solver", "matrix is not symmetric (relative asymmetry " +
                                  std::to_string(asym / scale) + ")");
  }
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    if (!(A.coeff(i, i) > 0.0)) throw NirdError("solver", "non-positive diagonal entry");
  }
}

double relative_residual(const SparseMatrix& A, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& b) {
  return (A * x - b).norm() / b.norm();
}

}  // namespace

Eigen::VectorXd solve_spd(const SparseMatrix& A, const Eigen::VectorXd& b,
                          const SolverOptions& options, const Eigen::VectorXd* guess,
                          SolveReport* report) {
  check_input(A, b);
  SolveReport local;
  SolveReport& rep = report ? *report : local;
  rep = {};
  if (b.norm() == 0.0) return Eigen::VectorXd::Zero(b.size());

  const bool direct = options.kind == SolverKind::Direct ||
                      (options.kind == SolverKind::Auto && A.rows() <= options.direct_limit);
  Eigen::VectorXd x;
  if (direct) {
    rep.used = SolverKind::Direct;
    Eigen::SimplicialLDLT<SparseMatrix> ldlt(A);
    if (ldlt.info() != Eigen::Success) throw NirdError("solver", "factorization failed");
    x = ldlt.solve(b);
    rep.residual = relative_residual(A, x, b);
    // A few steps of iterative refinement recover accuracy lost to pivot growth.
    for (int step = 0; step < 3 && rep.residual > options.tol; ++step) {
      x += ldlt.solve(b - A * x);
      rep.residual = relative_residual(A, x, b);
      ++rep.iterations;
    }
  } else {
    rep.used = SolverKind::ConjugateGradient;
    Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper,
                             Eigen::DiagonalPreconditioner<double>>
        cg(A);
    cg.setTolerance(options.tol);
    cg.setMaxIterations(options.max_iter > 0 ? options.max_iter : static_cast<int>(10 * A.rows()));
    if (guess && guess->size() == b.size()) {
      x = cg.solveWithGuess(b, *guess);
    } else {
      x = cg.solve(b);
    }
    rep.iterations = static_cast<int>(cg.iterations());
    rep.residual = relative_residual(A, x, b);
  }
  if (!(rep.residual <= options.tol)) {
    throw NirdError("solver", "residual " + std::to_string(rep.residual) +
                                  " above tolerance after " + std::to_string(rep.iterations) +
                                  " iterations");
  }
  return x;
}

}  // namespace nird
