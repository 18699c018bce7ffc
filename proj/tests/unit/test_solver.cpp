#include <gtest/gtest.h>

#include <Eigen/LU>
#include <random>

#include "nird/error.hpp"
#include "nird/solver.hpp"

using namespace nird;

namespace {

SparseMatrix from_dense(const Eigen::MatrixXd& d) { return d.sparseView(); }

}  // namespace

TEST(SolveSpd, Identity) {
  const Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(7, -2.0, 3.0);
  SparseMatrix I(7, 7);
  I.setIdentity();
  EXPECT_LE((solve_spd(I, b) - b).norm(), 1e-14);
}

TEST(SolveSpd, Tridiagonal) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(5, 5);
  for (int i = 0; i < 5; ++i) {
    d(i, i) = 2.0;
    if (i > 0) d(i, i - 1) = d(i - 1, i) = -1.0;
  }
  const Eigen::VectorXd b = Eigen::VectorXd::Ones(5);
  // Dense LU oracle, then the frozen values.
  const Eigen::VectorXd oracle = d.lu().solve(b);
  const Eigen::VectorXd expected = (Eigen::VectorXd(5) << 2.5, 4.0, 4.5, 4.0, 2.5).finished();
  EXPECT_LE((oracle - expected).norm(), 1e-13);
  for (SolverKind kind : {SolverKind::Direct, SolverKind::ConjugateGradient}) {
    SolverOptions opt;
    opt.kind = kind;
    EXPECT_LE((solve_spd(from_dense(d), b, opt) - expected).norm(), 1e-9);
  }
}

TEST(SolveSpd, RandomSpdMeetsResidualContract) {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> g;
  Eigen::MatrixXd B(50, 50);
  for (Eigen::Index i = 0; i < B.size(); ++i) B.data()[i] = g(rng);
  const Eigen::MatrixXd A = B * B.transpose() + Eigen::MatrixXd::Identity(50, 50);
  Eigen::VectorXd b(50);
  for (Eigen::Index i = 0; i < 50; ++i) b[i] = g(rng);
  for (SolverKind kind : {SolverKind::Direct, SolverKind::ConjugateGradient}) {
    SolverOptions opt;
    opt.kind = kind;
    SolveReport rep;
    const Eigen::VectorXd x = solve_spd(from_dense(A), b, opt, nullptr, &rep);
    EXPECT_LE((A * x - b).norm() / b.norm(), 1e-10);
    EXPECT_LE(rep.residual, 1e-10);
    EXPECT_EQ(rep.used, kind);
  }
}

TEST(SolveSpd, RejectsAsymmetricInput) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Identity(3, 3);
  d(0, 1) = 0.5;
  EXPECT_THROW(solve_spd(from_dense(d), Eigen::VectorXd::Ones(3)), NirdError);
}

TEST(SolveSpd, ReportsNonConvergence) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(40, 40);
  for (int i = 0; i < 40; ++i) {
    d(i, i) = 2.0;
    if (i > 0) d(i, i - 1) = d(i - 1, i) = -1.0;
  }
  SolverOptions opt;
  opt.kind = SolverKind::ConjugateGradient;
  opt.max_iter = 2;
  try {
    solve_spd(from_dense(d), Eigen::VectorXd::Ones(40), opt);
    FAIL() << "expected a solver error";
  } catch (const NirdError& e) {
    EXPECT_EQ(e.stage(), "solver");
  }
}

TEST(SolveSpd, Deterministic) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Identity(10, 10) * 3.0;
  d(2, 3) = d(3, 2) = 1.0;
  const Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(10, 0.0, 1.0);
  const Eigen::VectorXd x1 = solve_spd(from_dense(d), b);
  const Eigen::VectorXd x2 = solve_spd(from_dense(d), b);
  EXPECT_EQ((x1 - x2).cwiseAbs().maxCoeff(), 0.0);
}
