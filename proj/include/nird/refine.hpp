#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "nird/fosls.hpp"

namespace nird {

/// Accuracy-per-cost marking model.  Candidate fractions are k / grid_steps
/// for k = 1..grid_steps; refining the top ceil(k N / grid_steps) leaves is
/// assumed to scale their squared error by 2^(-2 r_c) at work N (1 + 3 r).
struct AceModel {
  double r_c = 1.0;
  int grid_steps = 20;
};

/// Leaves (ids into `errors`) selected by the ACE rule; empty when every
/// error is zero.  Ties in the objective resolve to the smaller fraction and
/// ties in the error ordering to the smaller leaf id.
std::vector<int> ace_select(std::span<const double> errors, const AceModel& model);

/// log(gamma(r)) / W(r) for the top `count` of `sorted_desc` squared errors.
double ace_objective(std::span<const double> sorted_desc_squared, std::size_t count,
                     double r, double r_c);

enum class Functional { Naive, Kernel };

struct NiOptions {
  int degree = 1;
  std::size_t budget = 2000;
  Functional functional = Functional::Naive;
  /// Mark every leaf when ACE selects nothing (all errors zero).
  bool uniform_when_flat = false;
  /// Refine uniformly instead of by ACE.
  bool uniform = false;
  /// Reduction exponent for ACE; 0 selects the polynomial degree.
  double ace_rate = 0.0;
  SolverOptions solver{};
};

/// Solve and error indicators on one mesh.
struct LevelSolve {
  std::shared_ptr<const LagrangeSpace> space;
  RhsSamples samples;
  DiscreteField field;
  std::optional<KernelComponent> kernel;
  Eigen::VectorXd errors_squared;           // naive, per leaf
  Eigen::VectorXd modified_errors_squared;  // kernel-corrected (equals naive in naive mode)
  double lsf = 0.0;
  double modified_lsf = 0.0;

  /// Per-leaf indicator that drives marking under `mode`.
  Eigen::VectorXd indicators(Functional mode) const;
};

LevelSolve solve_level(const ProblemSpec& problem, const RhsFunction& rhs,
                       std::shared_ptr<const MeshForest> mesh, const NiOptions& options,
                       const DiscreteField* guess = nullptr);

struct NiLevel {
  std::size_t leaves = 0;
  double lsf = 0.0;
  double modified_lsf = 0.0;
};

struct NiResult {
  LevelSolve final;
  std::vector<NiLevel> history;
};

/// Marks leaves for the next mesh under `options` from `level`; empty means stop.
std::vector<int> mark_next(const LevelSolve& level, const NiOptions& options);

/// Nested iteration with ACE refinement from `start` until one more
/// refinement would exceed the leaf budget.  Solver failures are rethrown
/// with the level index in the stage tag.
NiResult ni_solve(const ProblemSpec& problem, const RhsFunction& rhs, const MeshForest& start,
                  const NiOptions& options);

}  // namespace nird
