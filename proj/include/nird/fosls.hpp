#pragma once

#include <algorithm>
#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nird/fe.hpp"
#include "nird/solver.hpp"

namespace nird {

enum class BoundaryType { Dirichlet, Neumann };

/// Value of the four first-order rows (two flux rows, divergence, curl).
using Vec4 = std::array<double, 4>;
using RhsFunction = std::function<Vec4(Point)>;

/// -div(A grad p) + b . grad p = f on the unit square with A = alpha diag(1, eps).
///
/// Dirichlet sides carry p = 0; Neumann sides carry n . A grad p = 0.
struct ProblemSpec {
  std::string name;
  std::function<double(Point)> alpha = [](Point) { return 1.0; };
  double epsilon = 1.0;
  Point b{};
  std::array<BoundaryType, 4> sides{BoundaryType::Dirichlet, BoundaryType::Dirichlet,
                                    BoundaryType::Dirichlet, BoundaryType::Dirichlet};
  std::function<double(Point)> f;
  std::function<double(Point)> exact_p;  // empty when unknown
  int extra_quadrature = 0;

  /// Throws std::invalid_argument on alpha <= 0 at probe points, eps <= 0 or a missing f.
  void validate() const;
  Vec4 rhs(Point x) const { return {0.0, 0.0, f(x), 0.0}; }
  RhsFunction rhs_function() const;
  int quadrature_degree(int q) const { return std::max(2 * q, 4) + extra_quadrature; }
  bool dirichlet(int side) const { return sides[side] == BoundaryType::Dirichlet; }
};

/// Right-hand side values at the quadrature points of every leaf
/// (index leaf * rule size + point).
struct RhsSamples {
  const MeshForest* mesh = nullptr;
  int quad_degree = 0;
  std::vector<Vec4> values;

  std::size_t points_per_leaf() const { return triangle_rule(quad_degree).size(); }
};

RhsSamples sample_rhs(const MeshForest& mesh, int quad_degree, const RhsFunction& f);

/// Normal equations restricted to the free (non-eliminated) coefficients.
struct FoslsSystem {
  SparseMatrix matrix;
  Eigen::VectorXd load;
  std::vector<int> free_dofs;  // full index of each reduced unknown
  std::size_t full_size = 0;

  Eigen::VectorXd expand(const Eigen::VectorXd& reduced) const;
  Eigen::VectorXd restrict_to_free(const Eigen::VectorXd& full) const;
};

/// Full coefficient indices fixed to zero: p on Dirichlet sides and the
/// normal flux component on Neumann sides.
std::vector<bool> constrained_dofs(const ProblemSpec& problem, const LagrangeSpace& space);

FoslsSystem assemble(const ProblemSpec& problem, const LagrangeSpace& space,
                     const RhsSamples& rhs);

/// Discrete minimizer of ||L v - F|| over the constrained space.
DiscreteField solve_fosls(const ProblemSpec& problem, std::shared_ptr<const LagrangeSpace> space,
                          const RhsSamples& rhs, const SolverOptions& options = {},
                          const DiscreteField* guess = nullptr);

/// L v at barycentric coordinates inside one leaf.
Vec4 apply_L_in(const ProblemSpec& problem, const DiscreteField& field, int leaf,
                const Barycentric& bary);
/// L v at a point (element-wise derivatives in the leaf found by locate).
Vec4 apply_L(const ProblemSpec& problem, const DiscreteField& field, Point x);

/// ||L v - F||^2 on every leaf.
Eigen::VectorXd element_lsf_squared(const ProblemSpec& problem, const DiscreteField& field,
                                    const RhsSamples& rhs);
/// sqrt of the summed element values over `region` (all leaves when empty optional).
double lsf(const ProblemSpec& problem, const DiscreteField& field, const RhsSamples& rhs,
           std::optional<std::span<const int>> region = std::nullopt);

/// Scalar psi in the H^1_0 Lagrange space minimizing
/// ||F - (A^{-1} rot psi, 0, psi)||, i.e. the part of F in Ker(L*).
struct KernelComponent {
  std::shared_ptr<const LagrangeSpace> space;
  Eigen::VectorXd psi;
};

KernelComponent kernel_component(const ProblemSpec& problem,
                                 std::shared_ptr<const LagrangeSpace> space,
                                 const RhsSamples& rhs, const SolverOptions& options = {});

/// (A^{-1} rot psi, 0, psi) at barycentric coordinates inside one leaf.
Vec4 kernel_value_in(const ProblemSpec& problem, const KernelComponent& kernel, int leaf,
                     const Barycentric& bary);

/// F - phi at the quadrature points.
RhsSamples subtract_kernel(const ProblemSpec& problem, const RhsSamples& rhs,
                           const KernelComponent& kernel);

double modified_lsf(const ProblemSpec& problem, const DiscreteField& field, const RhsSamples& rhs,
                    const KernelComponent& kernel,
                    std::optional<std::span<const int>> region = std::nullopt);

}  // namespace nird
