#pragma once

#include <Eigen/Core>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "nird/mesh.hpp"

namespace nird {

/// Quadrature point on the reference triangle (0,0),(1,0),(0,1); weights sum
/// to the reference area 1/2.
struct QuadPoint {
  double xi;
  double eta;
  double weight;
};

/// Collapsed Gauss-Legendre rule exact for polynomials of total degree
/// `exact_degree`.  Rules are cached; the reference is stable.
const std::vector<QuadPoint>& triangle_rule(int exact_degree);

/// Gauss-Legendre nodes and weights on [0,1].
void gauss_legendre01(int n, std::vector<double>& nodes, std::vector<double>& weights);

/// Nodal Lagrange basis of degree q on the reference triangle.
///
/// Node order: the three vertices, then q-1 nodes along each edge
/// (v0->v1), (v1->v2), (v2->v0), then interior nodes.
class LagrangeBasis {
 public:
  explicit LagrangeBasis(int degree);

  int degree() const { return degree_; }
  int size() const { return static_cast<int>(nodes_.size()); }
  const std::vector<Point>& nodes() const { return nodes_; }

  void eval(double xi, double eta, double* values) const;
  void eval_grad(double xi, double eta, double* dxi, double* deta) const;

 private:
  void powers(double xi, double eta, double* xp, double* yp) const;

  int degree_;
  std::vector<Point> nodes_;
  std::vector<std::array<int, 2>> monomials_;
  Eigen::MatrixXd coeffs_;  // column i: monomial coefficients of basis i
};

inline constexpr int kMaxDegree = 4;
const LagrangeBasis& lagrange_basis(int degree);

/// Scalar continuous Lagrange space on the leaves of a forest.
///
/// Global numbering: vertex dofs first (forest vertex ids), then edge dofs
/// in order of first appearance over leaves (oriented from the lower to the
/// higher vertex id), then interior dofs leaf by leaf.
class LagrangeSpace {
 public:
  LagrangeSpace(std::shared_ptr<const MeshForest> mesh, int degree);

  const MeshForest& mesh() const { return *mesh_; }
  const std::shared_ptr<const MeshForest>& mesh_ptr() const { return mesh_; }
  int degree() const { return degree_; }
  const LagrangeBasis& basis() const { return *basis_; }
  int local_size() const { return basis_->size(); }
  std::size_t size() const { return points_.size(); }

  std::span<const int> cell_dofs(int leaf) const {
    return {cell_dofs_.data() + static_cast<std::size_t>(leaf) * local_size(),
            static_cast<std::size_t>(local_size())};
  }
  Point dof_point(int dof) const { return points_[dof]; }
  /// Bit (1 << side) set for each boundary side the dof lies on.
  unsigned dof_sides(int dof) const { return sides_[dof]; }

 private:
  std::shared_ptr<const MeshForest> mesh_;
  int degree_;
  const LagrangeBasis* basis_;
  std::vector<int> cell_dofs_;
  std::vector<Point> points_;
  std::vector<unsigned> sides_;
};

/// Values of the 3-block unknown (p, u1, u2) and their gradients at a point.
struct FieldValue {
  double p = 0.0;
  Point u{};
  Point grad_p{};
  Point grad_u1{};
  Point grad_u2{};
};

inline constexpr int kBlocks = 3;

/// Coefficients of (p, u1, u2) on one Lagrange space, laid out block by
/// block: index = block * space.size() + dof.
class DiscreteField {
 public:
  explicit DiscreteField(std::shared_ptr<const LagrangeSpace> space);
  DiscreteField(std::shared_ptr<const LagrangeSpace> space, Eigen::VectorXd coefficients);

  const LagrangeSpace& space() const { return *space_; }
  const std::shared_ptr<const LagrangeSpace>& space_ptr() const { return space_; }
  const MeshForest& mesh() const { return space_->mesh(); }
  const Eigen::VectorXd& coefficients() const { return coeffs_; }
  Eigen::VectorXd& coefficients() { return coeffs_; }

  FieldValue evaluate(Point x) const;
  FieldValue evaluate_in(int leaf, const Barycentric& bary) const;

 private:
  std::shared_ptr<const LagrangeSpace> space_;
  Eigen::VectorXd coeffs_;
};

/// Nodal interpolant of a scalar function.
Eigen::VectorXd interpolate(const LagrangeSpace& space, const std::function<double(Point)>& g);

/// Exact representation of a coarse scalar function on a nested finer space.
Eigen::VectorXd prolong_scalar(const LagrangeSpace& coarse, const Eigen::VectorXd& values,
                               const LagrangeSpace& fine);
/// Exact representation of a coarse field on a nested finer space.
DiscreteField prolong(const DiscreteField& coarse, std::shared_ptr<const LagrangeSpace> fine);

/// Coefficient dump: header "NIRD-FIELD v1", then "degree q", "size n" and
/// one coefficient per line.
void write_field(std::ostream& out, const DiscreteField& field);
DiscreteField read_field(std::istream& in, std::shared_ptr<const LagrangeSpace> space);

}  // namespace nird
