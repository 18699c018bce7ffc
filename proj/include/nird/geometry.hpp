#pragma once

#include <array>
#include <cmath>

namespace nird {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
  friend Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
  friend Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Point a, Point b) = default;
};

inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point a) { return std::hypot(a.x, a.y); }

/// Midpoint computed symmetrically so that (a,b) and (b,a) give identical bits.
inline Point midpoint(Point a, Point b) { return {0.5 * (a.x + b.x), 0.5 * (a.y + b.y)}; }

using Barycentric = std::array<double, 3>;

/// Absolute tolerance used by every barycentric containment predicate.
inline constexpr double kGeometryTol = 1e-12;

/// Affine data of a single triangle.
///
/// The barycentric transform maps a point x to (l1, l2, l3) with
/// x = l1*v0 + l2*v1 + l3*v2.  The inverse Jacobian is stored so that
/// reference gradients can be pushed forward cheaply.
class ElementGeometry {
 public:
  ElementGeometry() = default;
  ElementGeometry(Point v0, Point v1, Point v2);

  const std::array<Point, 3>& vertices() const { return v_; }
  double area() const { return area_; }
  /// Diameter of the inscribed circle, 4*area/perimeter.
  double inscribed_diameter() const { return inscribed_diameter_; }
  double shortest_edge() const;
  Point centroid() const;

  Barycentric barycentric(Point x) const;
  Point from_barycentric(const Barycentric& l) const;
  /// Maps reference coordinates (xi, eta) on (0,0),(1,0),(0,1) to physical space.
  Point map(double xi, double eta) const;
  /// Transforms a reference gradient to a physical gradient (J^{-T} g).
  Point push_gradient(Point ref_grad) const;

  bool contains(Point x, double tol = kGeometryTol) const;

 private:
  std::array<Point, 3> v_{};
  double area_ = 0.0;
  double inscribed_diameter_ = 0.0;
  // Inverse of J = [v1-v0, v2-v0], row-major.
  std::array<double, 4> inv_jac_{};
};

/// Barycentric coordinates of x with respect to the triangle obtained by
/// pushing every vertex of tau radially away from its centroid by d_min.
/// Throws std::invalid_argument for d_min <= 0 or a degenerate result.
Barycentric extended_barycentric(const ElementGeometry& tau, double d_min, Point x);

/// The extended triangle used by extended_barycentric.
ElementGeometry extended_triangle(const ElementGeometry& tau, double d_min);

}  // namespace nird
