#include "nird/geometry.hpp"

#include <algorithm>
#include <stdexcept>

namespace nird {

ElementGeometry::ElementGeometry(Point v0, Point v1, Point v2) : v_{v0, v1, v2} {
  const Point e1 = v1 - v0;
  const Point e2 = v2 - v0;
  const double det = cross(e1, e2);
  area_ = 0.5 * det;
  const double perimeter = norm(v1 - v0) + norm(v2 - v1) + norm(v0 - v2);
  inscribed_diameter_ = perimeter > 0.0 ? 4.0 * std::abs(area_) / perimeter : 0.0;
  if (det != 0.0) {
    inv_jac_ = {e2.y / det, -e2.x / det, -e1.y / det, e1.x / det};
  }
}

double ElementGeometry::shortest_edge() const {
  return std::min({norm(v_[1] - v_[0]), norm(v_[2] - v_[1]), norm(v_[0] - v_[2])});
}

Point ElementGeometry::centroid() const {
  return {(v_[0].x + v_[1].x + v_[2].x) / 3.0, (v_[0].y + v_[1].y + v_[2].y) / 3.0};
}

Barycentric ElementGeometry::barycentric(Point x) const {
  const Point d = x - v_[0];
  const double xi = inv_jac_[0] * d.x + inv_jac_[1] * d.y;
  const double eta = inv_jac_[2] * d.x + inv_jac_[3] * d.y;
  return {1.0 - xi - eta, xi, eta};
}

Point ElementGeometry::from_barycentric(const Barycentric& l) const {
  return {l[0] * v_[0].x + l[1] * v_[1].x + l[2] * v_[2].x,
          l[0] * v_[0].y + l[1] * v_[1].y + l[2] * v_[2].y};
}

Point ElementGeometry::map(double xi, double eta) const {
  return {v_[0].x + xi * (v_[1].x - v_[0].x) + eta * (v_[2].x - v_[0].x),
          v_[0].y + xi * (v_[1].y - v_[0].y) + eta * (v_[2].y - v_[0].y)};
}

Point ElementGeometry::push_gradient(Point g) const {
  // J^{-T} g, with inv_jac_ = J^{-1} stored row-major.
  return {inv_jac_[0] * g.x + inv_jac_[2] * g.y, inv_jac_[1] * g.x + inv_jac_[3] * g.y};
}

bool ElementGeometry::contains(Point x, double tol) const {
  const Barycentric l = barycentric(x);
  return l[0] >= -tol && l[1] >= -tol && l[2] >= -tol;
}

ElementGeometry extended_triangle(const ElementGeometry& tau, double d_min) {
  if (!(d_min > 0.0)) {
    throw std::invalid_argument("extended_triangle: d_min must be positive");
  }
  const Point c = tau.centroid();
  std::array<Point, 3> ext{};
  for (int i = 0; i < 3; ++i) {
    const Point r = tau.vertices()[i] - c;
    const double len = norm(r);
    if (len == 0.0) {
      throw std::invalid_argument("extended_triangle: degenerate triangle");
    }
    ext[i] = tau.vertices()[i] + (d_min / len) * r;
  }
  ElementGeometry g(ext[0], ext[1], ext[2]);
  if (!(std::abs(g.area()) > 0.0)) {
    throw std::invalid_argument("extended_triangle: zero-area extended triangle");
  }
  return g;
}

Barycentric extended_barycentric(const ElementGeometry& tau, double d_min, Point x) {
  return extended_triangle(tau, d_min).barycentric(x);
}

}  // namespace nird
