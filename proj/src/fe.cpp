#include "nird/fe.hpp"

#include <Eigen/LU>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace nird {

void gauss_legendre01(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // Recompute the derivative at the converged root.
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = pk;
    }
    dp = n == 1 ? 1.0 : n * (x * p1 - p0) / (x * x - 1.0);
    nodes[n - 1 - i] = 0.5 * (x + 1.0);
    weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
  }
}

namespace {

constexpr int kMaxRuleDegree = 2 * kMaxDegree + 8;

std::vector<QuadPoint> collapsed_rule(int degree) {
  // Duffy map xi = s, eta = t (1 - s); the Jacobian adds one degree in s.
  const int n = (degree + 3) / 2;
  std::vector<double> x, w;
  gauss_legendre01(n, x, w);
  std::vector<QuadPoint> rule;
  rule.reserve(n * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      rule.push_back({x[i], x[j] * (1.0 - x[i]), w[i] * w[j] * (1.0 - x[i])});
    }
  }
  return rule;
}

}  // namespace

const std::vector<QuadPoint>& triangle_rule(int exact_degree) {
  static const std::vector<std::vector<QuadPoint>> rules = [] {
    std::vector<std::vector<QuadPoint>> r;
    for (int d = 0; d <= kMaxRuleDegree; ++d) r.push_back(collapsed_rule(d));
    return r;
  }();
  if (exact_degree < 0 || exact_degree > kMaxRuleDegree) {
    throw std::invalid_argument("triangle_rule: unsupported degree " +
                                std::to_string(exact_degree));
  }
  return rules[exact_degree];
}

// ---------------------------------------------------------------------------

LagrangeBasis::LagrangeBasis(int degree) : degree_(degree) {
  if (degree < 1 || degree > kMaxDegree) {
    throw std::invalid_argument("LagrangeBasis: degree must be in 1.." +
                                std::to_string(kMaxDegree));
  }
  const double h = 1.0 / degree;
  const std::array<Point, 3> v{Point{0, 0}, Point{1, 0}, Point{0, 1}};
  nodes_.assign(v.begin(), v.end());
  for (int e = 0; e < 3; ++e) {
    const Point a = v[e];
    const Point b = v[(e + 1) % 3];
    for (int k = 1; k < degree; ++k) nodes_.push_back(a + (k * h) * (b - a));
  }
  for (int j = 1; j < degree; ++j) {
    for (int i = 1; i + j < degree; ++i) nodes_.push_back({i * h, j * h});
  }
  for (int total = 0; total <= degree; ++total) {
    for (int b = 0; b <= total; ++b) monomials_.push_back({total - b, b});
  }
  const int n = size();
  Eigen::MatrixXd vander(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      vander(i, j) = std::pow(nodes_[i].x, monomials_[j][0]) * std::pow(nodes_[i].y, monomials_[j][1]);
    }
  }
  coeffs_ = vander.inverse();
}

void LagrangeBasis::powers(double xi, double eta, double* xp, double* yp) const {
  xp[0] = yp[0] = 1.0;
  for (int k = 1; k <= degree_; ++k) {
    xp[k] = xp[k - 1] * xi;
    yp[k] = yp[k - 1] * eta;
  }
}

void LagrangeBasis::eval(double xi, double eta, double* values) const {
  const int n = size();
  double xp[kMaxDegree + 1], yp[kMaxDegree + 1], m[32];
  powers(xi, eta, xp, yp);
  for (int j = 0; j < n; ++j) m[j] = xp[monomials_[j][0]] * yp[monomials_[j][1]];
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += coeffs_(j, i) * m[j];
    values[i] = s;
  }
}

void LagrangeBasis::eval_grad(double xi, double eta, double* dxi, double* deta) const {
  const int n = size();
  double xp[kMaxDegree + 1], yp[kMaxDegree + 1], mx[32], my[32];
  powers(xi, eta, xp, yp);
  for (int j = 0; j < n; ++j) {
    const int a = monomials_[j][0];
    const int b = monomials_[j][1];
    mx[j] = a > 0 ? a * xp[a - 1] * yp[b] : 0.0;
    my[j] = b > 0 ? b * xp[a] * yp[b - 1] : 0.0;
  }
  for (int i = 0; i < n; ++i) {
    double sx = 0.0, sy = 0.0;
    for (int j = 0; j < n; ++j) {
      sx += coeffs_(j, i) * mx[j];
      sy += coeffs_(j, i) * my[j];
    }
    dxi[i] = sx;
    deta[i] = sy;
  }
}

const LagrangeBasis& lagrange_basis(int degree) {
  static const std::vector<LagrangeBasis> bases = [] {
    std::vector<LagrangeBasis> b;
    for (int q = 1; q <= kMaxDegree; ++q) b.emplace_back(q);
    return b;
  }();
  if (degree < 1 || degree > kMaxDegree) {
    throw std::invalid_argument("lagrange_basis: unsupported degree " + std::to_string(degree));
  }
  return bases[degree - 1];
}

// ---------------------------------------------------------------------------

LagrangeSpace::LagrangeSpace(std::shared_ptr<const MeshForest> mesh, int degree)
    : mesh_(std::move(mesh)), degree_(degree), basis_(&lagrange_basis(degree)) {
  const MeshForest& m = *mesh_;
  const int nloc = basis_->size();
  const int q = degree_;
  const int n_leaves = static_cast<int>(m.num_leaves());
  const int n_vertices = static_cast<int>(m.num_vertices());
  constexpr std::array<std::array<int, 2>, 3> kEdges{{{0, 1}, {1, 2}, {2, 0}}};
  // Side marker of basis edge e is the marker opposite its third vertex.
  constexpr std::array<int, 3> kOpposite{2, 0, 1};

  std::unordered_map<std::uint64_t, int> edge_index;
  std::vector<int> leaf_edges(static_cast<std::size_t>(n_leaves) * 3);
  for (int l = 0; l < n_leaves; ++l) {
    const auto& v = m.leaf_vertices(l);
    for (int e = 0; e < 3; ++e) {
      int a = v[kEdges[e][0]], b = v[kEdges[e][1]];
      if (a > b) std::swap(a, b);
      const std::uint64_t key = (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
      auto [it, inserted] = edge_index.emplace(key, static_cast<int>(edge_index.size()));
      leaf_edges[l * 3 + e] = it->second;
    }
  }
  const int n_edges = static_cast<int>(edge_index.size());
  const int per_edge = q - 1;
  const int per_cell = nloc - 3 - 3 * per_edge;
  const int total = n_vertices + n_edges * per_edge + n_leaves * per_cell;

  cell_dofs_.assign(static_cast<std::size_t>(n_leaves) * nloc, -1);
  points_.assign(total, Point{});
  sides_.assign(total, 0u);
  for (int v = 0; v < n_vertices; ++v) points_[v] = m.vertex(v);

  for (int l = 0; l < n_leaves; ++l) {
    const auto& v = m.leaf_vertices(l);
    const auto& marker = m.leaf_markers(l);
    const ElementGeometry g = m.geometry(l);
    int* dofs = cell_dofs_.data() + static_cast<std::size_t>(l) * nloc;
    for (int i = 0; i < 3; ++i) dofs[i] = v[i];
    for (int e = 0; e < 3; ++e) {
      const int ga = v[kEdges[e][0]];
      const int gb = v[kEdges[e][1]];
      const int base = n_vertices + leaf_edges[l * 3 + e] * per_edge;
      const int side = marker[kOpposite[e]];
      if (side >= 0) {
        sides_[ga] |= 1u << side;
        sides_[gb] |= 1u << side;
      }
      for (int k = 1; k <= per_edge; ++k) {
        const int local = 3 + e * per_edge + (k - 1);
        const int dof = base + (ga < gb ? k - 1 : per_edge - k);
        dofs[local] = dof;
        const Point ref = basis_->nodes()[local];
        points_[dof] = g.map(ref.x, ref.y);
        if (side >= 0) sides_[dof] |= 1u << side;
      }
    }
    const int interior_base = n_vertices + n_edges * per_edge + l * per_cell;
    for (int k = 0; k < per_cell; ++k) {
      const int local = 3 + 3 * per_edge + k;
      dofs[local] = interior_base + k;
      const Point ref = basis_->nodes()[local];
      points_[interior_base + k] = g.map(ref.x, ref.y);
    }
  }
}

// ---------------------------------------------------------------------------

DiscreteField::DiscreteField(std::shared_ptr<const LagrangeSpace> space)
    : space_(std::move(space)), coeffs_(Eigen::VectorXd::Zero(kBlocks * space_->size())) {}

DiscreteField::DiscreteField(std::shared_ptr<const LagrangeSpace> space,
                             Eigen::VectorXd coefficients)
    : space_(std::move(space)), coeffs_(std::move(coefficients)) {
  if (coeffs_.size() != static_cast<Eigen::Index>(kBlocks * space_->size())) {
    throw std::invalid_argument("DiscreteField: coefficient count does not match the space");
  }
}

FieldValue DiscreteField::evaluate(Point x) const {
  const Location loc = mesh().locate(x);
  return evaluate_in(loc.leaf, loc.bary);
}

FieldValue DiscreteField::evaluate_in(int leaf, const Barycentric& bary) const {
  const LagrangeBasis& basis = space_->basis();
  const int n = basis.size();
  double phi[32], dxi[32], deta[32];
  basis.eval(bary[1], bary[2], phi);
  basis.eval_grad(bary[1], bary[2], dxi, deta);
  const ElementGeometry g = mesh().geometry(leaf);
  const auto dofs = space_->cell_dofs(leaf);
  const Eigen::Index s = static_cast<Eigen::Index>(space_->size());
  FieldValue out;
  Point gp{}, gu1{}, gu2{};
  for (int i = 0; i < n; ++i) {
    const double cp = coeffs_[dofs[i]];
    const double c1 = coeffs_[s + dofs[i]];
    const double c2 = coeffs_[2 * s + dofs[i]];
    const Point grad = g.push_gradient({dxi[i], deta[i]});
    out.p += cp * phi[i];
    out.u.x += c1 * phi[i];
    out.u.y += c2 * phi[i];
    gp = gp + cp * grad;
    gu1 = gu1 + c1 * grad;
    gu2 = gu2 + c2 * grad;
  }
  out.grad_p = gp;
  out.grad_u1 = gu1;
  out.grad_u2 = gu2;
  return out;
}

Eigen::VectorXd interpolate(const LagrangeSpace& space, const std::function<double(Point)>& g) {
  Eigen::VectorXd out(space.size());
  for (std::size_t i = 0; i < space.size(); ++i) out[i] = g(space.dof_point(static_cast<int>(i)));
  return out;
}

Eigen::VectorXd prolong_scalar(const LagrangeSpace& coarse, const Eigen::VectorXd& values,
                               const LagrangeSpace& fine) {
  if (coarse.degree() != fine.degree()) {
    throw std::invalid_argument("prolong: degree mismatch");
  }
  const auto parent = coarse.mesh().containing_leaves(fine.mesh());
  const LagrangeBasis& basis = coarse.basis();
  const int n = basis.size();
  Eigen::VectorXd out(fine.size());
  double phi[32];
  for (std::size_t l = 0; l < fine.mesh().num_leaves(); ++l) {
    const int leaf = static_cast<int>(l);
    const auto fdofs = fine.cell_dofs(leaf);
    const auto cdofs = coarse.cell_dofs(parent[l]);
    const ElementGeometry cg = coarse.mesh().geometry(parent[l]);
    for (int i = 0; i < n; ++i) {
      const Barycentric b = cg.barycentric(fine.dof_point(fdofs[i]));
      basis.eval(b[1], b[2], phi);
      double s = 0.0;
      for (int j = 0; j < n; ++j) s += values[cdofs[j]] * phi[j];
      out[fdofs[i]] = s;
    }
  }
  return out;
}

DiscreteField prolong(const DiscreteField& coarse, std::shared_ptr<const LagrangeSpace> fine) {
  const Eigen::Index sc = static_cast<Eigen::Index>(coarse.space().size());
  const Eigen::Index sf = static_cast<Eigen::Index>(fine->size());
  Eigen::VectorXd out(kBlocks * sf);
  for (int b = 0; b < kBlocks; ++b) {
    out.segment(b * sf, sf) =
        prolong_scalar(coarse.space(), coarse.coefficients().segment(b * sc, sc), *fine);
  }
  return DiscreteField(std::move(fine), std::move(out));
}

void write_field(std::ostream& out, const DiscreteField& field) {
  out << "NIRD-FIELD v1\n";
  out << "degree " << field.space().degree() << '\n';
  out << "size " << field.coefficients().size() << '\n';
  char buf[40];
  for (Eigen::Index i = 0; i < field.coefficients().size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.16e", field.coefficients()[i]);
    out << buf << '\n';
  }
}

DiscreteField read_field(std::istream& in, std::shared_ptr<const LagrangeSpace> space) {
  std::string header, word;
  std::getline(in, header);
  if (header != "NIRD-FIELD v1") throw std::invalid_argument("read_field: bad header");
  int degree = 0;
  long size = 0;
  in >> word >> degree;
  if (word != "degree" || degree != space->degree()) {
    throw std::invalid_argument("read_field: degree mismatch");
  }
  in >> word >> size;
  if (word != "size" || size != static_cast<long>(kBlocks * space->size())) {
    throw std::invalid_argument("read_field: size mismatch");
  }
  Eigen::VectorXd c(size);
  for (long i = 0; i < size; ++i) {
    in >> word;
    c[i] = std::stod(word);
  }
  if (!in) throw std::invalid_argument("read_field: truncated coefficient list");
  return DiscreteField(std::move(space), std::move(c));
}

}  // namespace nird
