#include "nird/fosls.hpp"

#include <cmath>
#include <stdexcept>

#include "nird/error.hpp"

namespace nird {

namespace {

struct Tabulation {
  int n = 0;
  std::vector<QuadPoint> rule;
  std::vector<double> phi, dxi, deta;  // [k * n + i]

  Tabulation(const LagrangeBasis& basis, int quad_degree)
      : n(basis.size()), rule(triangle_rule(quad_degree)) {
    const std::size_t m = rule.size() * n;
    phi.resize(m);
    dxi.resize(m);
    deta.resize(m);
    for (std::size_t k = 0; k < rule.size(); ++k) {
      basis.eval(rule[k].xi, rule[k].eta, &phi[k * n]);
      basis.eval_grad(rule[k].xi, rule[k].eta, &dxi[k * n], &deta[k * n]);
    }
  }
};

struct Coeff {
  double a11;
  double a22;
};

Coeff coefficients_at(const ProblemSpec& problem, Point x) {
  const double a = problem.alpha(x);
  return {a, a * problem.epsilon};
}

// Columns of the 4 x 3n operator matrix for one point, given physical basis
// values and gradients.
void fill_operator(const ProblemSpec& problem, Coeff c, int n, const double* phi,
                   const Point* grad, Eigen::Ref<Eigen::MatrixXd> B) {
  B.setZero();
  const Point b = problem.b;
  for (int i = 0; i < n; ++i) {
    const Point g = grad[i];
    B(0, i) = -c.a11 * g.x;
    B(1, i) = -c.a22 * g.y;
    B(2, i) = b.x * g.x + b.y * g.y;
    B(0, n + i) = phi[i];
    B(2, n + i) = -g.x;
    B(3, n + i) = -g.y / c.a11;
    B(1, 2 * n + i) = phi[i];
    B(2, 2 * n + i) = -g.y;
    B(3, 2 * n + i) = g.x / c.a22;
  }
}

Eigen::VectorXd local_coefficients(const DiscreteField& field, int leaf) {
  const auto dofs = field.space().cell_dofs(leaf);
  const int n = static_cast<int>(dofs.size());
  const Eigen::Index s = static_cast<Eigen::Index>(field.space().size());
  Eigen::VectorXd c(3 * n);
  for (int b = 0; b < kBlocks; ++b) {
    for (int i = 0; i < n; ++i) c[b * n + i] = field.coefficients()[b * s + dofs[i]];
  }
  return c;
}

void check_samples(const RhsSamples& rhs, const MeshForest& mesh) {
  if (rhs.mesh != &mesh) {
    throw std::invalid_argument("right-hand side samples belong to a different mesh");
  }
}

void check_area(const ElementGeometry& g, int leaf) {
  if (!(g.area() > 0.0)) {
    throw NirdError("assemble", "zero-area element " + std::to_string(leaf));
  }
}

}  // namespace

void ProblemSpec::validate() const {
  if (!f) throw std::invalid_argument("ProblemSpec: missing right-hand side");
  if (!alpha) throw std::invalid_argument("ProblemSpec: missing diffusion coefficient");
  if (!(epsilon > 0.0)) throw std::invalid_argument("ProblemSpec: epsilon must be positive");
  for (int i = 0; i <= 16; ++i) {
    for (int j = 0; j <= 16; ++j) {
      if (!(alpha({i / 16.0, j / 16.0}) > 0.0)) {
        throw std::invalid_argument("ProblemSpec: alpha must be positive");
      }
    }
  }
}

RhsFunction ProblemSpec::rhs_function() const {
  auto g = f;
  return [g](Point x) { return Vec4{0.0, 0.0, g(x), 0.0}; };
}

RhsSamples sample_rhs(const MeshForest& mesh, int quad_degree, const RhsFunction& f) {
  RhsSamples out;
  out.mesh = &mesh;
  out.quad_degree = quad_degree;
  const auto& rule = triangle_rule(quad_degree);
  out.values.resize(mesh.num_leaves() * rule.size());
  for (std::size_t l = 0; l < mesh.num_leaves(); ++l) {
    const ElementGeometry g = mesh.geometry(static_cast<int>(l));
    for (std::size_t k = 0; k < rule.size(); ++k) {
      const Vec4 v = f(g.map(rule[k].xi, rule[k].eta));
      for (double c : v) {
        if (!std::isfinite(c)) {
          throw NirdError("assemble", "right-hand side is not finite at a quadrature point");
        }
      }
      out.values[l * rule.size() + k] = v;
    }
  }
  return out;
}

Eigen::VectorXd FoslsSystem::expand(const Eigen::VectorXd& reduced) const {
  Eigen::VectorXd full = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(full_size));
  for (std::size_t i = 0; i < free_dofs.size(); ++i) full[free_dofs[i]] = reduced[i];
  return full;
}

Eigen::VectorXd FoslsSystem::restrict_to_free(const Eigen::VectorXd& full) const {
  Eigen::VectorXd r(free_dofs.size());
  for (std::size_t i = 0; i < free_dofs.size(); ++i) r[i] = full[free_dofs[i]];
  return r;
}

std::vector<bool> constrained_dofs(const ProblemSpec& problem, const LagrangeSpace& space) {
  const std::size_t s = space.size();
  std::vector<bool> fixed(kBlocks * s, false);
  unsigned dirichlet = 0, neumann_x = 0, neumann_y = 0;
  for (int side = 0; side < 4; ++side) {
    if (problem.dirichlet(side)) {
      dirichlet |= 1u << side;
    } else if (side == static_cast<int>(Side::West) || side == static_cast<int>(Side::East)) {
      neumann_x |= 1u << side;
    } else {
      neumann_y |= 1u << side;
    }
  }
  for (std::size_t d = 0; d < s; ++d) {
    const unsigned sides = space.dof_sides(static_cast<int>(d));
    if (sides & dirichlet) fixed[d] = true;
    if (sides & neumann_x) fixed[s + d] = true;
    if (sides & neumann_y) fixed[2 * s + d] = true;
  }
  return fixed;
}

FoslsSystem assemble(const ProblemSpec& problem, const LagrangeSpace& space,
                     const RhsSamples& rhs) {
  const MeshForest& mesh = space.mesh();
  check_samples(rhs, mesh);
  const Tabulation tab(space.basis(), rhs.quad_degree);
  const int n = tab.n;
  const std::size_t nq = tab.rule.size();
  const std::size_t s = space.size();

  FoslsSystem sys;
  sys.full_size = kBlocks * s;
  const std::vector<bool> fixed = constrained_dofs(problem, space);
  std::vector<int> reduced(sys.full_size, -1);
  for (std::size_t i = 0; i < sys.full_size; ++i) {
    if (!fixed[i]) {
      reduced[i] = static_cast<int>(sys.free_dofs.size());
      sys.free_dofs.push_back(static_cast<int>(i));
    }
  }
  const Eigen::Index nfree = static_cast<Eigen::Index>(sys.free_dofs.size());
  sys.load = Eigen::VectorXd::Zero(nfree);

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(mesh.num_leaves() * 9 * n * n);
  Eigen::MatrixXd B(4, 3 * n), K(3 * n, 3 * n);
  Eigen::VectorXd F(3 * n);
  std::vector<Point> grad(n);
  std::vector<int> idx(3 * n);
  for (std::size_t l = 0; l < mesh.num_leaves(); ++l) {
    const int leaf = static_cast<int>(l);
    const ElementGeometry g = mesh.geometry(leaf);
    check_area(g, leaf);
    K.setZero();
    F.setZero();
    for (std::size_t k = 0; k < nq; ++k) {
      const double* phi = &tab.phi[k * n];
      for (int i = 0; i < n; ++i) grad[i] = g.push_gradient({tab.dxi[k * n + i], tab.deta[k * n + i]});
      const Point x = g.map(tab.rule[k].xi, tab.rule[k].eta);
      fill_operator(problem, coefficients_at(problem, x), n, phi, grad.data(), B);
      const double wj = tab.rule[k].weight * 2.0 * g.area();
      const Vec4& r = rhs.values[l * nq + k];
      K.noalias() += wj * B.transpose() * B;
      for (int c = 0; c < 3 * n; ++c) {
        F[c] += wj * (B(0, c) * r[0] + B(1, c) * r[1] + B(2, c) * r[2] + B(3, c) * r[3]);
      }
    }
    const auto dofs = space.cell_dofs(leaf);
    for (int b = 0; b < kBlocks; ++b) {
      for (int i = 0; i < n; ++i) idx[b * n + i] = reduced[b * s + dofs[i]];
    }
    for (int i = 0; i < 3 * n; ++i) {
      if (idx[i] < 0) continue;
      sys.load[idx[i]] += F[i];
      for (int j = 0; j < 3 * n; ++j) {
        if (idx[j] < 0) continue;
        // Average with the transpose so that the assembled matrix is exactly symmetric.
        triplets.emplace_back(idx[i], idx[j], 0.5 * (K(i, j) + K(j, i)));
      }
    }
  }
  sys.matrix.resize(nfree, nfree);
  sys.matrix.setFromTriplets(triplets.begin(), triplets.end());
  return sys;
}

DiscreteField solve_fosls(const ProblemSpec& problem, std::shared_ptr<const LagrangeSpace> space,
                          const RhsSamples& rhs, const SolverOptions& options,
                          const DiscreteField* guess) {
  const FoslsSystem sys = assemble(problem, *space, rhs);
  Eigen::VectorXd warm;
  const Eigen::VectorXd* warm_ptr = nullptr;
  if (guess && guess->space().mesh_ptr() == space->mesh_ptr() &&
      guess->space().degree() == space->degree()) {
    warm = sys.restrict_to_free(guess->coefficients());
    warm_ptr = &warm;
  }
  const Eigen::VectorXd x = solve_spd(sys.matrix, sys.load, options, warm_ptr);
  return DiscreteField(std::move(space), sys.expand(x));
}

Vec4 apply_L_in(const ProblemSpec& problem, const DiscreteField& field, int leaf,
                const Barycentric& bary) {
  const LagrangeBasis& basis = field.space().basis();
  const int n = basis.size();
  double phi[32], dxi[32], deta[32];
  Point grad[32];
  basis.eval(bary[1], bary[2], phi);
  basis.eval_grad(bary[1], bary[2], dxi, deta);
  const ElementGeometry g = field.mesh().geometry(leaf);
  for (int i = 0; i < n; ++i) grad[i] = g.push_gradient({dxi[i], deta[i]});
  Eigen::MatrixXd B(4, 3 * n);
  fill_operator(problem, coefficients_at(problem, g.from_barycentric(bary)), n, phi, grad, B);
  const Eigen::Vector4d v = B * local_coefficients(field, leaf);
  return {v[0], v[1], v[2], v[3]};
}

Vec4 apply_L(const ProblemSpec& problem, const DiscreteField& field, Point x) {
  const Location loc = field.mesh().locate(x);
  return apply_L_in(problem, field, loc.leaf, loc.bary);
}

Eigen::VectorXd element_lsf_squared(const ProblemSpec& problem, const DiscreteField& field,
                                    const RhsSamples& rhs) {
  const MeshForest& mesh = field.mesh();
  check_samples(rhs, mesh);
  const Tabulation tab(field.space().basis(), rhs.quad_degree);
  const int n = tab.n;
  const std::size_t nq = tab.rule.size();
  Eigen::VectorXd out(mesh.num_leaves());
  Eigen::MatrixXd B(4, 3 * n);
  std::vector<Point> grad(n);
  for (std::size_t l = 0; l < mesh.num_leaves(); ++l) {
    const int leaf = static_cast<int>(l);
    const ElementGeometry g = mesh.geometry(leaf);
    const Eigen::VectorXd c = local_coefficients(field, leaf);
    double sum = 0.0;
    for (std::size_t k = 0; k < nq; ++k) {
      for (int i = 0; i < n; ++i) grad[i] = g.push_gradient({tab.dxi[k * n + i], tab.deta[k * n + i]});
      const Point x = g.map(tab.rule[k].xi, tab.rule[k].eta);
      fill_operator(problem, coefficients_at(problem, x), n, &tab.phi[k * n], grad.data(), B);
      const Eigen::Vector4d v = B * c;
      const Vec4& r = rhs.values[l * nq + k];
      double local = 0.0;
      for (int j = 0; j < 4; ++j) local += (v[j] - r[j]) * (v[j] - r[j]);
      sum += tab.rule[k].weight * 2.0 * g.area() * local;
    }
    out[leaf] = sum;
  }
  return out;
}

double lsf(const ProblemSpec& problem, const DiscreteField& field, const RhsSamples& rhs,
           std::optional<std::span<const int>> region) {
  const Eigen::VectorXd e2 = element_lsf_squared(problem, field, rhs);
  if (!region) return std::sqrt(e2.sum());
  double s = 0.0;
  for (int leaf : *region) s += e2[leaf];
  return std::sqrt(s);
}

KernelComponent kernel_component(const ProblemSpec& problem,
                                 std::shared_ptr<const LagrangeSpace> space,
                                 const RhsSamples& rhs, const SolverOptions& options) {
  const MeshForest& mesh = space->mesh();
  check_samples(rhs, mesh);
  const Tabulation tab(space->basis(), rhs.quad_degree);
  const int n = tab.n;
  const std::size_t nq = tab.rule.size();
  const std::size_t s = space->size();

  std::vector<int> reduced(s, -1);
  std::vector<int> free;
  for (std::size_t d = 0; d < s; ++d) {
    if (space->dof_sides(static_cast<int>(d)) == 0u) {
      reduced[d] = static_cast<int>(free.size());
      free.push_back(static_cast<int>(d));
    }
  }
  KernelComponent out{space, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s))};
  if (free.empty()) return out;

  std::vector<Eigen::Triplet<double>> triplets;
  Eigen::VectorXd load = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(free.size()));
  Eigen::MatrixXd K(4, n);
  for (std::size_t l = 0; l < mesh.num_leaves(); ++l) {
    const int leaf = static_cast<int>(l);
    const ElementGeometry g = mesh.geometry(leaf);
    check_area(g, leaf);
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd F = Eigen::VectorXd::Zero(n);
    for (std::size_t k = 0; k < nq; ++k) {
      const Point x = g.map(tab.rule[k].xi, tab.rule[k].eta);
      const Coeff c = coefficients_at(problem, x);
      for (int i = 0; i < n; ++i) {
        const Point gr = g.push_gradient({tab.dxi[k * n + i], tab.deta[k * n + i]});
        K(0, i) = -gr.y / c.a11;
        K(1, i) = gr.x / c.a22;
        K(2, i) = 0.0;
        K(3, i) = tab.phi[k * n + i];
      }
      const double wj = tab.rule[k].weight * 2.0 * g.area();
      const Vec4& r = rhs.values[l * nq + k];
      M.noalias() += wj * K.transpose() * K;
      for (int i = 0; i < n; ++i) {
        F[i] += wj * (K(0, i) * r[0] + K(1, i) * r[1] + K(3, i) * r[3]);
      }
    }
    const auto dofs = space->cell_dofs(leaf);
    for (int i = 0; i < n; ++i) {
      const int ri = reduced[dofs[i]];
      if (ri < 0) continue;
      load[ri] += F[i];
      for (int j = 0; j < n; ++j) {
        const int rj = reduced[dofs[j]];
        if (rj >= 0) triplets.emplace_back(ri, rj, 0.5 * (M(i, j) + M(j, i)));
      }
    }
  }
  SparseMatrix A(static_cast<Eigen::Index>(free.size()), static_cast<Eigen::Index>(free.size()));
  A.setFromTriplets(triplets.begin(), triplets.end());
  const Eigen::VectorXd x = solve_spd(A, load, options);
  for (std::size_t i = 0; i < free.size(); ++i) out.psi[free[i]] = x[i];
  return out;
}

Vec4 kernel_value_in(const ProblemSpec& problem, const KernelComponent& kernel, int leaf,
                     const Barycentric& bary) {
  const LagrangeBasis& basis = kernel.space->basis();
  const int n = basis.size();
  double phi[32], dxi[32], deta[32];
  basis.eval(bary[1], bary[2], phi);
  basis.eval_grad(bary[1], bary[2], dxi, deta);
  const ElementGeometry g = kernel.space->mesh().geometry(leaf);
  const auto dofs = kernel.space->cell_dofs(leaf);
  double psi = 0.0;
  Point grad{};
  for (int i = 0; i < n; ++i) {
    const double c = kernel.psi[dofs[i]];
    psi += c * phi[i];
    grad = grad + c * g.push_gradient({dxi[i], deta[i]});
  }
  const Coeff c = coefficients_at(problem, g.from_barycentric(bary));
  return {-grad.y / c.a11, grad.x / c.a22, 0.0, psi};
}

RhsSamples subtract_kernel(const ProblemSpec& problem, const RhsSamples& rhs,
                           const KernelComponent& kernel) {
  const MeshForest& mesh = kernel.space->mesh();
  if (rhs.mesh != &mesh) {
    throw std::invalid_argument("subtract_kernel: kernel lives on a different mesh");
  }
  const auto& rule = triangle_rule(rhs.quad_degree);
  RhsSamples out = rhs;
  for (std::size_t l = 0; l < mesh.num_leaves(); ++l) {
    for (std::size_t k = 0; k < rule.size(); ++k) {
      const Barycentric b{1.0 - rule[k].xi - rule[k].eta, rule[k].xi, rule[k].eta};
      const Vec4 phi = kernel_value_in(problem, kernel, static_cast<int>(l), b);
      Vec4& v = out.values[l * rule.size() + k];
      for (int j = 0; j < 4; ++j) v[j] -= phi[j];
    }
  }
  return out;
}

double modified_lsf(const ProblemSpec& problem, const DiscreteField& field, const RhsSamples& rhs,
                    const KernelComponent& kernel, std::optional<std::span<const int>> region) {
  if (kernel.space->mesh_ptr() != field.space().mesh_ptr()) {
    throw std::invalid_argument("modified_lsf: kernel and field live on different meshes");
  }
  return lsf(problem, field, subtract_kernel(problem, rhs, kernel), region);
}

}  // namespace nird
