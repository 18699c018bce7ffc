#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>

#include "nird/fosls.hpp"

using namespace nird;

namespace {

constexpr double kPi = std::numbers::pi;

std::shared_ptr<const MacroMesh> macro(int n) {
  return std::make_shared<const MacroMesh>(MacroMesh::unit_square(n));
}

ProblemSpec poisson() {
  ProblemSpec p;
  p.name = "poisson";
  p.f = [](Point x) { return 2.0 * kPi * kPi * std::sin(kPi * x.x) * std::sin(kPi * x.y); };
  return p;
}

ProblemSpec general_problem() {
  ProblemSpec p;
  p.name = "general";
  p.alpha = [](Point x) { return x.x < 0.5 ? 1.0 : 3.0; };
  p.epsilon = 0.25;
  p.b = {2.0, -1.0};
  p.sides[static_cast<int>(Side::East)] = BoundaryType::Neumann;
  p.f = [](Point x) { return 1.0 + x.x * x.y; };
  return p;
}

std::shared_ptr<const MeshForest> mesh_with(int uniform, int n = 2) {
  MeshForest m(macro(n));
  for (int i = 0; i < uniform; ++i) m = m.refine_all();
  return std::make_shared<const MeshForest>(m);
}

std::shared_ptr<const LagrangeSpace> space_on(std::shared_ptr<const MeshForest> m, int q) {
  return std::make_shared<const LagrangeSpace>(std::move(m), q);
}

// Least-squares slope of log(y) against log(x).
double slope(const std::vector<double>& x, const std::vector<double>& y) {
  const int n = static_cast<int>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    const double a = std::log(x[i]), b = std::log(y[i]);
    sx += a;
    sy += b;
    sxx += a * a;
    sxy += a * b;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

DiscreteField random_constrained_field(const ProblemSpec& problem,
                                       std::shared_ptr<const LagrangeSpace> space,
                                       std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto fixed = constrained_dofs(problem, *space);
  Eigen::VectorXd c(fixed.size());
  for (std::size_t i = 0; i < fixed.size(); ++i) c[i] = fixed[i] ? 0.0 : u(rng);
  return DiscreteField(std::move(space), c);
}

}  // namespace

TEST(FoslsAssemble, SymmetricPositiveDefinite) {
  for (const ProblemSpec& problem : {poisson(), general_problem()}) {
    for (int q = 1; q <= 2; ++q) {
      auto space = space_on(mesh_with(0, 1), q);
      const RhsSamples rhs =
          sample_rhs(space->mesh(), problem.quadrature_degree(q), problem.rhs_function());
      const FoslsSystem sys = assemble(problem, *space, rhs);
      const Eigen::MatrixXd A(sys.matrix);
      const double scale = A.cwiseAbs().maxCoeff();
      EXPECT_LE((A - A.transpose()).cwiseAbs().maxCoeff(), 1e-13 * scale);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(A);
      EXPECT_GT(eig.eigenvalues().minCoeff(), 0.0);
    }
  }
}

TEST(FoslsSolve, ZeroRhsGivesZeroSolution) {
  ProblemSpec problem = poisson();
  problem.f = [](Point) { return 0.0; };
  auto space = space_on(mesh_with(2), 1);
  const RhsSamples rhs = sample_rhs(space->mesh(), 4, problem.rhs_function());
  const DiscreteField u = solve_fosls(problem, space, rhs);
  EXPECT_EQ(u.coefficients().cwiseAbs().maxCoeff(), 0.0);
}

TEST(FoslsSolve, RejectsNonFiniteRhs) {
  ProblemSpec problem = poisson();
  problem.f = [](Point) { return std::nan(""); };
  auto space = space_on(mesh_with(0), 1);
  EXPECT_THROW(sample_rhs(space->mesh(), 4, problem.rhs_function()), std::runtime_error);
}

TEST(FoslsLsf, InterpolantConvergesAtFirstOrder) {
  const ProblemSpec problem = poisson();
  std::vector<double> h, err;
  for (int level = 2; level <= 10; level += 2) {
    auto space = space_on(mesh_with(level), 1);
    const std::size_t s = space->size();
    Eigen::VectorXd c(3 * s);
    c.segment(0, s) = interpolate(*space, [](Point x) { return std::sin(kPi * x.x) * std::sin(kPi * x.y); });
    c.segment(s, s) = interpolate(*space, [](Point x) { return kPi * std::cos(kPi * x.x) * std::sin(kPi * x.y); });
    c.segment(2 * s, s) = interpolate(*space, [](Point x) { return kPi * std::sin(kPi * x.x) * std::cos(kPi * x.y); });
    DiscreteField field(space, c);
    const RhsSamples rhs = sample_rhs(space->mesh(), 4, problem.rhs_function());
    h.push_back(1.0 / std::sqrt(static_cast<double>(space->mesh().num_leaves())));
    err.push_back(lsf(problem, field, rhs));
  }
  const double k = slope(h, err);
  EXPECT_GE(k, 0.85);
  EXPECT_LE(k, 1.15);
}

TEST(FoslsLsf, MinimizerBeatsOtherFields) {
  for (const ProblemSpec& problem : {poisson(), general_problem()}) {
    auto space = space_on(mesh_with(3), 1);
    const RhsSamples rhs = sample_rhs(space->mesh(), 4, problem.rhs_function());
    const DiscreteField u = solve_fosls(problem, space, rhs);
    const double best = lsf(problem, u, rhs);
    std::mt19937_64 rng(9);
    for (int t = 0; t < 5; ++t) {
      const DiscreteField v = random_constrained_field(problem, space, rng);
      EXPECT_LE(best, lsf(problem, v, rhs));
    }
    // Coefficient perturbations never decrease the functional.
    const auto fixed = constrained_dofs(problem, *space);
    for (std::size_t i = 0; i < fixed.size(); i += 7) {
      if (fixed[i]) continue;
      for (double d : {1e-6, -1e-6}) {
        DiscreteField w = u;
        w.coefficients()[i] += d;
        EXPECT_GE(lsf(problem, w, rhs), best * (1.0 - 1e-14));
      }
    }
  }
}

TEST(FoslsLsf, RegionAdditivity) {
  const ProblemSpec problem = general_problem();
  auto space = space_on(mesh_with(4), 2);
  const RhsSamples rhs = sample_rhs(space->mesh(), problem.quadrature_degree(2), problem.rhs_function());
  std::mt19937_64 rng(3);
  const DiscreteField v = random_constrained_field(problem, space, rng);
  const double global = lsf(problem, v, rhs);
  std::vector<std::vector<int>> parts(4);
  for (std::size_t l = 0; l < space->mesh().num_leaves(); ++l) parts[l % 4].push_back(static_cast<int>(l));
  double sum = 0.0;
  for (const auto& p : parts) sum += std::pow(lsf(problem, v, rhs, std::span<const int>(p)), 2);
  EXPECT_NEAR(sum, global * global, 1e-12 * global * global);
  EXPECT_EQ(lsf(problem, v, rhs, std::span<const int>()), 0.0);
}

TEST(FoslsLsf, NestedSpacesGiveSmallerMinimum) {
  const ProblemSpec problem = general_problem();
  double previous = 1e300;
  MeshForest m(macro(2));
  for (int level = 0; level < 4; ++level) {
    auto space = space_on(std::make_shared<const MeshForest>(m), 1);
    const RhsSamples rhs = sample_rhs(space->mesh(), 4, problem.rhs_function());
    const double value = lsf(problem, solve_fosls(problem, space, rhs), rhs);
    EXPECT_LE(value, previous * (1.0 + 1e-12));
    previous = value;
    std::vector<int> marked;
    for (std::size_t l = 0; l < m.num_leaves(); l += 2) marked.push_back(static_cast<int>(l));
    m = m.refine(marked);
  }
}

TEST(FoslsLsf, GradientMatchesNormalEquations) {
  const ProblemSpec problem = general_problem();
  auto space = space_on(mesh_with(2), 1);
  const RhsSamples rhs = sample_rhs(space->mesh(), 4, problem.rhs_function());
  const FoslsSystem sys = assemble(problem, *space, rhs);
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd x(sys.free_dofs.size()), d(sys.free_dofs.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    x[i] = u(rng);
    d[i] = u(rng);
  }
  auto F = [&](const Eigen::VectorXd& y) {
    return std::pow(lsf(problem, DiscreteField(space, sys.expand(y)), rhs), 2);
  };
  const double h = 1e-4;
  const double fd = (F(x + h * d) - F(x - h * d)) / (2 * h);
  const double exact = 2.0 * (sys.matrix * x - sys.load).dot(d);
  EXPECT_NEAR(fd, exact, 1e-6 * std::abs(exact));
}

TEST(ApplyL, ZeroFieldAndLinearCase) {
  const ProblemSpec problem = poisson();
  auto space = space_on(mesh_with(2), 1);
  DiscreteField zero(space);
  for (double v : apply_L(problem, zero, {0.3, 0.6})) EXPECT_EQ(v, 0.0);
  const std::size_t s = space->size();
  Eigen::VectorXd c = Eigen::VectorXd::Zero(3 * s);
  c.segment(0, s) = interpolate(*space, [](Point x) { return x.x; });
  c.segment(s, s).setOnes();
  DiscreteField lin(space, c);
  const Vec4 v = apply_L(problem, lin, {0.37, 0.71});
  EXPECT_NEAR(v[0], 0.0, 1e-14);
  EXPECT_NEAR(v[1], 0.0, 1e-14);
}

TEST(ApplyL, MatchesSymbolicLinearOracle) {
  // Oracle: on a P1 element, grad lambda_i = rot(v_{i+2} - v_{i+1}) / (2 area).
  const ProblemSpec problem = general_problem();
  MeshForest base(macro(2));
  auto mesh = std::make_shared<const MeshForest>(base.refine_all().refine(std::vector<int>{0, 3, 5}));
  auto space = space_on(mesh, 1);
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(-1.0, 1.0), w(0.0, 1.0);
  Eigen::VectorXd c(3 * space->size());
  for (Eigen::Index i = 0; i < c.size(); ++i) c[i] = u(rng);
  DiscreteField field(space, c);
  const std::size_t s = space->size();
  for (int t = 0; t < 100; ++t) {
    const Point x{w(rng), w(rng)};
    const Location loc = mesh->locate(x);
    const auto& vid = mesh->leaf_vertices(loc.leaf);
    std::array<Point, 3> v{};
    for (int i = 0; i < 3; ++i) v[i] = mesh->vertex(vid[i]);
    const double area2 = cross(v[1] - v[0], v[2] - v[0]);
    double p = 0, u1 = 0, u2 = 0;
    Point gp{}, gu1{}, gu2{};
    for (int i = 0; i < 3; ++i) {
      const Point e = v[(i + 2) % 3] - v[(i + 1) % 3];
      const Point grad{-e.y / area2, e.x / area2};
      const double lam = loc.bary[i];
      p += c[vid[i]] * lam;
      u1 += c[s + vid[i]] * lam;
      u2 += c[2 * s + vid[i]] * lam;
      gp = gp + c[vid[i]] * grad;
      gu1 = gu1 + c[s + vid[i]] * grad;
      gu2 = gu2 + c[2 * s + vid[i]] * grad;
    }
    const double a11 = problem.alpha(x), a22 = a11 * problem.epsilon;
    const Vec4 expected{u1 - a11 * gp.x, u2 - a22 * gp.y,
                        -(gu1.x + gu2.y) + problem.b.x * gp.x + problem.b.y * gp.y,
                        gu2.x / a22 - gu1.y / a11};
    const Vec4 got = apply_L(problem, field, x);
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(got[j], expected[j], 1e-12 * (1 + std::abs(expected[j])));
  }
}

TEST(Kernel, ZeroRhsGivesZeroPsi) {
  const ProblemSpec problem = poisson();
  auto space = space_on(mesh_with(3), 1);
  const RhsSamples rhs = sample_rhs(space->mesh(), 4, [](Point) { return Vec4{}; });
  const KernelComponent k = kernel_component(problem, space, rhs);
  EXPECT_EQ(k.psi.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Kernel, RecoversDiscreteKernelFunction) {
  ProblemSpec problem = poisson();
  problem.epsilon = 0.5;
  problem.alpha = [](Point) { return 2.0; };
  for (int q = 1; q <= 2; ++q) {
    auto space = space_on(mesh_with(3), q);
    KernelComponent target{space, interpolate(*space, [](Point x) {
                             return x.x * (1 - x.x) * x.y * (1 - x.y) * (1 + x.x);
                           })};
    const auto& rule = triangle_rule(problem.quadrature_degree(q));
    RhsSamples rhs;
    rhs.mesh = &space->mesh();
    rhs.quad_degree = problem.quadrature_degree(q);
    for (std::size_t l = 0; l < space->mesh().num_leaves(); ++l) {
      for (const auto& qp : rule) {
        rhs.values.push_back(kernel_value_in(problem, target, static_cast<int>(l),
                                             {1 - qp.xi - qp.eta, qp.xi, qp.eta}));
      }
    }
    const KernelComponent k = kernel_component(problem, space, rhs);
    EXPECT_LE((k.psi - target.psi).cwiseAbs().maxCoeff(), 1e-9);
    // The corrected right-hand side is then zero.
    const DiscreteField zero(space);
    EXPECT_LE(modified_lsf(problem, zero, rhs, k), 1e-9);
  }
}

TEST(Kernel, KernelIsOrthogonalToRangeOfL) {
  // (L v, (A^{-1} rot psi, 0, psi)) = 0 for constant A: the analytic reason the
  // curl row uses A^{-1} u.
  ProblemSpec problem = general_problem();
  problem.alpha = [](Point) { return 3.0; };
  auto space = space_on(mesh_with(3), 2);
  std::mt19937_64 rng(5);
  const DiscreteField v = random_constrained_field(problem, space, rng);
  KernelComponent k{space, interpolate(*space, [](Point x) {
                      return std::sin(kPi * x.x) * x.y * (1 - x.y);
                    })};
  for (std::size_t d = 0; d < space->size(); ++d) {
    if (space->dof_sides(static_cast<int>(d))) k.psi[d] = 0.0;
  }
  const auto& rule = triangle_rule(6);
  double inner = 0.0, scale = 0.0;
  for (std::size_t l = 0; l < space->mesh().num_leaves(); ++l) {
    const double area = space->mesh().geometry(static_cast<int>(l)).area();
    for (const auto& qp : rule) {
      const Barycentric b{1 - qp.xi - qp.eta, qp.xi, qp.eta};
      const Vec4 lv = apply_L_in(problem, v, static_cast<int>(l), b);
      const Vec4 phi = kernel_value_in(problem, k, static_cast<int>(l), b);
      for (int j = 0; j < 4; ++j) {
        inner += 2 * area * qp.weight * lv[j] * phi[j];
        scale += 2 * area * qp.weight * std::abs(lv[j] * phi[j]);
      }
    }
  }
  EXPECT_LE(std::abs(inner), 1e-12 * scale);
}

TEST(Kernel, ResidualOrthogonality) {
  const ProblemSpec problem = general_problem();
  auto space = space_on(mesh_with(3), 1);
  const RhsSamples rhs = sample_rhs(space->mesh(), 4, [](Point x) {
    return Vec4{std::sin(3 * x.x), x.y, 1.0, std::cos(2 * x.y)};
  });
  const KernelComponent k = kernel_component(problem, space, rhs);
  const RhsSamples res = subtract_kernel(problem, rhs, k);
  const auto& rule = triangle_rule(4);
  double max_moment = 0.0, scale = 0.0;
  for (std::size_t d = 0; d < space->size(); ++d) {
    if (space->dof_sides(static_cast<int>(d))) continue;
    KernelComponent unit{space, Eigen::VectorXd::Zero(space->size())};
    unit.psi[d] = 1.0;
    double m = 0.0, sc = 0.0;
    for (std::size_t l = 0; l < space->mesh().num_leaves(); ++l) {
      const double area = space->mesh().geometry(static_cast<int>(l)).area();
      for (std::size_t q = 0; q < rule.size(); ++q) {
        const Barycentric b{1 - rule[q].xi - rule[q].eta, rule[q].xi, rule[q].eta};
        const Vec4 phi = kernel_value_in(problem, unit, static_cast<int>(l), b);
        const Vec4& r = res.values[l * rule.size() + q];
        for (int j = 0; j < 4; ++j) {
          m += 2 * area * rule[q].weight * r[j] * phi[j];
          sc += 2 * area * rule[q].weight * std::abs(rhs.values[l * rule.size() + q][j] * phi[j]);
        }
      }
    }
    max_moment = std::max(max_moment, std::abs(m));
    scale = std::max(scale, sc);
  }
  EXPECT_LE(max_moment, 1e-10 * scale);
}

TEST(ModifiedLsf, ReducesToLsfAndObeysTriangleInequality) {
  const ProblemSpec problem = general_problem();
  auto space = space_on(mesh_with(3), 1);
  const RhsSamples rhs = sample_rhs(space->mesh(), 4, [](Point x) {
    return Vec4{x.x, -x.y, 2.0, x.x * x.y};
  });
  std::mt19937_64 rng(1);
  const DiscreteField v = random_constrained_field(problem, space, rng);
  const KernelComponent zero{space, Eigen::VectorXd::Zero(space->size())};
  EXPECT_DOUBLE_EQ(modified_lsf(problem, v, rhs, zero), lsf(problem, v, rhs));
  const KernelComponent k = kernel_component(problem, space, rhs);
  const DiscreteField null_field(space);
  const double phi_norm = lsf(problem, null_field, subtract_kernel(problem, sample_rhs(space->mesh(), 4, [](Point) { return Vec4{}; }), k));
  EXPECT_LE(modified_lsf(problem, v, rhs, k), lsf(problem, v, rhs) + phi_norm + 1e-12);
}

TEST(ModifiedLsf, RejectsMeshMismatch) {
  const ProblemSpec problem = poisson();
  auto a = space_on(mesh_with(1), 1);
  auto b = space_on(mesh_with(2), 1);
  const RhsSamples rhs = sample_rhs(a->mesh(), 4, problem.rhs_function());
  const KernelComponent k{b, Eigen::VectorXd::Zero(b->size())};
  EXPECT_THROW(modified_lsf(problem, DiscreteField(a), rhs, k), std::invalid_argument);
}
