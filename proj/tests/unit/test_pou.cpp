#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "nird/pou.hpp"

using namespace nird;

namespace {

std::shared_ptr<const MeshForest> graded_mesh(int steps) {
  MeshForest m(std::make_shared<const MacroMesh>(MacroMesh::unit_square(2)));
  m = m.refine_all().refine_all();
  for (int s = 0; s < steps; ++s) {
    std::vector<int> marked;
    for (std::size_t l = 0; l < m.num_leaves(); ++l) {
      const Point c = m.geometry(static_cast<int>(l)).centroid();
      if (c.x + c.y < 0.6) marked.push_back(static_cast<int>(l));
    }
    m = m.refine(marked);
  }
  return std::make_shared<const MeshForest>(m);
}

double halton(int i, int base) {
  double f = 1.0, r = 0.0;
  for (; i > 0; i /= base) {
    f /= base;
    r += f * (i % base);
  }
  return r;
}

// Optimal max-load over all contiguous splits into `parts` nonempty runs.
double best_contiguous(const std::vector<double>& loads, int parts, std::size_t from = 0) {
  const std::size_t n = loads.size();
  if (parts == 1) {
    double s = 0.0;
    for (std::size_t i = from; i < n; ++i) s += loads[i];
    return s;
  }
  double best = std::numeric_limits<double>::infinity(), run = 0.0;
  for (std::size_t end = from + 1; end + parts - 1 <= n; ++end) {
    run += loads[end - 1];
    best = std::min(best, std::max(run, best_contiguous(loads, parts - 1, end)));
  }
  return best;
}

// Shepard value from every coarse leaf, no candidate pruning.
double cinf_brute_force(const PartitionOfUnity& pou, int rank, Point x) {
  const MeshForest& m = pou.mesh();
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < m.num_leaves(); ++k) {
    const double w = bump(extended_barycentric(m.geometry(static_cast<int>(k)),
                                               pou.d_min(static_cast<int>(k)), x));
    den += w;
    if (pou.partition().owner[k] == rank) num += w;
  }
  return num / den;
}

}  // namespace

TEST(Hilbert, FirstOrderVisitsQuadrantsInOrder) {
  EXPECT_EQ(hilbert_index({0.25, 0.25}, 1), 0u);
  EXPECT_EQ(hilbert_index({0.25, 0.75}, 1), 1u);
  EXPECT_EQ(hilbert_index({0.75, 0.75}, 1), 2u);
  EXPECT_EQ(hilbert_index({0.75, 0.25}, 1), 3u);
}

TEST(Hilbert, ConsecutiveCellsAreAdjacent) {
  const int order = 4, n = 16;
  std::vector<std::pair<int, int>> cell(n * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      cell[hilbert_index({(i + 0.5) / n, (j + 0.5) / n}, order)] = {i, j};
    }
  }
  for (int d = 1; d < n * n; ++d) {
    EXPECT_EQ(std::abs(cell[d].first - cell[d - 1].first) +
                  std::abs(cell[d].second - cell[d - 1].second),
              1);
  }
}

TEST(GreedyCuts, WithinTwiceTheOptimum) {
  const std::vector<double> loads{4, 1, 1, 1, 1, 1, 1, 2};
  const auto cuts = greedy_cuts(loads, 4);
  ASSERT_EQ(cuts.size(), 3u);
  std::vector<std::size_t> b{0};
  b.insert(b.end(), cuts.begin(), cuts.end());
  b.push_back(loads.size());
  double worst = 0.0;
  for (std::size_t r = 0; r + 1 < b.size(); ++r) {
    ASSERT_LT(b[r], b[r + 1]);
    double s = 0.0;
    for (std::size_t i = b[r]; i < b[r + 1]; ++i) s += loads[i];
    worst = std::max(worst, s);
  }
  const double opt = best_contiguous(loads, 4);
  EXPECT_EQ(opt, 4.0);
  EXPECT_LE(worst, 2.0 * opt);
}

TEST(GreedyCuts, RandomLoadsNonemptyAndBounded) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> loads(4 + rng() % 8);
    for (double& v : loads) v = u(rng);
    const int parts = 1 + static_cast<int>(rng() % 4);
    const auto cuts = greedy_cuts(loads, parts);
    std::size_t prev = 0;
    for (std::size_t c : cuts) {
      EXPECT_GT(c, prev);
      prev = c;
    }
    EXPECT_LT(prev, loads.size());
  }
  EXPECT_THROW(greedy_cuts(std::vector<double>{1.0}, 2), std::invalid_argument);
}

TEST(Partition, TrivialCases) {
  auto macro = std::make_shared<const MacroMesh>(MacroMesh::unit_square(1));
  auto four = std::make_shared<const MeshForest>(MeshForest(macro).refine_all());
  ASSERT_EQ(four->num_leaves(), 4u);
  const std::vector<double> e(4, 1.0);
  const HomePartition one = partition_home_domains(four, e, 1);
  EXPECT_EQ(one.owner, std::vector<int>(4, 0));
  const HomePartition each = partition_home_domains(four, e, 4);
  for (const auto& d : each.domains) EXPECT_EQ(d.size(), 1u);
  EXPECT_THROW(partition_home_domains(four, e, 8), std::invalid_argument);
  EXPECT_THROW(partition_home_domains(four, e, 3), std::invalid_argument);
  // Two macro triangles, P = 2: one macro subtree each.
  auto two = std::make_shared<const MeshForest>(MeshForest(macro));
  const HomePartition halves = partition_home_domains(two, std::vector<double>(2, 1.0), 2);
  EXPECT_NE(halves.owner[0], halves.owner[1]);
}

TEST(Partition, EveryLeafOwnedAndDomainsConnected) {
  const auto mesh = graded_mesh(3);
  std::vector<double> e(mesh->num_leaves());
  for (std::size_t l = 0; l < e.size(); ++l) e[l] = mesh->geometry(static_cast<int>(l)).area();
  const HomePartition p = partition_home_domains(mesh, e, 8);
  std::size_t total = 0;
  const auto nb = mesh->vertex_neighbors();
  for (int r = 0; r < 8; ++r) {
    ASSERT_FALSE(p.domains[r].empty());
    total += p.domains[r].size();
    // Connectivity through shared vertices.
    std::set<int> seen{p.domains[r][0]};
    std::vector<int> stack{p.domains[r][0]};
    while (!stack.empty()) {
      const int k = stack.back();
      stack.pop_back();
      for (int j : nb[k]) {
        if (p.owner[j] == r && seen.insert(j).second) stack.push_back(j);
      }
    }
    EXPECT_EQ(seen.size(), p.domains[r].size()) << r;
  }
  EXPECT_EQ(total, mesh->num_leaves());
  std::ostringstream csv;
  write_partition(csv, p);
  EXPECT_EQ(csv.str().substr(0, 13), "element,rank\n");
}

TEST(Bump, CentroidValue) {
  // exp(-sqrt(27)) evaluated independently in extended precision.
  EXPECT_NEAR(bump({1.0 / 3, 1.0 / 3, 1.0 / 3}), 5.537830714382473e-3, 1e-17);
  EXPECT_NEAR(std::exp(-std::sqrt(27.0)), bump({1.0 / 3, 1.0 / 3, 1.0 / 3}), 1e-18);
  EXPECT_EQ(bump({0.0, 0.5, 0.5}), 0.0);
  EXPECT_EQ(bump({-0.1, 0.6, 0.5}), 0.0);
}

TEST(Pou, C0FourDomainVertexGetsQuarter) {
  auto mesh = std::make_shared<const MeshForest>(
      MeshForest(std::make_shared<const MacroMesh>(MacroMesh::unit_square(2))));
  HomePartition p{mesh, 4, std::vector<int>(mesh->num_leaves()), std::vector<std::vector<int>>(4)};
  for (std::size_t l = 0; l < mesh->num_leaves(); ++l) {
    const Point c = mesh->geometry(static_cast<int>(l)).centroid();
    p.owner[l] = (c.x > 0.5 ? 1 : 0) + (c.y > 0.5 ? 2 : 0);
    p.domains[p.owner[l]].push_back(static_cast<int>(l));
  }
  const PartitionOfUnity pou(p, PouKind::C0);
  for (int r = 0; r < 4; ++r) EXPECT_NEAR(pou.chi(r, {0.5, 0.5}), 0.25, 1e-15);
  EXPECT_NEAR(pou.chi(0, {0.0, 0.0}), 1.0, 1e-15);
  EXPECT_NEAR(pou.chi(0, {0.5, 0.0}), 0.5, 1e-15);
}

TEST(Pou, SumSupportAndSignAtQuasiRandomProbes) {
  const auto mesh = graded_mesh(2);
  std::vector<double> e(mesh->num_leaves(), 1.0);
  const HomePartition part = partition_home_domains(mesh, e, 8);
  const auto nb = mesh->vertex_neighbors();
  for (PouKind kind : {PouKind::Discontinuous, PouKind::C0, PouKind::Cinf}) {
    const PartitionOfUnity pou(part, kind);
    const double tol = kind == PouKind::Cinf ? 1e-10 : 1e-12;
    int violations = 0;
    for (int i = 1; i <= 10000; ++i) {
      const Point x{halton(i, 2), halton(i, 3)};
      const int leaf = mesh->locate(x).leaf;
      double sum = 0.0;
      for (int r = 0; r < 8; ++r) {
        const double c = pou.chi(r, x);
        EXPECT_GE(c, -1e-14);
        sum += c;
        if (c != 0.0) {
          bool near = part.owner[leaf] == r;
          for (int j : nb[leaf]) near = near || part.owner[j] == r;
          if (!near) ++violations;
        }
      }
      ASSERT_NEAR(sum, 1.0, tol) << to_string(kind) << " at " << x.x << "," << x.y;
    }
    EXPECT_EQ(violations, 0) << to_string(kind);
  }
}

TEST(Pou, DiscontinuousIsIndicator) {
  const auto mesh = graded_mesh(1);
  const HomePartition part =
      partition_home_domains(mesh, std::vector<double>(mesh->num_leaves(), 1.0), 4);
  const PartitionOfUnity pou(part, PouKind::Discontinuous);
  for (std::size_t k = 0; k < mesh->num_leaves(); ++k) {
    const Point c = mesh->geometry(static_cast<int>(k)).centroid();
    for (int r = 0; r < 4; ++r) EXPECT_EQ(pou.chi(r, c), part.owner[k] == r ? 1.0 : 0.0);
  }
}

TEST(Pou, CinfMatchesBruteForceShepard) {
  const auto mesh = graded_mesh(2);
  const HomePartition part =
      partition_home_domains(mesh, std::vector<double>(mesh->num_leaves(), 1.0), 4);
  const PartitionOfUnity pou(part, PouKind::Cinf);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 300; ++i) {
    const Point x{u(rng), u(rng)};
    for (int r = 0; r < 4; ++r) {
      EXPECT_NEAR(pou.chi(r, x), cinf_brute_force(pou, r, x), 1e-12);
    }
  }
}

TEST(Pou, CinfGradientContinuousAcrossCoarseEdges) {
  const auto mesh = graded_mesh(1);
  const HomePartition part =
      partition_home_domains(mesh, std::vector<double>(mesh->num_leaves(), 1.0), 4);
  const PartitionOfUnity pou(part, PouKind::Cinf);
  const double h = 1e-6;
  auto grad = [&](int r, Point x) {
    return Point{(pou.chi(r, {x.x + h, x.y}) - pou.chi(r, {x.x - h, x.y})) / (2 * h),
                 (pou.chi(r, {x.x, x.y + h}) - pou.chi(r, {x.x, x.y - h})) / (2 * h)};
  };
  double worst = 0.0;
  for (std::size_t k = 0; k < mesh->num_leaves(); ++k) {
    const auto& v = mesh->geometry(static_cast<int>(k)).vertices();
    for (int e = 0; e < 3; ++e) {
      const Point a = v[(e + 1) % 3], b = v[(e + 2) % 3];
      const Point m = midpoint(a, b);
      if (m.x < 0.01 || m.x > 0.99 || m.y < 0.01 || m.y > 0.99) continue;
      const Point t = b - a;
      const Point nrm = (1.0 / norm(t)) * Point{-t.y, t.x};
      for (int r = 0; r < 4; ++r) {
        // Smooth variation grows with the probe separation, a jump does
        // not: 2 D(s) - D(2s) isolates the jump.
        const double d1 = norm(grad(r, m + 3 * h * nrm) - grad(r, m - 3 * h * nrm));
        const double d2 = norm(grad(r, m + 6 * h * nrm) - grad(r, m - 6 * h * nrm));
        worst = std::max(worst, std::abs(2 * d1 - d2));
      }
    }
  }
  EXPECT_LT(worst, 1e-3);
}

TEST(Pou, ParseKind) {
  EXPECT_EQ(parse_pou_kind("discts"), PouKind::Discontinuous);
  EXPECT_EQ(parse_pou_kind("cinf"), PouKind::Cinf);
  EXPECT_THROW(parse_pou_kind("c1"), std::invalid_argument);
}
