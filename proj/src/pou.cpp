#include "nird/pou.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace nird {

std::uint64_t hilbert_index(Point p, int order) {
  const std::uint64_t n = std::uint64_t{1} << order;
  auto cell = [n](double t) {
    const double c = std::clamp(t, 0.0, 1.0) * static_cast<double>(n);
    return std::min(static_cast<std::uint64_t>(c), n - 1);
  };
  std::uint64_t x = cell(p.x), y = cell(p.y), d = 0;
  for (std::uint64_t s = n / 2; s > 0; s /= 2) {
    const std::uint64_t rx = (x & s) ? 1 : 0;
    const std::uint64_t ry = (y & s) ? 1 : 0;
    d += s * s * ((3 * rx) ^ ry);
    if (ry == 0) {
      if (rx == 1) {
        x = n - 1 - x;
        y = n - 1 - y;
      }
      std::swap(x, y);
    }
  }
  return d;
}

std::vector<std::size_t> greedy_cuts(std::span<const double> loads, int parts) {
  const std::size_t n = loads.size();
  if (parts < 1 || static_cast<std::size_t>(parts) > n) {
    throw std::invalid_argument("greedy_cuts: need 1 <= parts <= number of loads");
  }
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + loads[i];
  if (prefix[n] <= 0.0) {
    for (std::size_t i = 0; i <= n; ++i) prefix[i] = static_cast<double>(i);
  }
  const double total = prefix[n];
  std::vector<std::size_t> cuts;
  std::size_t prev = 0;
  for (int r = 1; r < parts; ++r) {
    const double target = total * r / parts;
    const std::size_t lo = prev + 1;
    const std::size_t hi = n - static_cast<std::size_t>(parts - r);
    std::size_t best = lo;
    for (std::size_t c = lo + 1; c <= hi; ++c) {
      if (std::abs(prefix[c] - target) < std::abs(prefix[best] - target)) best = c;
    }
    cuts.push_back(best);
    prev = best;
  }
  return cuts;
}

HomePartition partition_home_domains(std::shared_ptr<const MeshForest> mesh,
                                     std::span<const double> errors, int parts) {
  const std::size_t n = mesh->num_leaves();
  if (parts < 1 || (parts & (parts - 1)) != 0) {
    throw std::invalid_argument("partition_home_domains: P must be a power of two");
  }
  if (static_cast<std::size_t>(parts) > n) {
    throw std::invalid_argument("partition_home_domains: P exceeds the element count");
  }
  if (errors.size() != n) throw std::invalid_argument("partition_home_domains: error size");

  std::vector<std::uint64_t> key(n);
  for (std::size_t l = 0; l < n; ++l) {
    key[l] = hilbert_index(mesh->geometry(static_cast<int>(l)).centroid());
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return key[a] < key[b]; });

  std::vector<double> loads(n);
  for (std::size_t i = 0; i < n; ++i) loads[i] = errors[order[i]] * errors[order[i]];
  std::vector<std::size_t> bounds = greedy_cuts(loads, parts);
  bounds.insert(bounds.begin(), 0);
  bounds.push_back(n);

  HomePartition out{std::move(mesh), parts, std::vector<int>(n, 0),
                    std::vector<std::vector<int>>(parts)};
  for (int r = 0; r < parts; ++r) {
    for (std::size_t i = bounds[r]; i < bounds[r + 1]; ++i) out.owner[order[i]] = r;
  }
  for (std::size_t l = 0; l < n; ++l) out.domains[out.owner[l]].push_back(static_cast<int>(l));
  return out;
}

void write_partition(std::ostream& out, const HomePartition& partition) {
  out << "element,rank\n";
  for (std::size_t l = 0; l < partition.owner.size(); ++l) {
    out << l << ',' << partition.owner[l] << '\n';
  }
}

std::string to_string(PouKind kind) {
  switch (kind) {
    case PouKind::Discontinuous: return "discts";
    case PouKind::C0: return "c0";
    case PouKind::Cinf: return "cinf";
  }
  return "?";
}

PouKind parse_pou_kind(const std::string& text) {
  if (text == "discts" || text == "discontinuous") return PouKind::Discontinuous;
  if (text == "c0") return PouKind::C0;
  if (text == "cinf") return PouKind::Cinf;
  throw std::invalid_argument("unknown PoU kind: " + text);
}

double bump(const Barycentric& l) {
  if (!(l[0] > 0.0 && l[1] > 0.0 && l[2] > 0.0)) return 0.0;
  return std::exp(-1.0 / std::sqrt(l[0] * l[1] * l[2]));
}

namespace {

// Exponent of the bump (log w), -inf outside the open triangle.
double log_bump(const Barycentric& l) {
  if (!(l[0] > 0.0 && l[1] > 0.0 && l[2] > 0.0)) {
    return -std::numeric_limits<double>::infinity();
  }
  return -1.0 / std::sqrt(l[0] * l[1] * l[2]);
}

void sorted_unique(std::vector<int>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

}  // namespace

PartitionOfUnity::PartitionOfUnity(HomePartition partition, PouKind kind)
    : partition_(std::move(partition)), kind_(kind) {
  const MeshForest& m = *partition_.mesh;
  const std::size_t n = m.num_leaves();
  if (partition_.owner.size() != n) throw std::invalid_argument("PartitionOfUnity: owner size");
  neighbors_ = m.vertex_neighbors();

  support_.assign(n, {});
  for (std::size_t k = 0; k < n; ++k) {
    support_[k].push_back(partition_.owner[k]);
    if (kind_ != PouKind::Discontinuous) {
      for (int j : neighbors_[k]) support_[k].push_back(partition_.owner[j]);
    }
    sorted_unique(support_[k]);
  }
  support_leaves_.assign(partition_.ranks, {});
  for (std::size_t k = 0; k < n; ++k) {
    for (int r : support_[k]) support_leaves_[r].push_back(static_cast<int>(k));
  }

  if (kind_ == PouKind::C0) {
    vertex_ranks_.assign(m.num_vertices(), {});
    for (std::size_t k = 0; k < n; ++k) {
      for (int v : m.leaf_vertices(static_cast<int>(k))) {
        vertex_ranks_[v].push_back(partition_.owner[k]);
      }
    }
    for (auto& r : vertex_ranks_) sorted_unique(r);
  }

  if (kind_ == PouKind::Cinf) {
    d_min_.resize(n);
    extended_.resize(n);
    candidates_.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      double d = m.geometry(static_cast<int>(k)).inscribed_diameter();
      for (int j : neighbors_[k]) d = std::min(d, m.geometry(j).inscribed_diameter());
      d_min_[k] = d;
      extended_[k] = extended_triangle(m.geometry(static_cast<int>(k)), d);
    }
    // Any bump reaching leaf k belongs to k or a vertex neighbor; the
    // neighbors' neighbors are included as a margin.
    for (std::size_t k = 0; k < n; ++k) {
      std::vector<int>& c = candidates_[k];
      c.push_back(static_cast<int>(k));
      for (int j : neighbors_[k]) {
        c.push_back(j);
        for (int i : neighbors_[j]) c.push_back(i);
      }
      sorted_unique(c);
    }
  }
}

double PartitionOfUnity::chi_in(int rank, int coarse_leaf, Point x) const {
  const MeshForest& m = *partition_.mesh;
  switch (kind_) {
    case PouKind::Discontinuous:
      return partition_.owner[coarse_leaf] == rank ? 1.0 : 0.0;
    case PouKind::C0: {
      const Barycentric l = m.geometry(coarse_leaf).barycentric(x);
      const auto& v = m.leaf_vertices(coarse_leaf);
      double s = 0.0;
      for (int i = 0; i < 3; ++i) {
        const auto& r = vertex_ranks_[v[i]];
        if (std::binary_search(r.begin(), r.end(), rank)) {
          s += std::max(l[i], 0.0) / static_cast<double>(r.size());
        }
      }
      return s;
    }
    case PouKind::Cinf: {
      const auto& sup = support_[coarse_leaf];
      if (!std::binary_search(sup.begin(), sup.end(), rank)) return 0.0;
      const auto& cand = candidates_[coarse_leaf];
      std::vector<double> e(cand.size());
      double top = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < cand.size(); ++i) {
        e[i] = log_bump(extended_[cand[i]].barycentric(x));
        top = std::max(top, e[i]);
      }
      if (!std::isfinite(top)) throw std::logic_error("Shepard weights vanish");
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < cand.size(); ++i) {
        const double w = std::exp(e[i] - top);
        den += w;
        if (partition_.owner[cand[i]] == rank) num += w;
      }
      return num / den;
    }
  }
  return 0.0;
}

double PartitionOfUnity::chi(int rank, Point x) const {
  return chi_in(rank, partition_.mesh->locate(x).leaf, x);
}

std::vector<std::pair<int, double>> PartitionOfUnity::chi_all(Point x) const {
  const int leaf = partition_.mesh->locate(x).leaf;
  std::vector<std::pair<int, double>> out;
  for (int r : support_[leaf]) {
    const double v = chi_in(r, leaf, x);
    if (v != 0.0) out.emplace_back(r, v);
  }
  return out;
}

}  // namespace nird
