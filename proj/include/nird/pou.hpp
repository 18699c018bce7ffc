#pragma once

#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nird/mesh.hpp"

namespace nird {

/// Assignment of every leaf of the preprocessing mesh to one of P ranks.
struct HomePartition {
  std::shared_ptr<const MeshForest> mesh;
  int ranks = 1;
  std::vector<int> owner;                // per coarse leaf
  std::vector<std::vector<int>> domains; // leaves of each rank, ascending
};

/// Index of p along a Hilbert curve on a 2^order x 2^order grid over [0,1]^2.
std::uint64_t hilbert_index(Point p, int order = 16);

/// Cut positions c_1 < ... < c_{P-1} splitting `loads` (in sweep order) into
/// P nonempty contiguous runs; cut r is the admissible prefix end closest to
/// r * total / P (ties to the smaller position).  Zero total load falls back
/// to unit loads.
std::vector<std::size_t> greedy_cuts(std::span<const double> loads, int parts);

/// Leaves ordered along the Hilbert curve of their centroids, then cut
/// greedily so that each rank carries about sum(e^2) / P.  Throws
/// std::invalid_argument when P is not a power of two or exceeds the leaf count.
HomePartition partition_home_domains(std::shared_ptr<const MeshForest> mesh,
                                     std::span<const double> errors, int parts);

/// CSV with header "element,rank".
void write_partition(std::ostream& out, const HomePartition& partition);

enum class PouKind { Discontinuous, C0, Cinf };

std::string to_string(PouKind kind);
/// Accepts "discts", "discontinuous", "c0" and "cinf".
PouKind parse_pou_kind(const std::string& text);

/// Value of the exponential bump exp(-(l1 l2 l3)^(-1/2)), zero when any
/// coordinate is nonpositive.
double bump(const Barycentric& l);

/// Characteristic functions chi_l over the home domains.
class PartitionOfUnity {
 public:
  PartitionOfUnity(HomePartition partition, PouKind kind);

  PouKind kind() const { return kind_; }
  const HomePartition& partition() const { return partition_; }
  const MeshForest& mesh() const { return *partition_.mesh; }
  int ranks() const { return partition_.ranks; }

  double chi(int rank, Point x) const;
  /// All nonzero (rank, chi) pairs at x, ascending by rank.
  std::vector<std::pair<int, double>> chi_all(Point x) const;
  /// chi_rank at x when x is already known to lie in `coarse_leaf`.
  double chi_in(int rank, int coarse_leaf, Point x) const;

  /// Ranks whose chi may be nonzero on a coarse leaf, ascending.
  const std::vector<int>& support_ranks(int coarse_leaf) const { return support_[coarse_leaf]; }
  /// Coarse leaves on which chi_rank may be nonzero, ascending.
  const std::vector<int>& support_leaves(int rank) const { return support_leaves_[rank]; }

  /// Extension distance of the bump on each coarse leaf (Cinf only).
  double d_min(int coarse_leaf) const { return d_min_[coarse_leaf]; }

 private:
  HomePartition partition_;
  PouKind kind_;
  std::vector<std::vector<int>> neighbors_;
  std::vector<std::vector<int>> support_;
  std::vector<std::vector<int>> support_leaves_;
  // C0: ranks incident to each vertex.
  std::vector<std::vector<int>> vertex_ranks_;
  // Cinf: extended triangles and the leaves whose bump may reach each leaf.
  std::vector<double> d_min_;
  std::vector<ElementGeometry> extended_;
  std::vector<std::vector<int>> candidates_;
};

}  // namespace nird
