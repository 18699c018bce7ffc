#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "nird/geometry.hpp"

namespace nird {

/// Boundary side markers of the unit square.
enum class Side : int { West = 0, East = 1, South = 2, North = 3 };
inline constexpr int kInteriorEdge = -1;

/// Fixed coarse triangulation that roots every mesh of an experiment.
///
/// Triangles are stored as (newest, a, b): the refinement edge is a-b,
/// opposite the newest vertex.  Edge k of a triangle is the edge opposite
/// its vertex k, so edge 0 is always the refinement edge.
struct MacroMesh {
  std::vector<Point> vertices;
  std::vector<std::array<int, 3>> triangles;
  /// Side marker (a Side cast to int) per triangle edge, kInteriorEdge inside.
  std::vector<std::array<int, 3>> boundary;

  /// Uniform n x n grid of squares on [0,1]^2, each split along its
  /// (0,0)-(1,1) diagonal; the hypotenuse is the refinement edge.
  static MacroMesh unit_square(int n);

  /// Throws std::invalid_argument when the triangulation is not a valid,
  /// compatibly labelled cover of the unit square.
  void validate() const;

  bool operator==(const MacroMesh&) const = default;
};

struct Location {
  int leaf = -1;
  Barycentric bary{};
};

/// Conforming triangulation stored as a newest-vertex-bisection forest over
/// a shared MacroMesh.
///
/// Values are immutable: refine() and mesh_union() return new forests.  Node,
/// leaf and vertex numbering is canonical (depth-first, child 0 first, macro
/// order; macro roots are nodes 0..M-1), so two forests with the same leaf
/// set are identical member-wise.
class MeshForest {
 public:
  struct Node {
    int parent = -1;
    std::array<int, 2> child{-1, -1};
    std::array<int, 3> v{};       // (newest, a, b)
    std::array<int, 3> marker{};  // side marker of the edge opposite v[k]
    int level = 0;
    int macro = 0;

    bool is_leaf() const { return child[0] < 0; }
  };

  explicit MeshForest(std::shared_ptr<const MacroMesh> macro);

  const MacroMesh& macro() const { return *macro_; }
  const std::shared_ptr<const MacroMesh>& macro_ptr() const { return macro_; }

  std::size_t num_leaves() const { return leaves_.size(); }
  std::size_t num_vertices() const { return coords_.size(); }
  std::size_t num_nodes() const { return nodes_.size(); }

  const Node& node(int id) const { return nodes_[id]; }
  int leaf_node(int leaf) const { return leaves_[leaf]; }
  /// Leaf id of a tree node, or -1 for interior nodes.
  int node_leaf(int node) const { return node_leaf_[node]; }

  const std::array<int, 3>& leaf_vertices(int leaf) const { return nodes_[leaves_[leaf]].v; }
  const std::array<int, 3>& leaf_markers(int leaf) const { return nodes_[leaves_[leaf]].marker; }
  int leaf_level(int leaf) const { return nodes_[leaves_[leaf]].level; }
  int leaf_macro(int leaf) const { return nodes_[leaves_[leaf]].macro; }
  Point vertex(int v) const { return coords_[v]; }
  const std::vector<Point>& vertices() const { return coords_; }

  ElementGeometry geometry(int leaf) const;
  ElementGeometry node_geometry(int node) const;

  /// Leaf containing x with its barycentric coordinates.  Points on shared
  /// edges or vertices resolve to the lowest leaf id.  Throws
  /// std::invalid_argument for points outside the domain.
  Location locate(Point x) const;

  /// Bisects every marked leaf at least once and closes the result to
  /// conformity.  Marked ids must be valid leaves.
  MeshForest refine(std::span<const int> marked) const;
  /// Uniform refinement (every leaf bisected once, plus closure).
  MeshForest refine_all() const;

  /// For each leaf of `finer`, the leaf of *this that contains it.  Throws
  /// std::invalid_argument when `finer` does not refine *this.
  std::vector<int> containing_leaves(const MeshForest& finer) const;
  bool is_refined_by(const MeshForest& finer) const;

  /// Leaves sharing at least a vertex with each leaf (excluding itself),
  /// sorted ascending.
  std::vector<std::vector<int>> vertex_neighbors() const;

  bool same_leaves(const MeshForest& other) const;

 private:
  friend MeshForest mesh_union(const MeshForest& a, const MeshForest& b);
  friend class ForestBuilder;

  MeshForest() = default;

  std::shared_ptr<const MacroMesh> macro_;
  std::vector<Node> nodes_;
  std::vector<Point> coords_;
  std::vector<int> leaves_;
  std::vector<int> node_leaf_;
};

/// Node-wise union of two forests over the same macro mesh, closed to
/// conformity.  Throws std::invalid_argument on macro mismatch.
MeshForest mesh_union(const MeshForest& a, const MeshForest& b);

/// True when no vertex of any leaf lies strictly inside an edge of another
/// leaf (the hanging-node criterion).
bool is_conforming(const MeshForest& mesh);

/// Text dump: header "NIRD-MESH v1", then "v x y" per vertex and
/// "t i j k level tag" per leaf (tag = macro triangle id).
void write_mesh(std::ostream& out, const MeshForest& mesh);
/// Rebuilds a forest from a dump produced by write_mesh over `macro`.
MeshForest read_mesh(std::istream& in, std::shared_ptr<const MacroMesh> macro);

}  // namespace nird
