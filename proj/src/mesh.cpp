#include "nird/mesh.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>

namespace nird {

namespace {

std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

// Edge k of a node is opposite vertex k.
std::uint64_t node_edge(const MeshForest::Node& n, int k) {
  return edge_key(n.v[(k + 1) % 3], n.v[(k + 2) % 3]);
}

Barycentric bary_of(Point a, Point b, Point c, Point x) {
  const double det = cross(b - a, c - a);
  const double l1 = cross(x - a, c - a) / det;
  const double l2 = cross(b - a, x - a) / det;
  return {1.0 - l1 - l2, l1, l2};
}

double min_of(const Barycentric& l) { return std::min({l[0], l[1], l[2]}); }

}  // namespace

// ---------------------------------------------------------------------------
// MacroMesh

MacroMesh MacroMesh::unit_square(int n) {
  if (n < 1) throw std::invalid_argument("MacroMesh::unit_square: n must be >= 1");
  MacroMesh m;
  const int stride = n + 1;
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i <= n; ++i) {
      m.vertices.push_back({static_cast<double>(i) / n, static_cast<double>(j) / n});
    }
  }
  const int west = static_cast<int>(Side::West);
  const int east = static_cast<int>(Side::East);
  const int south = static_cast<int>(Side::South);
  const int north = static_cast<int>(Side::North);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int a = j * stride + i;
      const int b = a + 1;
      const int c = a + stride + 1;
      const int d = a + stride;
      m.triangles.push_back({b, c, a});
      m.boundary.push_back({kInteriorEdge, j == 0 ? south : kInteriorEdge,
                            i == n - 1 ? east : kInteriorEdge});
      m.triangles.push_back({d, a, c});
      m.boundary.push_back({kInteriorEdge, j == n - 1 ? north : kInteriorEdge,
                            i == 0 ? west : kInteriorEdge});
    }
  }
  return m;
}

void MacroMesh::validate() const {
  if (triangles.empty()) throw std::invalid_argument("MacroMesh: no triangles");
  if (boundary.size() != triangles.size()) {
    throw std::invalid_argument("MacroMesh: boundary tag count mismatch");
  }
  std::unordered_map<std::uint64_t, std::vector<std::pair<int, int>>> edges;
  double total_area = 0.0;
  for (std::size_t t = 0; t < triangles.size(); ++t) {
    const auto& tri = triangles[t];
    for (int v : tri) {
      if (v < 0 || static_cast<std::size_t>(v) >= vertices.size()) {
        throw std::invalid_argument("MacroMesh: vertex index out of range");
      }
    }
    const double area =
        0.5 * cross(vertices[tri[1]] - vertices[tri[0]], vertices[tri[2]] - vertices[tri[0]]);
    if (!(area > 0.0)) throw std::invalid_argument("MacroMesh: non-positive triangle area");
    total_area += area;
    for (int k = 0; k < 3; ++k) {
      edges[edge_key(tri[(k + 1) % 3], tri[(k + 2) % 3])].emplace_back(static_cast<int>(t), k);
    }
  }
  if (std::abs(total_area - 1.0) > 1e-12) {
    throw std::invalid_argument("MacroMesh: triangles do not cover the unit square");
  }
  for (const auto& [key, users] : edges) {
    if (users.size() == 1) {
      const auto [t, k] = users[0];
      if (boundary[t][k] < 0) throw std::invalid_argument("MacroMesh: untagged boundary edge");
    } else if (users.size() == 2) {
      const auto [t0, k0] = users[0];
      const auto [t1, k1] = users[1];
      if (boundary[t0][k0] >= 0 || boundary[t1][k1] >= 0) {
        throw std::invalid_argument("MacroMesh: interior edge carries a boundary tag");
      }
      if ((k0 == 0) != (k1 == 0)) {
        throw std::invalid_argument("MacroMesh: incompatible refinement edges");
      }
    } else {
      throw std::invalid_argument("MacroMesh: edge shared by more than two triangles");
    }
  }
}

// ---------------------------------------------------------------------------
// ForestBuilder: mutable working state behind every MeshForest constructor.

class ForestBuilder {
 public:
  using Node = MeshForest::Node;

  explicit ForestBuilder(std::shared_ptr<const MacroMesh> macro) : macro_(std::move(macro)) {
    coords_ = macro_->vertices;
    for (std::size_t t = 0; t < macro_->triangles.size(); ++t) {
      Node n;
      n.v = macro_->triangles[t];
      n.marker = macro_->boundary[t];
      n.macro = static_cast<int>(t);
      nodes_.push_back(n);
    }
  }

  explicit ForestBuilder(const MeshForest& f)
      : macro_(f.macro_), nodes_(f.nodes_), coords_(f.coords_) {
    for (const Node& n : nodes_) {
      if (!n.is_leaf()) midpoints_[node_edge(n, 0)] = nodes_[n.child[0]].v[0];
    }
  }

  std::vector<Node>& nodes() { return nodes_; }
  const std::vector<Point>& coords() const { return coords_; }
  std::size_t num_roots() const { return macro_->triangles.size(); }

  int midpoint_vertex(int a, int b) {
    const auto key = edge_key(a, b);
    auto it = midpoints_.find(key);
    if (it != midpoints_.end()) return it->second;
    const int id = static_cast<int>(coords_.size());
    coords_.push_back(midpoint(coords_[a], coords_[b]));
    midpoints_.emplace(key, id);
    return id;
  }

  bool has_midpoint(std::uint64_t key) const { return midpoints_.count(key) > 0; }

  void bisect(int id) {
    if (!nodes_[id].is_leaf()) return;
    const Node parent = nodes_[id];
    const int mid = midpoint_vertex(parent.v[1], parent.v[2]);
    Node a;
    a.parent = id;
    a.v = {mid, parent.v[0], parent.v[1]};
    a.marker = {parent.marker[2], parent.marker[0], kInteriorEdge};
    a.level = parent.level + 1;
    a.macro = parent.macro;
    Node b = a;
    b.v = {mid, parent.v[2], parent.v[0]};
    b.marker = {parent.marker[1], kInteriorEdge, parent.marker[0]};
    const int ia = static_cast<int>(nodes_.size());
    nodes_.push_back(a);
    nodes_.push_back(b);
    nodes_[id].child = {ia, ia + 1};
  }

  std::vector<int> leaf_nodes() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (nodes_[i].is_leaf()) out.push_back(static_cast<int>(i));
    }
    return out;
  }

  /// Marks the refinement edges of `marked`, closes the marked edge set so
  /// that every leaf touching a marked edge also has its refinement edge
  /// marked, then bisects until no leaf carries a marked edge.
  void refine_with_closure(std::vector<std::uint64_t> seed_edges) {
    std::unordered_map<std::uint64_t, std::vector<int>> edge_leaves;
    for (int n : leaf_nodes()) {
      for (int k = 0; k < 3; ++k) edge_leaves[node_edge(nodes_[n], k)].push_back(n);
    }
    std::unordered_set<std::uint64_t> marked;
    std::vector<std::uint64_t> work;
    auto mark = [&](std::uint64_t e) {
      if (marked.insert(e).second) work.push_back(e);
    };
    for (auto e : seed_edges) mark(e);
    while (!work.empty()) {
      const auto e = work.back();
      work.pop_back();
      auto it = edge_leaves.find(e);
      if (it == edge_leaves.end()) continue;
      for (int n : it->second) mark(node_edge(nodes_[n], 0));
    }
    std::vector<int> todo;
    for (int n : leaf_nodes()) {
      if (marked.count(node_edge(nodes_[n], 0))) todo.push_back(n);
    }
    while (!todo.empty()) {
      const int n = todo.back();
      todo.pop_back();
      if (!nodes_[n].is_leaf()) continue;
      bisect(n);
      for (int c : nodes_[n].child) {
        if (marked.count(node_edge(nodes_[c], 0))) todo.push_back(c);
      }
    }
  }

  /// Bisects across hanging edges until the leaf set is conforming.
  void close_hanging() {
    for (;;) {
      std::vector<std::uint64_t> hanging;
      for (int n : leaf_nodes()) {
        for (int k = 0; k < 3; ++k) {
          const auto e = node_edge(nodes_[n], k);
          if (has_midpoint(e)) hanging.push_back(e);
        }
      }
      if (hanging.empty()) return;
      std::sort(hanging.begin(), hanging.end());
      hanging.erase(std::unique(hanging.begin(), hanging.end()), hanging.end());
      refine_with_closure(std::move(hanging));
    }
  }

  /// Canonical renumbering into an immutable forest: macro roots keep ids
  /// 0..M-1, remaining nodes follow a depth-first preorder (child 0 first),
  /// and leaves and new vertices are numbered in that same traversal.
  MeshForest finalize() {
    MeshForest f;
    f.macro_ = macro_;
    const int n_roots = static_cast<int>(num_roots());
    std::vector<int> preorder;
    preorder.reserve(nodes_.size());
    std::vector<int> stack;
    for (int r = 0; r < n_roots; ++r) {
      stack.push_back(r);
      while (!stack.empty()) {
        const int n = stack.back();
        stack.pop_back();
        preorder.push_back(n);
        if (!nodes_[n].is_leaf()) {
          stack.push_back(nodes_[n].child[1]);
          stack.push_back(nodes_[n].child[0]);
        }
      }
    }
    std::vector<int> new_id(nodes_.size(), -1);
    int next = n_roots;
    for (int n : preorder) new_id[n] = n < n_roots ? n : next++;

    const int n_macro_vertices = static_cast<int>(macro_->vertices.size());
    std::vector<int> vmap(coords_.size(), -1);
    for (int v = 0; v < n_macro_vertices; ++v) vmap[v] = v;
    f.coords_.assign(macro_->vertices.begin(), macro_->vertices.end());

    f.nodes_.resize(preorder.size());
    for (int n : preorder) {
      const Node& src = nodes_[n];
      Node dst = src;
      dst.parent = src.parent >= 0 ? new_id[src.parent] : -1;
      if (!src.is_leaf()) {
        dst.child = {new_id[src.child[0]], new_id[src.child[1]]};
        const int mid = nodes_[src.child[0]].v[0];
        if (vmap[mid] < 0) {
          vmap[mid] = static_cast<int>(f.coords_.size());
          f.coords_.push_back(coords_[mid]);
        }
      }
      f.nodes_[new_id[n]] = dst;
    }
    for (Node& n : f.nodes_) {
      for (int& v : n.v) v = vmap[v];
    }
    f.node_leaf_.assign(f.nodes_.size(), -1);
    for (int n : preorder) {
      const int id = new_id[n];
      if (f.nodes_[id].is_leaf()) {
        f.node_leaf_[id] = static_cast<int>(f.leaves_.size());
        f.leaves_.push_back(id);
      }
    }
    return f;
  }

 private:
  std::shared_ptr<const MacroMesh> macro_;
  std::vector<Node> nodes_;
  std::vector<Point> coords_;
  std::unordered_map<std::uint64_t, int> midpoints_;
};

// ---------------------------------------------------------------------------
// MeshForest

MeshForest::MeshForest(std::shared_ptr<const MacroMesh> macro) {
  if (!macro) throw std::invalid_argument("MeshForest: null macro mesh");
  macro->validate();
  *this = ForestBuilder(std::move(macro)).finalize();
}

ElementGeometry MeshForest::node_geometry(int id) const {
  const auto& v = nodes_[id].v;
  return ElementGeometry(coords_[v[0]], coords_[v[1]], coords_[v[2]]);
}

ElementGeometry MeshForest::geometry(int leaf) const { return node_geometry(leaves_[leaf]); }

Location MeshForest::locate(Point x) const {
  auto bary_node = [&](int id) {
    const auto& v = nodes_[id].v;
    return bary_of(coords_[v[0]], coords_[v[1]], coords_[v[2]], x);
  };
  // Depth-first search in leaf order; the first containing leaf has the
  // lowest id among all containing leaves.
  auto search = [&](auto&& self, int id, const Barycentric& l) -> Location {
    const Node& n = nodes_[id];
    if (n.is_leaf()) return {node_leaf_[id], l};
    const Barycentric l0 = bary_node(n.child[0]);
    const Barycentric l1 = bary_node(n.child[1]);
    const bool in0 = min_of(l0) >= -kGeometryTol;
    const bool in1 = min_of(l1) >= -kGeometryTol;
    if (in0) {
      Location r = self(self, n.child[0], l0);
      if (r.leaf >= 0) return r;
    }
    if (in1) {
      Location r = self(self, n.child[1], l1);
      if (r.leaf >= 0) return r;
    }
    if (!in0 && !in1) {
      // Round-off at the tolerance boundary: follow the closer child.
      const int c = min_of(l0) >= min_of(l1) ? 0 : 1;
      return self(self, n.child[c], c == 0 ? l0 : l1);
    }
    return {};
  };
  for (std::size_t r = 0; r < macro_->triangles.size(); ++r) {
    const Barycentric l = bary_node(static_cast<int>(r));
    if (min_of(l) >= -kGeometryTol) {
      Location loc = search(search, static_cast<int>(r), l);
      if (loc.leaf >= 0) return loc;
    }
  }
  throw std::invalid_argument("MeshForest::locate: point outside the domain");
}

MeshForest MeshForest::refine(std::span<const int> marked) const {
  if (marked.empty()) return *this;
  ForestBuilder b(*this);
  std::vector<std::uint64_t> seeds;
  seeds.reserve(marked.size());
  for (int leaf : marked) {
    if (leaf < 0 || static_cast<std::size_t>(leaf) >= leaves_.size()) {
      throw std::invalid_argument("MeshForest::refine: marked id is not a leaf");
    }
    seeds.push_back(node_edge(nodes_[leaves_[leaf]], 0));
  }
  b.refine_with_closure(std::move(seeds));
  return b.finalize();
}

MeshForest MeshForest::refine_all() const {
  std::vector<int> all(leaves_.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  return refine(all);
}

std::vector<int> MeshForest::containing_leaves(const MeshForest& finer) const {
  if (!(*macro_ == *finer.macro_)) {
    throw std::invalid_argument("containing_leaves: macro mesh mismatch");
  }
  std::vector<int> out(finer.num_leaves(), -1);
  std::vector<std::pair<int, int>> stack;
  for (std::size_t r = 0; r < macro_->triangles.size(); ++r) {
    stack.emplace_back(static_cast<int>(r), static_cast<int>(r));
  }
  std::vector<int> sub;
  while (!stack.empty()) {
    const auto [c, f] = stack.back();
    stack.pop_back();
    if (nodes_[c].is_leaf()) {
      const int leaf = node_leaf_[c];
      sub.push_back(f);
      while (!sub.empty()) {
        const int n = sub.back();
        sub.pop_back();
        if (finer.nodes_[n].is_leaf()) {
          out[finer.node_leaf_[n]] = leaf;
        } else {
          sub.push_back(finer.nodes_[n].child[0]);
          sub.push_back(finer.nodes_[n].child[1]);
        }
      }
    } else if (finer.nodes_[f].is_leaf()) {
      throw std::invalid_argument("containing_leaves: mesh is not a refinement");
    } else {
      stack.emplace_back(nodes_[c].child[0], finer.nodes_[f].child[0]);
      stack.emplace_back(nodes_[c].child[1], finer.nodes_[f].child[1]);
    }
  }
  return out;
}

bool MeshForest::is_refined_by(const MeshForest& finer) const {
  if (!(*macro_ == *finer.macro_)) return false;
  std::vector<std::pair<int, int>> stack;
  for (std::size_t r = 0; r < macro_->triangles.size(); ++r) {
    stack.emplace_back(static_cast<int>(r), static_cast<int>(r));
  }
  while (!stack.empty()) {
    const auto [c, f] = stack.back();
    stack.pop_back();
    if (nodes_[c].is_leaf()) continue;
    if (finer.nodes_[f].is_leaf()) return false;
    stack.emplace_back(nodes_[c].child[0], finer.nodes_[f].child[0]);
    stack.emplace_back(nodes_[c].child[1], finer.nodes_[f].child[1]);
  }
  return true;
}

std::vector<std::vector<int>> MeshForest::vertex_neighbors() const {
  std::vector<std::vector<int>> incident(coords_.size());
  for (std::size_t l = 0; l < leaves_.size(); ++l) {
    for (int v : leaf_vertices(static_cast<int>(l))) incident[v].push_back(static_cast<int>(l));
  }
  std::vector<std::vector<int>> out(leaves_.size());
  for (std::size_t l = 0; l < leaves_.size(); ++l) {
    auto& nb = out[l];
    for (int v : leaf_vertices(static_cast<int>(l))) {
      for (int m : incident[v]) {
        if (m != static_cast<int>(l)) nb.push_back(m);
      }
    }
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }
  return out;
}

bool MeshForest::same_leaves(const MeshForest& other) const {
  if (!(*macro_ == *other.macro_) || nodes_.size() != other.nodes_.size()) return false;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].child != other.nodes_[i].child) return false;
  }
  return true;
}

MeshForest mesh_union(const MeshForest& a, const MeshForest& b) {
  if (!(*a.macro_ == *b.macro_)) {
    throw std::invalid_argument("mesh_union: meshes do not share a macro mesh");
  }
  ForestBuilder builder(a.macro_);
  struct Item {
    int target;
    int na;
    int nb;
  };
  std::vector<Item> stack;
  for (std::size_t r = 0; r < builder.num_roots(); ++r) {
    const int id = static_cast<int>(r);
    stack.push_back({id, id, id});
  }
  while (!stack.empty()) {
    const Item it = stack.back();
    stack.pop_back();
    const bool split_a = it.na >= 0 && !a.nodes_[it.na].is_leaf();
    const bool split_b = it.nb >= 0 && !b.nodes_[it.nb].is_leaf();
    if (!split_a && !split_b) continue;
    builder.bisect(it.target);
    const auto children = builder.nodes()[it.target].child;
    for (int c = 0; c < 2; ++c) {
      stack.push_back({children[c], split_a ? a.nodes_[it.na].child[c] : -1,
                       split_b ? b.nodes_[it.nb].child[c] : -1});
    }
  }
  builder.close_hanging();
  return builder.finalize();
}

bool is_conforming(const MeshForest& mesh) {
  struct Hash {
    std::size_t operator()(const Point& p) const {
      return std::hash<double>()(p.x) * 31u + std::hash<double>()(p.y);
    }
  };
  std::unordered_set<Point, Hash> used;
  for (std::size_t l = 0; l < mesh.num_leaves(); ++l) {
    for (int v : mesh.leaf_vertices(static_cast<int>(l))) used.insert(mesh.vertex(v));
  }
  for (std::size_t l = 0; l < mesh.num_leaves(); ++l) {
    const auto& v = mesh.leaf_vertices(static_cast<int>(l));
    for (int k = 0; k < 3; ++k) {
      const Point m = midpoint(mesh.vertex(v[(k + 1) % 3]), mesh.vertex(v[(k + 2) % 3]));
      if (used.count(m)) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Dumps

namespace {

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.16e", x);
  return buf;
}

}  // namespace

void write_mesh(std::ostream& out, const MeshForest& mesh) {
  out << "NIRD-MESH v1\n";
  for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
    const Point p = mesh.vertex(static_cast<int>(v));
    out << "v " << fmt_double(p.x) << ' ' << fmt_double(p.y) << '\n';
  }
  for (std::size_t l = 0; l < mesh.num_leaves(); ++l) {
    const int leaf = static_cast<int>(l);
    const auto& v = mesh.leaf_vertices(leaf);
    out << "t " << v[0] << ' ' << v[1] << ' ' << v[2] << ' ' << mesh.leaf_level(leaf) << ' '
        << mesh.leaf_macro(leaf) << '\n';
  }
}

MeshForest read_mesh(std::istream& in, std::shared_ptr<const MacroMesh> macro) {
  std::string line;
  if (!std::getline(in, line) || line != "NIRD-MESH v1") {
    throw std::invalid_argument("read_mesh: missing NIRD-MESH v1 header");
  }
  std::vector<Point> verts;
  std::vector<std::array<int, 3>> tris;
  int max_level = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      std::string xs, ys;
      ls >> xs >> ys;
      verts.push_back({std::stod(xs), std::stod(ys)});
    } else if (tag == "t") {
      std::array<int, 3> t{};
      int level = 0, root = 0;
      ls >> t[0] >> t[1] >> t[2] >> level >> root;
      if (!ls) throw std::invalid_argument("read_mesh: malformed leaf line");
      tris.push_back(t);
      max_level = std::max(max_level, level);
    } else {
      throw std::invalid_argument("read_mesh: unknown record '" + tag + "'");
    }
  }
  using Key = std::array<double, 6>;
  std::map<Key, int> wanted;
  for (const auto& t : tris) {
    for (int v : t) {
      if (v < 0 || static_cast<std::size_t>(v) >= verts.size()) {
        throw std::invalid_argument("read_mesh: vertex index out of range");
      }
    }
    wanted[{verts[t[0]].x, verts[t[0]].y, verts[t[1]].x, verts[t[1]].y, verts[t[2]].x,
            verts[t[2]].y}] = 1;
  }
  ForestBuilder b(std::move(macro));
  std::vector<int> stack;
  for (std::size_t r = 0; r < b.num_roots(); ++r) stack.push_back(static_cast<int>(r));
  std::size_t found = 0;
  while (!stack.empty()) {
    const int n = stack.back();
    stack.pop_back();
    const auto v = b.nodes()[n].v;
    const auto& c = b.coords();
    const Key key{c[v[0]].x, c[v[0]].y, c[v[1]].x, c[v[1]].y, c[v[2]].x, c[v[2]].y};
    if (wanted.count(key)) {
      ++found;
      continue;
    }
    if (b.nodes()[n].level >= max_level) {
      throw std::invalid_argument("read_mesh: leaves do not form a bisection forest");
    }
    b.bisect(n);
    stack.push_back(b.nodes()[n].child[0]);
    stack.push_back(b.nodes()[n].child[1]);
  }
  if (found != tris.size()) {
    throw std::invalid_argument("read_mesh: leaf set does not match the macro mesh");
  }
  return b.finalize();
}

}  // namespace nird
