#pragma once

// Conforming 2D triangular meshes with boundary classification and
// longest-edge bisection refinement.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mfmfe {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

enum class BoundaryTag : std::uint8_t { Dirichlet, Neumann };

/// Built-in initial meshes plus a user-supplied coordinate list.
struct DomainSpec {
  enum class Kind { LShape, Square4Quadrant, ReferenceTriangle, UserMesh };
  Kind kind = Kind::LShape;

  // UserMesh payload
  std::vector<Vec2> vertices;
  std::vector<std::array<int, 3>> triangles;
  // boundary edges (vertex pairs, any order) mapped to tags; edges not listed
  // default to Dirichlet
  std::map<std::pair<int, int>, BoundaryTag> boundary_tags;

  static DomainSpec l_shape() { return {Kind::LShape, {}, {}, {}}; }
  static DomainSpec square_4quadrant() { return {Kind::Square4Quadrant, {}, {}, {}}; }
  static DomainSpec reference_triangle() { return {Kind::ReferenceTriangle, {}, {}, {}}; }
};

struct Edge {
  int v0 = -1, v1 = -1;        // ordered as traversed ccw by elem_plus
  int elem_plus = -1;          // lower incident element index
  int elem_minus = -1;         // higher incident element index, -1 on boundary
  double length = 0.0;
  std::optional<BoundaryTag> tag;  // set iff boundary edge

  bool on_boundary() const { return elem_minus < 0; }
};

struct MarkedSet {
  std::vector<int> elements;  // sorted, unique
};

/// Affine map F_T : unit triangle -> T, x = b + DF * x_hat.
struct ElementGeometry {
  Vec2 b;
  Mat2 DF;
  double J;       // |det DF| = 2*area
  double area;
  double h;       // diameter (longest edge)

  Vec2 map(const Vec2& xhat) const { return b + DF * xhat; }
  Vec2 unmap(const Vec2& x) const { return DF.inverse() * (x - b); }
};

class Mesh {
public:
  Mesh(std::vector<Vec2> vertices, std::vector<std::array<int, 3>> triangles,
       std::map<std::pair<int, int>, BoundaryTag> boundary_tags,
       std::vector<int> levels = {}, std::vector<int> parents = {});

  int num_vertices() const { return static_cast<int>(vertices_.size()); }
  int num_elements() const { return static_cast<int>(triangles_.size()); }
  int num_edges() const { return static_cast<int>(edges_.size()); }

  const Vec2& vertex(int v) const { return vertices_[v]; }
  const std::array<int, 3>& tri(int t) const { return triangles_[t]; }
  const Edge& edge(int e) const { return edges_[e]; }
  const std::vector<Edge>& edges() const { return edges_; }

  /// Edges of element t in local order: opposite local vertex 0,1,2 is
  /// edge (1,2),(2,0),(0,1).
  const std::array<int, 3>& element_edges(int t) const { return tri_edges_[t]; }

  int refinement_level(int t) const { return levels_[t]; }
  /// Index of the parent element in the mesh this one was refined from
  /// (-1 for initial-mesh elements).
  int parent(int t) const { return parents_[t]; }

  double element_area(int t) const { return areas_[t]; }
  double element_diameter(int t) const { return geoms_[t].h; }
  const ElementGeometry& geometry(int t) const { return geoms_[t]; }

  Vec2 centroid(int t) const {
    const auto& tr = triangles_[t];
    return (vertices_[tr[0]] + vertices_[tr[1]] + vertices_[tr[2]]) / 3.0;
  }

  /// Unit normal of edge e, pointing from elem_plus into elem_minus
  /// (outward on the boundary).
  Vec2 edge_normal(int e) const {
    const Edge& E = edges_[e];
    Vec2 t = (vertices_[E.v1] - vertices_[E.v0]).normalized();
    return Vec2(t.y(), -t.x());
  }

  /// Unit tangent of edge e; edge_normal = (t.y, -t.x) so that
  /// (-n2, n1) == tangent.
  Vec2 edge_tangent(int e) const {
    const Edge& E = edges_[e];
    return (vertices_[E.v1] - vertices_[E.v0]).normalized();
  }

  double h_max() const;
  double h_min() const;
  double min_angle() const;

  /// Throws std::runtime_error if the conformity/orientation/boundary
  /// invariants are violated.
  void audit() const;

  int edge_index(int va, int vb) const {
    auto it = edge_lookup_.find(ordered(va, vb));
    return it == edge_lookup_.end() ? -1 : it->second;
  }

private:
  static std::pair<int, int> ordered(int a, int b) {
    return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
  }

  std::vector<Vec2> vertices_;
  std::vector<std::array<int, 3>> triangles_;
  std::vector<Edge> edges_;
  std::vector<std::array<int, 3>> tri_edges_;
  std::map<std::pair<int, int>, int> edge_lookup_;
  std::vector<double> areas_;
  std::vector<ElementGeometry> geoms_;
  std::vector<int> levels_;
  std::vector<int> parents_;
};

inline double triangle_signed_area(const Vec2& a, const Vec2& b, const Vec2& c) {
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

inline Mesh::Mesh(std::vector<Vec2> vertices, std::vector<std::array<int, 3>> triangles,
                  std::map<std::pair<int, int>, BoundaryTag> boundary_tags,
                  std::vector<int> levels, std::vector<int> parents)
    : vertices_(std::move(vertices)), triangles_(std::move(triangles)) {
  const int nt = num_elements();
  if (levels.empty()) levels.assign(nt, 0);
  if (parents.empty()) parents.assign(nt, -1);
  levels_ = std::move(levels);
  parents_ = std::move(parents);

  areas_.resize(nt);
  geoms_.resize(nt);
  tri_edges_.resize(nt);

  for (int t = 0; t < nt; ++t) {
    const auto& tr = triangles_[t];
    const Vec2& a = vertices_[tr[0]];
    const Vec2& b = vertices_[tr[1]];
    const Vec2& c = vertices_[tr[2]];
    double sa = triangle_signed_area(a, b, c);
    if (sa <= 0.0)
      throw std::runtime_error("Mesh: element " + std::to_string(t) +
                               " is degenerate or not counterclockwise");
    areas_[t] = sa;
    ElementGeometry g;
    g.b = a;
    g.DF.col(0) = b - a;
    g.DF.col(1) = c - a;
    g.J = std::abs(g.DF.determinant());
    g.area = sa;
    g.h = std::max({(b - a).norm(), (c - b).norm(), (a - c).norm()});
    geoms_[t] = g;
  }

  // Edge numbering: first traversal order over elements, local edges in the
  // order (v0,v1),(v1,v2),(v2,v0).
  for (int t = 0; t < nt; ++t) {
    const auto& tr = triangles_[t];
    for (int k = 0; k < 3; ++k) {
      int va = tr[k], vb = tr[(k + 1) % 3];
      auto key = ordered(va, vb);
      auto it = edge_lookup_.find(key);
      if (it == edge_lookup_.end()) {
        Edge E;
        E.v0 = va;  // ccw order in the first (lower-index) incident element
        E.v1 = vb;
        E.elem_plus = t;
        E.length = (vertices_[vb] - vertices_[va]).norm();
        edge_lookup_.emplace(key, static_cast<int>(edges_.size()));
        edges_.push_back(E);
      } else {
        Edge& E = edges_[it->second];
        if (E.elem_minus >= 0)
          throw std::runtime_error("Mesh: edge shared by more than 2 elements");
        E.elem_minus = t;
      }
    }
    const int e12 = edge_lookup_.at(ordered(tr[1], tr[2]));
    const int e20 = edge_lookup_.at(ordered(tr[2], tr[0]));
    const int e01 = edge_lookup_.at(ordered(tr[0], tr[1]));
    tri_edges_[t] = {e12, e20, e01};
  }

  std::map<std::pair<int, int>, BoundaryTag> tags;
  for (const auto& [k, tag] : boundary_tags) tags.emplace(ordered(k.first, k.second), tag);
  boundary_tags = std::move(tags);

  bool have_dirichlet = false;
  for (auto& [key, e] : edge_lookup_) {
    Edge& E = edges_[e];
    if (!E.on_boundary()) continue;
    auto it = boundary_tags.find(key);
    E.tag = (it != boundary_tags.end()) ? it->second : BoundaryTag::Dirichlet;
    if (*E.tag == BoundaryTag::Dirichlet) have_dirichlet = true;
  }
  if (!have_dirichlet)
    throw std::runtime_error("Mesh: Dirichlet boundary part must be nonempty");
}

inline double Mesh::h_max() const {
  double h = 0;
  for (const auto& g : geoms_) h = std::max(h, g.h);
  return h;
}

inline double Mesh::h_min() const {
  double h = std::numeric_limits<double>::max();
  for (const auto& g : geoms_) h = std::min(h, g.h);
  return h;
}

inline double Mesh::min_angle() const {
  double amin = std::numeric_limits<double>::max();
  for (int t = 0; t < num_elements(); ++t) {
    const auto& tr = triangles_[t];
    for (int k = 0; k < 3; ++k) {
      Vec2 u = vertices_[tr[(k + 1) % 3]] - vertices_[tr[k]];
      Vec2 v = vertices_[tr[(k + 2) % 3]] - vertices_[tr[k]];
      double ang = std::acos(std::clamp(u.dot(v) / (u.norm() * v.norm()), -1.0, 1.0));
      amin = std::min(amin, ang);
    }
  }
  return amin;
}

inline void Mesh::audit() const {
  for (const Edge& E : edges_) {
    if (E.elem_plus < 0)
      throw std::runtime_error("Mesh audit: edge without incident element");
    if (E.on_boundary() && !E.tag)
      throw std::runtime_error("Mesh audit: untagged boundary edge");
    if (!E.on_boundary() && E.elem_minus <= E.elem_plus)
      throw std::runtime_error("Mesh audit: incident elements out of order");
  }
  for (int t = 0; t < num_elements(); ++t)
    if (areas_[t] <= 0.0) throw std::runtime_error("Mesh audit: nonpositive area");
}

// ---------------------------------------------------------------------------
// Initial meshes

inline Mesh build_initial_mesh(const DomainSpec& spec) {
  using K = DomainSpec::Kind;
  switch (spec.kind) {
    case K::LShape: {
      // {(-1,1)x(0,1)} u {(-1,0)x(-1,0)}: 8 vertices, 6 right triangles,
      // every triangle has a vertex at the reentrant corner (origin).
      std::vector<Vec2> v = {
          {0, 0},  {1, 0},  {1, 1},  {0, 1},
          {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}};
      std::vector<std::array<int, 3>> t = {
          {0, 1, 2}, {0, 2, 3}, {0, 3, 4}, {0, 4, 5}, {0, 5, 6}, {0, 6, 7}};
      return Mesh(std::move(v), std::move(t), {});
    }
    case K::Square4Quadrant: {
      // (-1,1)^2 with quadrant interfaces along mesh edges; 9 vertices,
      // 8 right triangles fanning around the origin.
      std::vector<Vec2> v = {
          {0, 0},  {1, 0},  {1, 1},  {0, 1}, {-1, 1},
          {-1, 0}, {-1, -1}, {0, -1}, {1, -1}};
      std::vector<std::array<int, 3>> t = {
          {0, 1, 2}, {0, 2, 3}, {0, 3, 4}, {0, 4, 5},
          {0, 5, 6}, {0, 6, 7}, {0, 7, 8}, {0, 8, 1}};
      return Mesh(std::move(v), std::move(t), {});
    }
    case K::ReferenceTriangle: {
      std::vector<Vec2> v = {{0, 0}, {1, 0}, {0, 1}};
      std::vector<std::array<int, 3>> t = {{0, 1, 2}};
      return Mesh(std::move(v), std::move(t), {});
    }
    case K::UserMesh:
      return Mesh(spec.vertices, spec.triangles, spec.boundary_tags);
  }
  throw std::logic_error("build_initial_mesh: unknown domain kind");
}

// ---------------------------------------------------------------------------
// Longest-edge bisection with Rivara-style closure

namespace detail {

struct RefineWorkspace {
  std::vector<Vec2> verts;
  struct Tri {
    std::array<int, 3> v;
    int level;
    int root_parent;  // element index in the input mesh
    bool alive = true;
  };
  std::vector<Tri> tris;
  std::map<std::pair<int, int>, int> midpoint;        // split edge -> midpoint vertex
  std::map<std::pair<int, int>, BoundaryTag> btags;   // current boundary edges
  std::map<std::pair<int, int>, int> edge_index;      // tie-breaking order
  int next_edge_index = 0;

  static std::pair<int, int> key(int a, int b) {
    return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
  }

  int edge_order(int a, int b) {
    auto [it, inserted] = edge_index.try_emplace(key(a, b), next_edge_index);
    if (inserted) ++next_edge_index;
    return it->second;
  }

  // Longest edge of triangle i; ties within 1e-12 relative resolved toward
  // the smaller edge index.
  int longest_local_edge(int i) {
    const auto& tv = tris[i].v;
    double len[3];
    for (int k = 0; k < 3; ++k) {
      int a = tv[(k + 1) % 3], b = tv[(k + 2) % 3];
      len[k] = (verts[b] - verts[a]).norm();
    }
    double lmax = std::max({len[0], len[1], len[2]});
    int best = -1, best_order = -1;
    for (int k = 0; k < 3; ++k) {
      if (len[k] < lmax * (1.0 - 1e-12)) continue;
      int a = tv[(k + 1) % 3], b = tv[(k + 2) % 3];
      int ord = edge_order(a, b);
      if (best < 0 || ord < best_order) {
        best = k;
        best_order = ord;
      }
    }
    return best;
  }

  void bisect(int i) {
    auto& T = tris[i];
    int k = longest_local_edge(i);
    int a = T.v[(k + 1) % 3], b = T.v[(k + 2) % 3], c = T.v[k];
    auto ekey = key(a, b);
    int m;
    auto it = midpoint.find(ekey);
    if (it != midpoint.end()) {
      m = it->second;
    } else {
      m = static_cast<int>(verts.size());
      verts.push_back(0.5 * (verts[a] + verts[b]));
      midpoint.emplace(ekey, m);
      auto bt = btags.find(ekey);
      if (bt != btags.end()) {
        BoundaryTag tag = bt->second;
        btags.erase(bt);
        btags.emplace(key(a, m), tag);
        btags.emplace(key(m, b), tag);
      }
    }
    // children (c,a,m) and (c,m,b) keep the parent's ccw orientation
    T.alive = false;
    tris.push_back({{c, a, m}, T.level + 1, T.root_parent, true});
    tris.push_back({{c, m, b}, T.level + 1, T.root_parent, true});
  }

  // An edge of an alive triangle whose recorded midpoint is not one of the
  // triangle's vertices is a hanging node.
  bool has_hanging_node(int i) const {
    const auto& tv = tris[i].v;
    for (int k = 0; k < 3; ++k) {
      auto it = midpoint.find(key(tv[k], tv[(k + 1) % 3]));
      if (it != midpoint.end()) return true;
    }
    return false;
  }
};

}  // namespace detail

struct RefineResult {
  Mesh mesh;
  /// parent(t) of the new mesh refers to the element of the input mesh
  /// (identity where untouched).
  std::vector<std::vector<int>> children;  // input element -> new elements
};

inline RefineResult refine(const Mesh& mesh, const MarkedSet& marked) {
  detail::RefineWorkspace ws;
  ws.verts.reserve(mesh.num_vertices() * 2);
  for (int v = 0; v < mesh.num_vertices(); ++v) ws.verts.push_back(mesh.vertex(v));
  for (int t = 0; t < mesh.num_elements(); ++t)
    ws.tris.push_back({mesh.tri(t), mesh.refinement_level(t), t, true});
  // seed the tie-breaking order with the input mesh's edge numbering
  for (int e = 0; e < mesh.num_edges(); ++e)
    ws.edge_order(mesh.edge(e).v0, mesh.edge(e).v1);
  for (const Edge& E : mesh.edges())
    if (E.on_boundary())
      ws.btags.emplace(detail::RefineWorkspace::key(E.v0, E.v1), *E.tag);

  for (int t : marked.elements) {
    if (t < 0 || t >= mesh.num_elements())
      throw std::invalid_argument("refine: marked element out of range");
    ws.bisect(t);
  }

  // closure: bisect until no hanging nodes remain
  bool changed = true;
  while (changed) {
    changed = false;
    const int n = static_cast<int>(ws.tris.size());
    for (int i = 0; i < n; ++i) {
      if (!ws.tris[i].alive) continue;
      if (ws.has_hanging_node(i)) {
        ws.bisect(i);
        changed = true;
      }
    }
  }

  std::vector<std::array<int, 3>> tris;
  std::vector<int> levels, parents;
  std::vector<std::vector<int>> children(mesh.num_elements());
  for (const auto& T : ws.tris) {
    if (!T.alive) continue;
    int idx = static_cast<int>(tris.size());
    tris.push_back(T.v);
    levels.push_back(T.level);
    parents.push_back(T.root_parent);
    children[T.root_parent].push_back(idx);
  }
  Mesh out(std::move(ws.verts), std::move(tris), std::move(ws.btags),
           std::move(levels), std::move(parents));
  return {std::move(out), std::move(children)};
}

inline RefineResult uniform_refine(const Mesh& mesh) {
  MarkedSet all;
  all.elements.resize(mesh.num_elements());
  for (int t = 0; t < mesh.num_elements(); ++t) all.elements[t] = t;
  return refine(mesh, all);
}

// ---------------------------------------------------------------------------
// Text import/export: `nv nt / x y per vertex / i j k tag per triangle`

inline void write_mesh_text(std::ostream& os, const Mesh& mesh) {
  os.precision(17);
  os << mesh.num_vertices() << ' ' << mesh.num_elements() << '\n';
  for (int v = 0; v < mesh.num_vertices(); ++v)
    os << mesh.vertex(v).x() << ' ' << mesh.vertex(v).y() << '\n';
  for (int t = 0; t < mesh.num_elements(); ++t) {
    const auto& tr = mesh.tri(t);
    os << tr[0] << ' ' << tr[1] << ' ' << tr[2] << ' ' << 0 << '\n';
  }
}

inline Mesh read_mesh_text(std::istream& is) {
  int nv = 0, nt = 0;
  if (!(is >> nv >> nt) || nv < 3 || nt < 1)
    throw std::runtime_error("mesh import: bad header");
  std::vector<Vec2> verts(nv);
  for (int v = 0; v < nv; ++v)
    if (!(is >> verts[v].x() >> verts[v].y()))
      throw std::runtime_error("mesh import: bad vertex line " + std::to_string(v));
  std::vector<std::array<int, 3>> tris(nt);
  for (int t = 0; t < nt; ++t) {
    int tag;
    if (!(is >> tris[t][0] >> tris[t][1] >> tris[t][2] >> tag))
      throw std::runtime_error("mesh import: bad triangle line " + std::to_string(t));
    for (int k = 0; k < 3; ++k)
      if (tris[t][k] < 0 || tris[t][k] >= nv)
        throw std::runtime_error("mesh import: vertex index out of range in triangle " +
                                 std::to_string(t));
  }
  return Mesh(std::move(verts), std::move(tris), {});
}

}  // namespace mfmfe
