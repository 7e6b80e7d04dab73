#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace wgeig {

using Index = std::int64_t;

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Where a fine edge comes from after refinement.
struct EdgeParent {
  enum class Kind { CoarseEdge, CoarseCellInterior };
  Kind kind = Kind::CoarseEdge;
  Index index = -1;  ///< coarse edge or coarse cell
  /// For Kind::CoarseEdge: the sub-interval [t0, t1] of the coarse edge parameter
  /// (0 at the coarse edge's lower-indexed vertex) covered by the fine edge.
  double t0 = 0.0;
  double t1 = 0.0;
};

/// Local edge k of a cell joins its vertices k and (k + 1) % 3.
struct CellEdge {
  Index edge = -1;
  int sign = 1;  ///< +1 when the edge reference normal is outward for this cell
};

/// Structured triangulation of the unit square: an n x n grid of squares, each cut along
/// its positive-slope diagonal. Vertices live on the integer lattice {0..n}^2 scaled by
/// 1/n, which keeps every geometric key exact and the entity ordering canonical:
/// vertices, cells and edges are sorted lexicographically by (x, y) of vertex, centroid
/// and midpoint respectively.
class TriMesh {
 public:
  static TriMesh build_uniform(int n);

  [[nodiscard]] int n() const { return n_; }
  [[nodiscard]] double mesh_size() const { return std::sqrt(2.0) / n_; }

  [[nodiscard]] Index num_vertices() const { return static_cast<Index>(lattice_.size()); }
  [[nodiscard]] Index num_cells() const { return static_cast<Index>(cells_.size()); }
  [[nodiscard]] Index num_edges() const { return static_cast<Index>(edges_.size()); }
  [[nodiscard]] Index num_boundary_edges() const {
    return std::count(boundary_.begin(), boundary_.end(), true);
  }

  [[nodiscard]] Point vertex(Index v) const {
    return {static_cast<double>(lattice_[v][0]) / n_, static_cast<double>(lattice_[v][1]) / n_};
  }
  [[nodiscard]] const std::array<int, 2>& lattice(Index v) const { return lattice_[v]; }
  [[nodiscard]] const std::array<Index, 3>& cell(Index c) const { return cells_[c]; }
  [[nodiscard]] const std::array<Index, 2>& edge(Index e) const { return edges_[e]; }
  [[nodiscard]] const std::array<CellEdge, 3>& cell_edges(Index c) const { return cell_edges_[c]; }
  /// Incident cells of an edge, lower index first; second entry is -1 on the boundary.
  [[nodiscard]] const std::array<Index, 2>& edge_cells(Index e) const { return edge_cells_[e]; }
  [[nodiscard]] bool is_boundary_edge(Index e) const { return boundary_[e]; }
  [[nodiscard]] bool is_boundary_vertex(Index v) const {
    const auto& p = lattice_[v];
    return p[0] == 0 || p[1] == 0 || p[0] == n_ || p[1] == n_;
  }

  [[nodiscard]] std::array<Point, 3> cell_vertices(Index c) const {
    const auto& t = cells_[c];
    return {vertex(t[0]), vertex(t[1]), vertex(t[2])};
  }
  [[nodiscard]] double cell_area(Index c) const {
    auto [a, b, d] = cell_vertices(c);
    return 0.5 * ((b.x - a.x) * (d.y - a.y) - (d.x - a.x) * (b.y - a.y));
  }
  [[nodiscard]] Point cell_centroid(Index c) const {
    auto [a, b, d] = cell_vertices(c);
    return {(a.x + b.x + d.x) / 3.0, (a.y + b.y + d.y) / 3.0};
  }
  [[nodiscard]] double edge_length(Index e) const {
    Point a = vertex(edges_[e][0]), b = vertex(edges_[e][1]);
    return std::hypot(b.x - a.x, b.y - a.y);
  }
  /// Unit normal pointing out of edge_cells(e)[0].
  [[nodiscard]] Point edge_normal(Index e) const { return normals_[e]; }
  /// Point at parameter t in [0, 1], measured from the lower-indexed vertex.
  [[nodiscard]] Point edge_point(Index e, double t) const {
    Point a = vertex(edges_[e][0]), b = vertex(edges_[e][1]);
    return {a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)};
  }

  /// Cell containing a point that is strictly interior to some cell.
  [[nodiscard]] Index locate(Point p) const;

  /// Parent maps; empty unless this mesh came from refine().
  [[nodiscard]] const std::vector<Index>& parent_cell() const { return parent_cell_; }
  [[nodiscard]] const std::vector<EdgeParent>& parent_edge() const { return parent_edge_; }

  [[nodiscard]] nlohmann::json to_json() const;

  friend TriMesh refine(const TriMesh& coarse);

 private:
  using Lattice = std::array<int, 2>;
  static TriMesh from_lattice(int n, std::vector<Lattice> verts,
                              std::vector<std::array<Index, 3>> cells);

  int n_ = 0;
  std::vector<Lattice> lattice_;
  std::vector<std::array<Index, 3>> cells_;
  std::vector<std::array<Index, 2>> edges_;
  std::vector<std::array<CellEdge, 3>> cell_edges_;
  std::vector<std::array<Index, 2>> edge_cells_;
  std::vector<bool> boundary_;
  std::vector<Point> normals_;
  std::vector<Index> cell_lookup_;  // (square i, square j, upper) -> cell
  std::vector<Index> parent_cell_;
  std::vector<EdgeParent> parent_edge_;
};

/// Regular refinement: every triangle is split into four through its edge midpoints.
TriMesh refine(const TriMesh& coarse);

/// Relation between a coarse mesh and a fine mesh obtained from it by repeated
/// regular refinement.
struct Nesting {
  std::vector<Index> cell;         ///< fine cell -> coarse cell
  std::vector<EdgeParent> edge;    ///< fine edge -> coarse edge sub-interval or coarse cell
};

Nesting nesting(const TriMesh& coarse, const TriMesh& fine);

// ---------------------------------------------------------------------------

inline TriMesh TriMesh::from_lattice(int n, std::vector<Lattice> verts,
                                     std::vector<std::array<Index, 3>> cells) {
  TriMesh m;
  m.n_ = n;

  // Canonical vertex numbering: lexicographic in (x, y).
  std::vector<Index> vperm(verts.size());
  std::iota(vperm.begin(), vperm.end(), Index{0});
  std::sort(vperm.begin(), vperm.end(), [&](Index a, Index b) { return verts[a] < verts[b]; });
  std::vector<Index> vnew(verts.size());
  m.lattice_.resize(verts.size());
  for (std::size_t i = 0; i < vperm.size(); ++i) {
    vnew[vperm[i]] = static_cast<Index>(i);
    m.lattice_[i] = verts[vperm[i]];
  }
  for (auto& t : cells) {
    for (auto& v : t) v = vnew[v];
    // counterclockwise, smallest vertex first
    const auto& a = m.lattice_[t[0]];
    const auto& b = m.lattice_[t[1]];
    const auto& c = m.lattice_[t[2]];
    const long cross = static_cast<long>(b[0] - a[0]) * (c[1] - a[1]) -
                       static_cast<long>(c[0] - a[0]) * (b[1] - a[1]);
    if (cross == 0) throw std::invalid_argument("TriMesh: degenerate cell");
    if (cross < 0) std::swap(t[1], t[2]);
    auto first = std::min_element(t.begin(), t.end());
    std::rotate(t.begin(), first, t.end());
  }

  auto centroid_key = [&](const std::array<Index, 3>& t) {
    std::array<long, 2> k{0, 0};
    for (Index v : t) {
      k[0] += m.lattice_[v][0];
      k[1] += m.lattice_[v][1];
    }
    return k;
  };
  std::sort(cells.begin(), cells.end(),
            [&](const auto& a, const auto& b) { return centroid_key(a) < centroid_key(b); });
  m.cells_ = std::move(cells);

  // Edges, deduplicated and sorted by midpoint.
  std::vector<std::array<Index, 2>> edges;
  edges.reserve(m.cells_.size() * 3);
  for (const auto& t : m.cells_)
    for (int k = 0; k < 3; ++k) {
      Index a = t[k], b = t[(k + 1) % 3];
      edges.push_back({std::min(a, b), std::max(a, b)});
    }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  auto mid_key = [&](const std::array<Index, 2>& e) {
    return std::array<long, 2>{m.lattice_[e[0]][0] + m.lattice_[e[1]][0],
                               m.lattice_[e[0]][1] + m.lattice_[e[1]][1]};
  };
  std::sort(edges.begin(), edges.end(),
            [&](const auto& a, const auto& b) { return mid_key(a) < mid_key(b); });
  m.edges_ = std::move(edges);

  std::map<std::array<Index, 2>, Index> edge_id;
  for (Index e = 0; e < m.num_edges(); ++e) edge_id.emplace(m.edges_[e], e);

  m.edge_cells_.assign(m.edges_.size(), {-1, -1});
  m.cell_edges_.resize(m.cells_.size());
  for (Index c = 0; c < m.num_cells(); ++c) {
    const auto& t = m.cells_[c];
    for (int k = 0; k < 3; ++k) {
      Index a = t[k], b = t[(k + 1) % 3];
      Index e = edge_id.at({std::min(a, b), std::max(a, b)});
      m.cell_edges_[c][k].edge = e;
      auto& ec = m.edge_cells_[e];
      if (ec[0] < 0) ec[0] = c;
      else if (ec[1] < 0) ec[1] = c;
      else throw std::logic_error("TriMesh: edge shared by more than two cells");
    }
  }
  // Cells are visited in increasing order, so ec[0] < ec[1] already.
  for (Index c = 0; c < m.num_cells(); ++c)
    for (auto& ce : m.cell_edges_[c]) ce.sign = (m.edge_cells_[ce.edge][0] == c) ? 1 : -1;

  m.boundary_.resize(m.edges_.size());
  m.normals_.resize(m.edges_.size());
  for (Index e = 0; e < m.num_edges(); ++e) {
    m.boundary_[e] = m.edge_cells_[e][1] < 0;
    // outward normal of the first incident cell: rotate the ccw tangent clockwise
    Index c = m.edge_cells_[e][0];
    const auto& t = m.cells_[c];
    int k = 0;
    while (m.cell_edges_[c][k].edge != e) ++k;
    Point a = m.vertex(t[k]), b = m.vertex(t[(k + 1) % 3]);
    double dx = b.x - a.x, dy = b.y - a.y, len = std::hypot(dx, dy);
    m.normals_[e] = {dy / len, -dx / len};
  }

  m.cell_lookup_.assign(static_cast<std::size_t>(2) * n * n, -1);
  for (Index c = 0; c < m.num_cells(); ++c) {
    auto k = centroid_key(m.cells_[c]);  // 3 * lattice centroid
    int i = static_cast<int>(k[0] / 3), j = static_cast<int>(k[1] / 3);
    int upper = (k[1] - 3 * j) > (k[0] - 3 * i) ? 1 : 0;
    m.cell_lookup_[(static_cast<std::size_t>(i) * n + j) * 2 + upper] = c;
  }
  return m;
}

inline TriMesh TriMesh::build_uniform(int n) {
  if (n < 1) throw std::invalid_argument("build_uniform: n must be >= 1");
  std::vector<Lattice> verts;
  verts.reserve(static_cast<std::size_t>(n + 1) * (n + 1));
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n; ++j) verts.push_back({i, j});
  auto vid = [n](int i, int j) { return static_cast<Index>(i) * (n + 1) + j; };
  std::vector<std::array<Index, 3>> cells;
  cells.reserve(static_cast<std::size_t>(2) * n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      cells.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)});
      cells.push_back({vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)});
    }
  return from_lattice(n, std::move(verts), std::move(cells));
}

inline Index TriMesh::locate(Point p) const {
  double sx = p.x * n_, sy = p.y * n_;
  int i = std::clamp(static_cast<int>(std::floor(sx)), 0, n_ - 1);
  int j = std::clamp(static_cast<int>(std::floor(sy)), 0, n_ - 1);
  int upper = (sy - j) > (sx - i) ? 1 : 0;
  return cell_lookup_[(static_cast<std::size_t>(i) * n_ + j) * 2 + upper];
}

inline nlohmann::json TriMesh::to_json() const {
  nlohmann::json j;
  j["n"] = n_;
  j["h"] = mesh_size();
  auto& vs = j["vertices"] = nlohmann::json::array();
  for (Index v = 0; v < num_vertices(); ++v) vs.push_back({vertex(v).x, vertex(v).y});
  j["cells"] = cells_;
  j["edges"] = edges_;
  j["boundary_edges"] = boundary_;
  return j;
}

inline TriMesh refine(const TriMesh& coarse) {
  const int n = coarse.n();
  using Lattice = std::array<int, 2>;
  std::vector<Lattice> verts;
  std::map<Lattice, Index> vid;
  auto add = [&](Lattice p) {
    auto [it, inserted] = vid.emplace(p, static_cast<Index>(verts.size()));
    if (inserted) verts.push_back(p);
    return it->second;
  };
  std::vector<std::array<Index, 3>> cells;
  std::vector<std::array<long, 2>> child_key;  // doubled-scale centroid key of each child
  std::vector<Index> child_parent;
  for (Index c = 0; c < coarse.num_cells(); ++c) {
    std::array<Index, 3> v{}, mid{};
    for (int k = 0; k < 3; ++k) {
      const auto& p = coarse.lattice(coarse.cell(c)[k]);
      v[k] = add({2 * p[0], 2 * p[1]});
    }
    for (int k = 0; k < 3; ++k) {
      const auto& a = verts[v[k]];
      const auto& b = verts[v[(k + 1) % 3]];
      mid[k] = add({(a[0] + b[0]) / 2, (a[1] + b[1]) / 2});
    }
    const std::array<std::array<Index, 3>, 4> kids{{{v[0], mid[0], mid[2]},
                                                    {mid[0], v[1], mid[1]},
                                                    {mid[2], mid[1], v[2]},
                                                    {mid[0], mid[1], mid[2]}}};
    for (const auto& t : kids) {
      cells.push_back(t);
      child_parent.push_back(c);
    }
  }
  // Remember the parent of each child by its centroid, which survives renumbering.
  std::map<std::array<long, 2>, Index> parent_by_centroid;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    std::array<long, 2> k{0, 0};
    for (Index v : cells[i]) {
      k[0] += verts[v][0];
      k[1] += verts[v][1];
    }
    parent_by_centroid.emplace(k, child_parent[i]);
  }

  TriMesh fine = TriMesh::from_lattice(2 * n, std::move(verts), std::move(cells));
  fine.parent_cell_.resize(fine.num_cells());
  for (Index c = 0; c < fine.num_cells(); ++c) {
    std::array<long, 2> k{0, 0};
    for (Index v : fine.cell(c)) {
      k[0] += fine.lattice(v)[0];
      k[1] += fine.lattice(v)[1];
    }
    fine.parent_cell_[c] = parent_by_centroid.at(k);
  }

  fine.parent_edge_.resize(fine.num_edges());
  for (Index e = 0; e < fine.num_edges(); ++e) {
    Index child = fine.edge_cells(e)[0];
    Index parent = fine.parent_cell_[child];
    const auto& fa = fine.lattice(fine.edge(e)[0]);
    const auto& fb = fine.lattice(fine.edge(e)[1]);
    EdgeParent ep{EdgeParent::Kind::CoarseCellInterior, parent, 0.0, 0.0};
    for (const auto& ce : coarse.cell_edges(parent)) {
      const auto& ca = coarse.lattice(coarse.edge(ce.edge)[0]);
      const auto& cb = coarse.lattice(coarse.edge(ce.edge)[1]);
      // fine lattice = 2 * coarse lattice; midpoint of the coarse edge
      Lattice cm{ca[0] + cb[0], ca[1] + cb[1]};
      Lattice c0{2 * ca[0], 2 * ca[1]}, c1{2 * cb[0], 2 * cb[1]};
      auto tpos = [&](const Lattice& p) { return p == c0 ? 0.0 : (p == cm ? 0.5 : 1.0); };
      const bool first_half = (fa == c0 || fb == c0) && (fa == cm || fb == cm);
      const bool second_half = (fa == c1 || fb == c1) && (fa == cm || fb == cm);
      if (!first_half && !second_half) continue;
      ep = {EdgeParent::Kind::CoarseEdge, ce.edge, tpos(fa), tpos(fb)};
      break;
    }
    fine.parent_edge_[e] = ep;
  }
  return fine;
}

inline Nesting nesting(const TriMesh& coarse, const TriMesh& fine) {
  const int nc = coarse.n(), nf = fine.n();
  if (nf % nc != 0) throw std::invalid_argument("nesting: fine mesh is not a refinement of coarse mesh");
  const int ratio = nf / nc;
  if ((ratio & (ratio - 1)) != 0)
    throw std::invalid_argument("nesting: refinement ratio must be a power of two");

  Nesting out;
  out.cell.resize(fine.num_cells());
  for (Index c = 0; c < fine.num_cells(); ++c) out.cell[c] = coarse.locate(fine.cell_centroid(c));

  out.edge.resize(fine.num_edges());
  for (Index e = 0; e < fine.num_edges(); ++e) {
    Index parent = out.cell[fine.edge_cells(e)[0]];
    const auto& fa = fine.lattice(fine.edge(e)[0]);
    const auto& fb = fine.lattice(fine.edge(e)[1]);
    EdgeParent ep{EdgeParent::Kind::CoarseCellInterior, parent, 0.0, 0.0};
    for (const auto& ce : coarse.cell_edges(parent)) {
      const auto& ca = coarse.lattice(coarse.edge(ce.edge)[0]);
      const auto& cb = coarse.lattice(coarse.edge(ce.edge)[1]);
      const long ax = static_cast<long>(ca[0]) * ratio, ay = static_cast<long>(ca[1]) * ratio;
      const long dx = static_cast<long>(cb[0]) * ratio - ax, dy = static_cast<long>(cb[1]) * ratio - ay;
      auto on_line = [&](const std::array<int, 2>& p) { return dx * (p[1] - ay) - dy * (p[0] - ax) == 0; };
      if (!on_line(fa) || !on_line(fb)) continue;
      const double len2 = static_cast<double>(dx * dx + dy * dy);
      ep.kind = EdgeParent::Kind::CoarseEdge;
      ep.index = ce.edge;
      ep.t0 = static_cast<double>(dx * (fa[0] - ax) + dy * (fa[1] - ay)) / len2;
      ep.t1 = static_cast<double>(dx * (fb[0] - ax) + dy * (fb[1] - ay)) / len2;
      break;
    }
    out.edge[e] = ep;
  }
  return out;
}

}  // namespace wgeig
