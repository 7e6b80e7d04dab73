#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "mesh.hpp"
#include "polybasis.hpp"
#include "quadrature.hpp"
#include "sparse.hpp"

namespace wgeig {

/// Weak Galerkin space V_{r,r} on a triangulation: P_r on each cell interior, P_r on
/// each edge, zero on boundary edges. Boundary edge DOFs are eliminated, so the global
/// numbering covers free DOFs only: all cell-interior DOFs (cell-major) followed by the
/// DOFs of interior edges (edge-major).
///
/// The weak gradient on a cell lives in the local Raviart-Thomas space of the same degree.
/// Its local matrix (RT coefficients from interior + edge coefficients) is built once
/// per cell at construction.
class WgSpace {
 public:
  WgSpace(TriMesh mesh, int degree) : mesh_(std::move(mesh)), degree_(degree) {
    if (degree < 0 || degree > 1) throw std::invalid_argument("WgSpace: degree must be 0 or 1");
    cell_dim_ = (degree + 1) * (degree + 2) / 2;
    edge_dim_ = degree + 1;

    edge_offset_.assign(mesh_.num_edges(), -1);
    Index next = mesh_.num_cells() * cell_dim_;
    num_interior_ = next;
    for (Index e = 0; e < mesh_.num_edges(); ++e) {
      if (mesh_.is_boundary_edge(e)) continue;
      edge_offset_[e] = next;
      next += edge_dim_;
    }
    num_dofs_ = next;

    rt_.reserve(mesh_.num_cells());
    grad_.reserve(mesh_.num_cells());
    for (Index c = 0; c < mesh_.num_cells(); ++c) {
      rt_.emplace_back(cell_triangle(mesh_, c), degree_);
      grad_.push_back(build_weak_gradient(c));
    }
  }

  [[nodiscard]] const TriMesh& mesh() const { return mesh_; }
  [[nodiscard]] int degree() const { return degree_; }
  [[nodiscard]] int cell_dim() const { return cell_dim_; }
  [[nodiscard]] int edge_dim() const { return edge_dim_; }
  [[nodiscard]] int local_dim() const { return cell_dim_ + 3 * edge_dim_; }
  [[nodiscard]] int rt_dim() const { return degree_ == 0 ? 3 : 8; }
  [[nodiscard]] Index num_dofs() const { return num_dofs_; }
  [[nodiscard]] Index num_interior_dofs() const { return num_interior_; }

  [[nodiscard]] Index interior_dof(Index c, int m) const { return c * cell_dim_ + m; }
  /// -1 for boundary edges.
  [[nodiscard]] Index edge_dof(Index e, int s) const {
    return edge_offset_[e] < 0 ? -1 : edge_offset_[e] + s;
  }
  /// Global indices of the local interior + edge coefficients of a cell (-1 = eliminated).
  [[nodiscard]] std::vector<Index> local_dofs(Index c) const {
    std::vector<Index> out;
    out.reserve(local_dim());
    for (int m = 0; m < cell_dim_; ++m) out.push_back(interior_dof(c, m));
    for (const auto& ce : mesh_.cell_edges(c))
      for (int s = 0; s < edge_dim_; ++s) out.push_back(edge_dof(ce.edge, s));
    return out;
  }

  [[nodiscard]] Triangle triangle(Index c) const { return cell_triangle(mesh_, c); }
  [[nodiscard]] CellBasis cell_basis(Index c) const { return CellBasis(triangle(c), degree_); }
  [[nodiscard]] EdgeBasis edge_basis() const { return EdgeBasis(degree_); }
  [[nodiscard]] const RtBasis& rt(Index c) const { return rt_[c]; }
  /// RT coefficients of the weak gradient as a linear map of the local coefficients.
  [[nodiscard]] const Eigen::MatrixXd& weak_gradient_matrix(Index c) const { return grad_[c]; }

  /// Gather local coefficients of a global vector (eliminated DOFs read as zero).
  [[nodiscard]] Eigen::VectorXd gather(Index c, const Eigen::VectorXd& v) const {
    auto dofs = local_dofs(c);
    Eigen::VectorXd out(dofs.size());
    for (std::size_t i = 0; i < dofs.size(); ++i) out[i] = dofs[i] < 0 ? 0.0 : v[dofs[i]];
    return out;
  }

  /// L2 projection of f onto P_r(K).
  template <class F>
  [[nodiscard]] Eigen::VectorXd project_cell(Index c, F&& f) const {
    const CellBasis cb = cell_basis(c);
    const auto q = map_rule(triangle(c), triangle_rule(6));
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(cell_dim_, cell_dim_);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(cell_dim_);
    for (std::size_t k = 0; k < q.points.size(); ++k) {
      const double fv = f(q.points[k]);
      for (int i = 0; i < cell_dim_; ++i) {
        const double pi = cb.value(i, q.points[k]);
        rhs[i] += q.weights[k] * fv * pi;
        for (int j = 0; j < cell_dim_; ++j) gram(i, j) += q.weights[k] * pi * cb.value(j, q.points[k]);
      }
    }
    return gram.llt().solve(rhs);
  }

  /// L2 projection onto P_r(e) of g given as a function of the edge parameter t.
  template <class G>
  [[nodiscard]] Eigen::VectorXd project_edge_param(Index e, G&& g) const {
    const EdgeBasis eb = edge_basis();
    const auto q = edge_rule(5);
    const double len = mesh_.edge_length(e);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(edge_dim_);
    for (std::size_t k = 0; k < q.points.size(); ++k) {
      const double gv = g(q.points[k]);
      for (int s = 0; s < edge_dim_; ++s) rhs[s] += q.weights[k] * len * gv * eb.value(s, q.points[k]);
    }
    return eb.gram(len).llt().solve(rhs);
  }

  template <class F>
  [[nodiscard]] Eigen::VectorXd project_edge(Index e, F&& f) const {
    return project_edge_param(e, [&](double t) { return f(mesh_.edge_point(e, t)); });
  }

  /// Local Q_h f on one cell, boundary edges included.
  template <class F>
  [[nodiscard]] Eigen::VectorXd project_local(Index c, F&& f) const {
    Eigen::VectorXd out(local_dim());
    out.head(cell_dim_) = project_cell(c, f);
    for (int k = 0; k < 3; ++k)
      out.segment(cell_dim_ + k * edge_dim_, edge_dim_) = project_edge(mesh_.cell_edges(c)[k].edge, f);
    return out;
  }

  /// L2 projection of a vector field onto the local RT space.
  template <class F>
  [[nodiscard]] Eigen::VectorXd project_rt(Index c, F&& field) const {
    const RtBasis& rt = rt_[c];
    const Triangle tri = triangle(c);
    const auto q = map_rule(tri, triangle_rule(6));
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(rt.size());
    for (std::size_t k = 0; k < q.points.size(); ++k) {
      const std::array<double, 2> g = field(q.points[k]);
      for (int j = 0; j < rt.size(); ++j) {
        auto v = rt.value(j, q.points[k]);
        rhs[j] += q.weights[k] * (g[0] * v[0] + g[1] * v[1]);
      }
    }
    return rt.mass(tri).llt().solve(rhs);
  }

 private:
  [[nodiscard]] Eigen::MatrixXd build_weak_gradient(Index c) const {
    const Triangle tri = triangle(c);
    const RtBasis& rt = rt_[c];
    const CellBasis cb(tri, degree_);
    const EdgeBasis eb(degree_);
    const int nrt = rt.size();
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(nrt, local_dim());

    // -(v0, div q)_K
    const auto q = map_rule(tri, triangle_rule(2 * degree_ + 2));
    for (std::size_t k = 0; k < q.points.size(); ++k)
      for (int j = 0; j < nrt; ++j) {
        const double div = rt.divergence(j, q.points[k]);
        for (int m = 0; m < cell_dim_; ++m) rhs(j, m) -= q.weights[k] * cb.value(m, q.points[k]) * div;
      }

    // <v_b, q.n>_{dK}
    const auto eq = edge_rule(2 * degree_ + 1);
    for (int k = 0; k < 3; ++k) {
      const auto& ce = mesh_.cell_edges(c)[k];
      const Point nref = mesh_.edge_normal(ce.edge);
      const Point n{ce.sign * nref.x, ce.sign * nref.y};
      const double len = mesh_.edge_length(ce.edge);
      for (std::size_t g = 0; g < eq.points.size(); ++g) {
        const Point p = mesh_.edge_point(ce.edge, eq.points[g]);
        for (int j = 0; j < nrt; ++j) {
          auto v = rt.value(j, p);
          const double qn = v[0] * n.x + v[1] * n.y;
          for (int s = 0; s < edge_dim_; ++s)
            rhs(j, cell_dim_ + k * edge_dim_ + s) += eq.weights[g] * len * eb.value(s, eq.points[g]) * qn;
        }
      }
    }

    Eigen::LLT<Eigen::MatrixXd> llt(rt.mass(tri));
    if (llt.info() != Eigen::Success) throw std::runtime_error("WgSpace: singular local RT mass matrix");
    return llt.solve(rhs);
  }

  TriMesh mesh_;
  int degree_;
  int cell_dim_ = 1;
  int edge_dim_ = 1;
  Index num_interior_ = 0;
  Index num_dofs_ = 0;
  std::vector<Index> edge_offset_;
  std::vector<RtBasis> rt_;
  std::vector<Eigen::MatrixXd> grad_;
};

/// Coefficients of a WG function {v0, vb}; eliminated boundary DOFs are not stored.
struct WgVector {
  const WgSpace* space = nullptr;
  Eigen::VectorXd coeffs;

  WgVector() = default;
  WgVector(const WgSpace& s, Eigen::VectorXd c) : space(&s), coeffs(std::move(c)) {
    if (coeffs.size() != s.num_dofs()) throw std::invalid_argument("WgVector: length does not match space");
  }
  static WgVector zero(const WgSpace& s) { return {s, Eigen::VectorXd::Zero(s.num_dofs())}; }
};

/// RT coefficients q of the weak gradient: (q, p)_K = -(v0, div p)_K + <vb, p.n>_dK.
inline Eigen::VectorXd weak_gradient_local(const WgSpace& space, Index c, const Eigen::VectorXd& local) {
  if (c < 0 || c >= space.mesh().num_cells()) throw std::out_of_range("weak_gradient_local: bad cell");
  if (local.size() != space.local_dim())
    throw std::invalid_argument("weak_gradient_local: expected " + std::to_string(space.local_dim()) +
                                " local coefficients");
  return space.weak_gradient_matrix(c) * local;
}

/// Q_h f = {Q_0 f, Q_b f} on free DOFs.
template <class F>
WgVector project_qh(const WgSpace& space, F&& f) {
  const TriMesh& mesh = space.mesh();
  Eigen::VectorXd v = Eigen::VectorXd::Zero(space.num_dofs());
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    Eigen::VectorXd loc = space.project_cell(c, f);
    for (int m = 0; m < space.cell_dim(); ++m) v[space.interior_dof(c, m)] = loc[m];
  }
  for (Index e = 0; e < mesh.num_edges(); ++e) {
    if (mesh.is_boundary_edge(e)) continue;
    Eigen::VectorXd loc = space.project_edge(e, f);
    for (int s = 0; s < space.edge_dim(); ++s) v[space.edge_dof(e, s)] = loc[s];
  }
  return {space, std::move(v)};
}

/// a_h(u, v) = sum_K (A grad_w u, grad_w v)_K with A constant and SPD on each cell.
inline SparseMatrix assemble_stiffness(const WgSpace& space,
                                       const std::function<Eigen::Matrix2d(Index)>& coeff) {
  const TriMesh& mesh = space.mesh();
  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(mesh.num_cells()) * space.local_dim() * space.local_dim());
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    Eigen::Matrix2d a = coeff(c);
    if (std::abs(a(0, 1) - a(1, 0)) > 1e-14 * a.norm() || !(a(0, 0) > 0.0) || !(a.determinant() > 0.0))
      throw std::invalid_argument("assemble_stiffness: coefficient is not SPD on cell " + std::to_string(c));
    const Eigen::MatrixXd& g = space.weak_gradient_matrix(c);
    const Eigen::MatrixXd ma = space.rt(c).mass(space.triangle(c), a);
    Eigen::MatrixXd k = g.transpose() * ma * g;
    k = 0.5 * (k + k.transpose()).eval();
    const auto dofs = space.local_dofs(c);
    for (std::size_t i = 0; i < dofs.size(); ++i) {
      if (dofs[i] < 0) continue;
      for (std::size_t j = 0; j < dofs.size(); ++j)
        if (dofs[j] >= 0) trips.push_back({dofs[i], dofs[j], k(i, j)});
    }
  }
  return SparseMatrix::from_triplets(space.num_dofs(), space.num_dofs(), std::move(trips), true);
}

inline SparseMatrix assemble_stiffness(const WgSpace& space) {
  return assemble_stiffness(space, [](Index) { return Eigen::Matrix2d::Identity().eval(); });
}

/// b_h(u, v) = sum_K (u0, v0)_K; edge rows and columns are empty.
inline SparseMatrix assemble_mass(const WgSpace& space) {
  const TriMesh& mesh = space.mesh();
  std::vector<Triplet> trips;
  const int nc = space.cell_dim();
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const CellBasis cb = space.cell_basis(c);
    const auto q = map_rule(space.triangle(c), triangle_rule(2 * space.degree()));
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(nc, nc);
    for (std::size_t k = 0; k < q.points.size(); ++k)
      for (int i = 0; i < nc; ++i)
        for (int j = i; j < nc; ++j) m(i, j) += q.weights[k] * cb.value(i, q.points[k]) * cb.value(j, q.points[k]);
    m.triangularView<Eigen::StrictlyLower>() = m.transpose();
    for (int i = 0; i < nc; ++i)
      for (int j = 0; j < nc; ++j) trips.push_back({space.interior_dof(c, i), space.interior_dof(c, j), m(i, j)});
  }
  return SparseMatrix::from_triplets(space.num_dofs(), space.num_dofs(), std::move(trips), true);
}

/// sqrt(v^T M v); roundoff-negative values down to -1e-14 read as zero.
inline double energy_norm(const SparseMatrix& m, const Eigen::VectorXd& v) {
  if (v.size() != m.cols() || m.rows() != m.cols()) throw std::invalid_argument("norm: dimension mismatch");
  const double q = v.dot(m * v);
  if (q < 0.0) {
    if (q > -1e-14) return 0.0;
    throw std::domain_error("norm: matrix is not positive semidefinite");
  }
  return std::sqrt(q);
}

inline double a_norm(const SparseMatrix& stiffness, const WgVector& v) { return energy_norm(stiffness, v.coeffs); }
inline double b_norm(const SparseMatrix& mass, const WgVector& v) { return energy_norm(mass, v.coeffs); }

/// Coarse interior vertex -> column of the P1 prolongation (-1 on the boundary).
inline std::vector<Index> interior_vertex_numbering(const TriMesh& mesh) {
  std::vector<Index> col(mesh.num_vertices(), -1);
  Index next = 0;
  for (Index v = 0; v < mesh.num_vertices(); ++v)
    if (!mesh.is_boundary_vertex(v)) col[v] = next++;
  return col;
}

/// Embedding of the coarse conforming P1 space (zero boundary values) into the fine WG
/// space: column j is Q_h of the hat function of the j-th interior coarse vertex.
inline SparseMatrix prolong_p1(const TriMesh& coarse, const WgSpace& fine) {
  const TriMesh& fm = fine.mesh();
  const Nesting nest = nesting(coarse, fm);
  const auto col = interior_vertex_numbering(coarse);
  const Index ncols = std::count_if(col.begin(), col.end(), [](Index c) { return c >= 0; });
  std::vector<Triplet> trips;

  for (Index c = 0; c < fm.num_cells(); ++c) {
    const Index k = nest.cell[c];
    const Triangle ct = cell_triangle(coarse, k);
    for (int vtx = 0; vtx < 3; ++vtx) {
      const Index j = col[coarse.cell(k)[vtx]];
      if (j < 0) continue;
      Eigen::VectorXd loc = fine.project_cell(c, [&](Point p) { return ct.barycentric(vtx, p); });
      for (int m = 0; m < fine.cell_dim(); ++m) trips.push_back({fine.interior_dof(c, m), j, loc[m]});
    }
  }
  for (Index e = 0; e < fm.num_edges(); ++e) {
    if (fm.is_boundary_edge(e)) continue;
    const Index k = nest.cell[fm.edge_cells(e)[0]];
    const Triangle ct = cell_triangle(coarse, k);
    for (int vtx = 0; vtx < 3; ++vtx) {
      const Index j = col[coarse.cell(k)[vtx]];
      if (j < 0) continue;
      Eigen::VectorXd loc = fine.project_edge(e, [&](Point p) { return ct.barycentric(vtx, p); });
      for (int s = 0; s < fine.edge_dim(); ++s) trips.push_back({fine.edge_dof(e, s), j, loc[s]});
    }
  }
  return SparseMatrix::from_triplets(fine.num_dofs(), ncols, std::move(trips));
}

/// Coarse WG function -> fine WG function on a nested mesh of the same degree.
inline WgVector prolong_wg(const WgSpace& coarse, const WgSpace& fine, const WgVector& v) {
  if (coarse.degree() != fine.degree()) throw std::invalid_argument("prolong_wg: degree mismatch");
  if (v.coeffs.size() != coarse.num_dofs()) throw std::invalid_argument("prolong_wg: vector not in coarse space");
  const TriMesh& cm = coarse.mesh();
  const TriMesh& fm = fine.mesh();
  const Nesting nest = nesting(cm, fm);

  auto interior = [&](Index k) {
    const CellBasis cb = coarse.cell_basis(k);
    Eigen::VectorXd c(coarse.cell_dim());
    for (int m = 0; m < coarse.cell_dim(); ++m) c[m] = v.coeffs[coarse.interior_dof(k, m)];
    return [cb, c](Point p) { return cb.eval(c, p); };
  };

  Eigen::VectorXd out = Eigen::VectorXd::Zero(fine.num_dofs());
  for (Index c = 0; c < fm.num_cells(); ++c) {
    Eigen::VectorXd loc = fine.project_cell(c, interior(nest.cell[c]));
    for (int m = 0; m < fine.cell_dim(); ++m) out[fine.interior_dof(c, m)] = loc[m];
  }
  const EdgeBasis eb = coarse.edge_basis();
  for (Index e = 0; e < fm.num_edges(); ++e) {
    if (fm.is_boundary_edge(e)) continue;
    const EdgeParent& ep = nest.edge[e];
    Eigen::VectorXd loc;
    if (ep.kind == EdgeParent::Kind::CoarseEdge) {
      if (cm.is_boundary_edge(ep.index)) continue;
      Eigen::VectorXd ce(coarse.edge_dim());
      for (int s = 0; s < coarse.edge_dim(); ++s) ce[s] = v.coeffs[coarse.edge_dof(ep.index, s)];
      loc = fine.project_edge_param(e, [&](double t) { return eb.eval(ce, ep.t0 + t * (ep.t1 - ep.t0)); });
    } else {
      loc = fine.project_edge(e, interior(ep.index));
    }
    for (int s = 0; s < fine.edge_dim(); ++s) out[fine.edge_dof(e, s)] = loc[s];
  }
  return {fine, std::move(out)};
}

}  // namespace wgeig
