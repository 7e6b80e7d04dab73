#include <catch_amalgamated.hpp>

#include <map>
#include <random>

#include "support.hpp"

using namespace wgeig;

namespace {

using Field = std::function<std::array<double, 2>(Point)>;

/// sum_K (A grad_w u, grad_w v)_K with u, v given as functions, boundary traces included.
double local_form(const WgSpace& s, const std::function<double(Point)>& u, const std::function<double(Point)>& v,
                  const Eigen::Matrix2d& a = Eigen::Matrix2d::Identity()) {
  double sum = 0.0;
  for (Index c = 0; c < s.mesh().num_cells(); ++c) {
    const Eigen::VectorXd qu = weak_gradient_local(s, c, s.project_local(c, u));
    const Eigen::VectorXd qv = weak_gradient_local(s, c, s.project_local(c, v));
    sum += qu.dot(s.rt(c).mass(s.triangle(c), a) * qv);
  }
  return sum;
}

/// Max deviation between an RT coefficient vector and a vector field, sampled at quadrature points.
double field_error(const WgSpace& s, Index c, const Eigen::VectorXd& q, const Field& f) {
  const auto pts = map_rule(s.triangle(c), triangle_rule(4));
  double worst = 0.0;
  for (const Point& p : pts.points) {
    const auto v = s.rt(c).eval(q, p);
    const auto g = f(p);
    worst = std::max({worst, std::abs(v[0] - g[0]), std::abs(v[1] - g[1])});
  }
  return worst;
}

Index upper_cell(const TriMesh& m) {
  for (Index c = 0; c < m.num_cells(); ++c)
    if (m.cell_centroid(c).y > m.cell_centroid(c).x) return c;
  return -1;
}

}  // namespace

TEST_CASE("space dimensions and DOF layout") {
  for (int r : {0, 1})
    for (int n : {1, 2, 5}) {
      const WgSpace s(TriMesh::build_uniform(n), r);
      const auto& m = s.mesh();
      const Index interior_edges = m.num_edges() - m.num_boundary_edges();
      CHECK(s.num_dofs() == m.num_cells() * (r + 1) * (r + 2) / 2 + interior_edges * (r + 1));
      CHECK(s.num_interior_dofs() == m.num_cells() * s.cell_dim());
      CHECK(s.local_dim() == s.cell_dim() + 3 * (r + 1));
      std::vector<int> seen(s.num_dofs(), 0);
      for (Index c = 0; c < m.num_cells(); ++c)
        for (Index d : s.local_dofs(c))
          if (d >= 0) ++seen[d];
      // cell DOFs belong to one cell, interior-edge DOFs to two
      for (Index d = 0; d < s.num_dofs(); ++d) CHECK(seen[d] == (d < s.num_interior_dofs() ? 1 : 2));
      for (Index e = 0; e < m.num_edges(); ++e)
        CHECK((s.edge_dof(e, 0) < 0) == m.is_boundary_edge(e));
    }
}

TEST_CASE("weak gradient satisfies its defining relation") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (int r : {0, 1}) {
    const WgSpace s(TriMesh::build_uniform(3), r);
    const auto& m = s.mesh();
    for (Index c : {Index{0}, Index{7}, Index{17}}) {
      Eigen::VectorXd local(s.local_dim());
      for (Index i = 0; i < local.size(); ++i) local[i] = dist(rng);
      const Eigen::VectorXd q = weak_gradient_local(s, c, local);
      const RtBasis& rt = s.rt(c);
      const CellBasis cb = s.cell_basis(c);
      const EdgeBasis eb = s.edge_basis();
      const auto cq = map_rule(s.triangle(c), triangle_rule(6));
      for (int j = 0; j < rt.size(); ++j) {
        double lhs = 0.0, rhs = 0.0;
        for (std::size_t k = 0; k < cq.points.size(); ++k) {
          const auto qv = rt.eval(q, cq.points[k]);
          const auto pj = rt.value(j, cq.points[k]);
          lhs += cq.weights[k] * (qv[0] * pj[0] + qv[1] * pj[1]);
          rhs -= cq.weights[k] * cb.eval(local.head(s.cell_dim()), cq.points[k]) * rt.divergence(j, cq.points[k]);
        }
        for (int le = 0; le < 3; ++le) {
          const auto ce = m.cell_edges(c)[le];
          const Point nrm = m.edge_normal(ce.edge);
          const auto er = edge_rule(5);
          const Eigen::VectorXd vb = local.segment(s.cell_dim() + le * s.edge_dim(), s.edge_dim());
          for (std::size_t k = 0; k < er.points.size(); ++k) {
            const Point p = m.edge_point(ce.edge, er.points[k]);
            const auto pj = rt.value(j, p);
            rhs += er.weights[k] * m.edge_length(ce.edge) * eb.eval(vb, er.points[k]) * ce.sign *
                   (pj[0] * nrm.x + pj[1] * nrm.y);
          }
        }
        CHECK(std::abs(lhs - rhs) < 1e-12);
      }
    }
  }
}

TEST_CASE("weak gradient of zero and of linear functions") {
  for (int r : {0, 1}) {
    const WgSpace s(TriMesh::build_uniform(4), r);
    for (Index c = 0; c < s.mesh().num_cells(); ++c) {
      CHECK(weak_gradient_local(s, c, Eigen::VectorXd::Zero(s.local_dim())).cwiseAbs().maxCoeff() == 0.0);
      const Eigen::VectorXd q = weak_gradient_local(s, c, s.project_local(c, [](Point p) { return p.x; }));
      CHECK(field_error(s, c, q, [](Point) { return std::array<double, 2>{1.0, 0.0}; }) < 1e-12);
    }
    CHECK_THROWS_AS(weak_gradient_local(s, 0, Eigen::VectorXd::Zero(s.local_dim() + 1)), std::invalid_argument);
  }
}

TEST_CASE("weak gradient of a hypotenuse indicator matches an independent local solve") {
  const WgSpace s(TriMesh::build_uniform(1), 0);
  const auto& m = s.mesh();
  const Index c = upper_cell(m);  // vertices (0,0), (1,1), (0,1)
  REQUIRE(c >= 0);
  Eigen::VectorXd local = Eigen::VectorXd::Zero(s.local_dim());
  for (int k = 0; k < 3; ++k) {
    const Point mid = m.edge_point(m.cell_edges(c)[k].edge, 0.5);
    if (mid.x == mid.y) local[s.cell_dim() + k] = 1.0;
  }
  REQUIRE(local.sum() == 1.0);

  // raw RT0 basis (1,0), (0,1), (x,y); every mass entry is a quadratic integral
  const Triangle t = s.triangle(c);
  std::array<std::function<std::array<double, 2>(Point)>, 3> p{
      [](Point) { return std::array<double, 2>{1.0, 0.0}; }, [](Point) { return std::array<double, 2>{0.0, 1.0}; },
      [](Point q) { return std::array<double, 2>{q.x, q.y}; }};
  Eigen::Matrix3d mass;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      mass(i, j) = testing::midpoint_rule(t, [&](Point q) { return p[i](q)[0] * p[j](q)[0] + p[i](q)[1] * p[j](q)[1]; });
  // <1, p.n> on the diagonal with outward normal (1,-1)/sqrt(2) and length sqrt(2)
  const Eigen::Vector3d rhs(1.0, -1.0, 0.0);
  const Eigen::Vector3d coef = mass.ldlt().solve(rhs);
  auto oracle = [&](Point q) {
    return std::array<double, 2>{coef[0] + coef[2] * q.x, coef[1] + coef[2] * q.y};
  };
  CHECK(field_error(s, c, weak_gradient_local(s, c, local), oracle) < 1e-12);
}

TEST_CASE("commuting identity on n=8") {
  const std::vector<std::pair<std::function<double(Point)>, Field>> linear{
      {[](Point p) { return p.x; }, [](Point) { return std::array<double, 2>{1.0, 0.0}; }},
      {[](Point p) { return p.y; }, [](Point) { return std::array<double, 2>{0.0, 1.0}; }},
      {[](Point p) { return p.x + 2 * p.y; }, [](Point) { return std::array<double, 2>{1.0, 2.0}; }}};
  const std::vector<std::pair<std::function<double(Point)>, Field>> quadratic{
      {[](Point p) { return p.x * p.x; }, [](Point p) { return std::array<double, 2>{2 * p.x, 0.0}; }},
      {[](Point p) { return p.x * p.y; }, [](Point p) { return std::array<double, 2>{p.y, p.x}; }},
      {[](Point p) { return p.y * p.y; }, [](Point p) { return std::array<double, 2>{0.0, 2 * p.y}; }}};
  for (int r : {0, 1}) {
    const WgSpace s(TriMesh::build_uniform(8), r);
    auto cases = linear;
    cases.insert(cases.end(), quadratic.begin(), quadratic.end());
    for (const auto& [v, grad] : cases)
      for (Index c = 0; c < s.mesh().num_cells(); ++c) {
        const Eigen::VectorXd lhs = weak_gradient_local(s, c, s.project_local(c, v));
        const Eigen::VectorXd rhs = s.project_rt(c, grad);
        REQUIRE((lhs - rhs).cwiseAbs().maxCoeff() < 1e-11);
      }
  }
}

TEST_CASE("project_qh examples") {
  const WgSpace s1(TriMesh::build_uniform(4), 1);
  CHECK(project_qh(s1, [](Point) { return 0.0; }).coeffs.cwiseAbs().maxCoeff() == 0.0);

  const WgSpace s0(TriMesh::build_uniform(1), 0);
  const WgVector v = project_qh(s0, [](Point p) { return p.x; });
  const Index up = upper_cell(s0.mesh());
  CHECK(v.coeffs[s0.interior_dof(up, 0)] == Catch::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(v.coeffs[s0.interior_dof(1 - up, 0)] == Catch::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(v.coeffs.size() == 3);
}

TEST_CASE("r=1 cell projection matches weighted least squares on a split cell") {
  const WgSpace s(TriMesh::build_uniform(4), 1);
  auto f = [](Point p) { return p.x * (1 - p.x) * p.y * (1 - p.y); };
  const WgVector v = project_qh(s, f);
  for (Index c = 0; c < s.mesh().num_cells(); ++c) {
    const Triangle t = s.triangle(c);
    const CellBasis cb = s.cell_basis(c);
    auto mid = [](Point a, Point b) { return Point{0.5 * (a.x + b.x), 0.5 * (a.y + b.y)}; };
    const Point m01 = mid(t.v[0], t.v[1]), m12 = mid(t.v[1], t.v[2]), m20 = mid(t.v[2], t.v[0]);
    std::vector<Point> pts;
    std::vector<double> w;
    for (const Triangle& sub : {Triangle{{t.v[0], m01, m20}}, Triangle{{m01, t.v[1], m12}}, Triangle{{m20, m12, t.v[2]}},
                                Triangle{{m01, m12, m20}}}) {
      const auto q = map_rule(sub, triangle_rule(5));
      pts.insert(pts.end(), q.points.begin(), q.points.end());
      w.insert(w.end(), q.weights.begin(), q.weights.end());
    }
    Eigen::MatrixXd design(pts.size(), 3);
    Eigen::VectorXd rhs(pts.size());
    for (std::size_t k = 0; k < pts.size(); ++k) {
      for (int i = 0; i < 3; ++i) design(k, i) = std::sqrt(w[k]) * cb.value(i, pts[k]);
      rhs[k] = std::sqrt(w[k]) * f(pts[k]);
    }
    const Eigen::VectorXd oracle = design.colPivHouseholderQr().solve(rhs);
    for (int i = 0; i < 3; ++i) CHECK(std::abs(v.coeffs[s.interior_dof(c, i)] - oracle[i]) < 1e-13);
  }
}

TEST_CASE("stiffness matrix") {
  for (int r : {0, 1}) {
    const WgSpace s(TriMesh::build_uniform(6), r);
    const SparseMatrix a = assemble_stiffness(s);
    CHECK(a.asymmetry() == 0.0);
    CHECK(local_form(s, [](Point p) { return p.x + 2 * p.y; }, [](Point p) { return p.x; }) ==
          Catch::Approx(1.0).epsilon(1e-12));
    Eigen::Matrix2d aniso;
    aniso << 2.0, 0.5, 0.5, 3.0;
    CHECK(local_form(s, [](Point p) { return p.x; }, [](Point p) { return p.y; }, aniso) ==
          Catch::Approx(0.5).epsilon(1e-12));

    // the global matrix is the sum of local forms for functions vanishing on the boundary
    auto u = [](Point p) { return p.x * (1 - p.x) * p.y * (1 - p.y); };
    auto v = [](Point p) { return std::sin(M_PI * p.x) * p.y * (1 - p.y); };
    const WgVector qu = project_qh(s, u), qv = project_qh(s, v);
    CHECK(qu.coeffs.dot(a * qv.coeffs) == Catch::Approx(local_form(s, u, v)).epsilon(1e-12));

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
      Eigen::VectorXd x(s.num_dofs());
      for (Index i = 0; i < x.size(); ++i) x[i] = dist(rng);
      REQUIRE(x.dot(a * x) > 0.0);
    }
  }
  const WgSpace s(TriMesh::build_uniform(2), 0);
  CHECK_THROWS_AS(assemble_stiffness(s, [](Index) { return Eigen::Matrix2d(Eigen::Vector2d(1.0, -1.0).asDiagonal()); }),
                  std::invalid_argument);
  CHECK_THROWS_AS(assemble_stiffness(s, [](Index) { return Eigen::Matrix2d((Eigen::Matrix2d() << 1, 0.5, 0, 1).finished()); }),
                  std::invalid_argument);
}

TEST_CASE("stiffness is positive definite: Lanczos Ritz values stay positive") {
  for (int r : {0, 1})
    for (int n : {4, 8, 16, 32}) {
      if (r == 1 && n == 32) continue;
      const WgSpace s(TriMesh::build_uniform(n), r);
      const Eigen::VectorXd ritz = testing::lanczos_ritz(assemble_stiffness(s), 50, 1);
      INFO("r=" << r << " n=" << n);
      CHECK(ritz.minCoeff() > 0.0);
    }
}

TEST_CASE("mass matrix") {
  const int n = 5;
  const WgSpace s(TriMesh::build_uniform(n), 0);
  const SparseMatrix b = assemble_mass(s);
  for (Index i = 0; i < s.num_interior_dofs(); ++i) CHECK(b.coeff(i, i) == Catch::Approx(0.5 / (n * n)).epsilon(1e-14));
  for (Index i = s.num_interior_dofs(); i < s.num_dofs(); ++i) CHECK(b.row_ptr()[i + 1] == b.row_ptr()[i]);
  for (int r : {0, 1}) {
    const WgSpace sr(TriMesh::build_uniform(4), r);
    const SparseMatrix br = assemble_mass(sr);
    Eigen::VectorXd one = Eigen::VectorXd::Zero(sr.num_dofs());
    for (Index c = 0; c < sr.mesh().num_cells(); ++c) one[sr.interior_dof(c, 0)] = 1.0;
    CHECK(one.dot(br * one) == Catch::Approx(1.0).epsilon(1e-14));
    // positive definite on cell DOFs, empty on edge DOFs
    const Eigen::MatrixXd dense = br.to_dense();
    const Index ni = sr.num_interior_dofs();
    CHECK(Eigen::LLT<Eigen::MatrixXd>(dense.topLeftCorner(ni, ni)).info() == Eigen::Success);
    CHECK(dense.rightCols(sr.num_dofs() - ni).cwiseAbs().maxCoeff() == 0.0);
    CHECK(br.asymmetry() == 0.0);
  }
}

TEST_CASE("norms") {
  const WgSpace s(TriMesh::build_uniform(16), 0);
  const SparseMatrix a = assemble_stiffness(s), b = assemble_mass(s);
  CHECK(a_norm(a, WgVector::zero(s)) == 0.0);
  CHECK(std::sqrt(local_form(s, [](Point p) { return p.x; }, [](Point p) { return p.x; })) ==
        Catch::Approx(1.0).epsilon(1e-12));
  // r=0: b-norm squared is sum |K| xbar_K^2
  const WgVector qx = project_qh(s, [](Point p) { return p.x; });
  double oracle = 0.0;
  for (Index c = 0; c < s.mesh().num_cells(); ++c)
    oracle += s.mesh().cell_area(c) * std::pow(s.mesh().cell_centroid(c).x, 2);
  CHECK(b_norm(b, qx) == Catch::Approx(std::sqrt(oracle)).epsilon(1e-13));
  const double h = s.mesh().mesh_size();
  CHECK(std::abs(b_norm(b, qx) - 1.0 / std::sqrt(3.0)) < h * h);
  CHECK_THROWS_AS(energy_norm(a, Eigen::VectorXd::Zero(3)), std::invalid_argument);
  const SparseMatrix neg = SparseMatrix::from_triplets(1, 1, {{0, 0, -1.0}});
  CHECK(energy_norm(neg, Eigen::VectorXd::Constant(1, 1e-8)) == 0.0);
  CHECK_THROWS_AS(energy_norm(neg, Eigen::VectorXd::Constant(1, 1.0)), std::domain_error);
}

TEST_CASE("static condensation preserves the finite spectrum at n=4") {
  for (int r : {0, 1}) {
    const WgSpace s(TriMesh::build_uniform(4), r);
    const SparseMatrix a = assemble_stiffness(s), b = assemble_mass(s);
    const auto cond = testing::condense(a, b);
    Eigen::LLT<Eigen::MatrixXd> llt(cond.schur);
    REQUIRE(llt.info() == Eigen::Success);
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(cond.schur, cond.mass);
    const Eigen::VectorXd full = testing::brute_force_pencil(a.to_dense(), b.to_dense());
    REQUIRE(full.size() == s.num_interior_dofs());
    for (Index i = 0; i < full.size(); ++i) CHECK(ges.eigenvalues()[i] == Catch::Approx(full[i]).epsilon(1e-9));
  }
}

TEST_CASE("P1 prolongation reproduces coarse gradients on every fine cell") {
  for (int r : {0, 1}) {
    const TriMesh coarse = TriMesh::build_uniform(2);
    const WgSpace fine(TriMesh::build_uniform(8), r);
    const SparseMatrix p = prolong_p1(coarse, fine);
    const auto col = interior_vertex_numbering(coarse);
    REQUIRE(p.rows() == fine.num_dofs());
    REQUIRE(p.cols() == 1);
    Eigen::VectorXd w(p.cols());
    w.setConstant(0.7);
    const Eigen::VectorXd pw = p * w;
    const Nesting nest = nesting(coarse, fine.mesh());
    for (Index c = 0; c < fine.mesh().num_cells(); ++c) {
      const Index k = nest.cell[c];
      const Triangle ct = cell_triangle(coarse, k);
      // gradient of the coarse piecewise linear function on its cell, by exact differencing
      std::array<double, 2> g{0.0, 0.0};
      for (int vtx = 0; vtx < 3; ++vtx) {
        const Index j = col[coarse.cell(k)[vtx]];
        if (j < 0) continue;
        const Point o{0.3, 0.3};
        g[0] += w[j] * (ct.barycentric(vtx, {o.x + 1, o.y}) - ct.barycentric(vtx, o));
        g[1] += w[j] * (ct.barycentric(vtx, {o.x, o.y + 1}) - ct.barycentric(vtx, o));
      }
      const Eigen::VectorXd q = weak_gradient_local(fine, c, fine.gather(c, pw));
      REQUIRE(field_error(fine, c, q, [&](Point) { return g; }) < 1e-12);
    }
  }
}

TEST_CASE("coarse hat functions vanish on fine boundary edges") {
  const TriMesh coarse = TriMesh::build_uniform(4);
  const WgSpace fine(TriMesh::build_uniform(16), 1);
  const auto col = interior_vertex_numbering(coarse);
  const Nesting nest = nesting(coarse, fine.mesh());
  for (Index e = 0; e < fine.mesh().num_edges(); ++e) {
    if (!fine.mesh().is_boundary_edge(e)) continue;
    const Index k = nest.cell[fine.mesh().edge_cells(e)[0]];
    const Triangle ct = cell_triangle(coarse, k);
    for (int vtx = 0; vtx < 3; ++vtx)
      if (col[coarse.cell(k)[vtx]] >= 0)
        CHECK(fine.project_edge(e, [&](Point p) { return ct.barycentric(vtx, p); }).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("P1 prolongation has full column rank") {
  for (int r : {0, 1}) {
    const WgSpace fine(TriMesh::build_uniform(8), r);
    const SparseMatrix p = prolong_p1(TriMesh::build_uniform(4), fine);
    CHECK(p.cols() == 9);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(p.to_dense());
    CHECK(lu.rank() == 9);
  }
  const WgSpace fine(TriMesh::build_uniform(6), 0);
  CHECK_THROWS(prolong_p1(TriMesh::build_uniform(4), fine));
}

TEST_CASE("WG prolongation") {
  const WgSpace c0(TriMesh::build_uniform(4), 0), f0(TriMesh::build_uniform(16), 0);
  CHECK(prolong_wg(c0, f0, WgVector::zero(c0)).coeffs.cwiseAbs().maxCoeff() == 0.0);

  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Eigen::VectorXd v(c0.num_dofs());
  for (Index i = 0; i < v.size(); ++i) v[i] = dist(rng);
  const WgVector pv = prolong_wg(c0, f0, {c0, v});
  const Nesting nest = nesting(c0.mesh(), f0.mesh());
  for (Index c = 0; c < f0.mesh().num_cells(); ++c)
    CHECK(pv.coeffs[f0.interior_dof(c, 0)] == Catch::Approx(v[c0.interior_dof(nest.cell[c], 0)]).epsilon(1e-14));
  // half-edges inherit the coarse edge value
  for (Index e = 0; e < f0.mesh().num_edges(); ++e) {
    const auto& ep = nest.edge[e];
    if (f0.mesh().is_boundary_edge(e) || ep.kind != EdgeParent::Kind::CoarseEdge) continue;
    CHECK(pv.coeffs[f0.edge_dof(e, 0)] == Catch::Approx(v[c0.edge_dof(ep.index, 0)]).epsilon(1e-14));
  }

  // r=1 restricts linears exactly: weak gradients agree away from the boundary
  const WgSpace c1(TriMesh::build_uniform(4), 1), f1(TriMesh::build_uniform(16), 1);
  const WgVector lin = prolong_wg(c1, f1, project_qh(c1, [](Point p) { return p.x + 2 * p.y; }));
  Index checked = 0;
  for (Index c = 0; c < f1.mesh().num_cells(); ++c) {
    bool touches = false;
    for (const auto& ce : f1.mesh().cell_edges(c)) {
      const auto ends = f1.mesh().edge(ce.edge);
      touches |= f1.mesh().is_boundary_vertex(ends[0]) || f1.mesh().is_boundary_vertex(ends[1]);
    }
    if (touches) continue;
    ++checked;
    const Eigen::VectorXd q = weak_gradient_local(f1, c, f1.gather(c, lin.coeffs));
    CHECK(field_error(f1, c, q, [](Point) { return std::array<double, 2>{1.0, 2.0}; }) < 1e-11);
  }
  CHECK(checked > 0);
  CHECK_THROWS_AS(prolong_wg(c0, f1, WgVector::zero(c0)), std::invalid_argument);
}
