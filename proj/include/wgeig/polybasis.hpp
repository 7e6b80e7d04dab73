#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "mesh.hpp"
#include "quadrature.hpp"

namespace wgeig {

/// Physical triangle with the affine map from the reference triangle.
struct Triangle {
  std::array<Point, 3> v;

  [[nodiscard]] double area() const {
    return 0.5 * ((v[1].x - v[0].x) * (v[2].y - v[0].y) - (v[2].x - v[0].x) * (v[1].y - v[0].y));
  }
  [[nodiscard]] Point centroid() const {
    return {(v[0].x + v[1].x + v[2].x) / 3.0, (v[0].y + v[1].y + v[2].y) / 3.0};
  }
  [[nodiscard]] double diameter() const {
    double d = 0.0;
    for (int k = 0; k < 3; ++k)
      d = std::max(d, std::hypot(v[(k + 1) % 3].x - v[k].x, v[(k + 1) % 3].y - v[k].y));
    return d;
  }
  [[nodiscard]] Point map(double xi, double eta) const {
    return {v[0].x + xi * (v[1].x - v[0].x) + eta * (v[2].x - v[0].x),
            v[0].y + xi * (v[1].y - v[0].y) + eta * (v[2].y - v[0].y)};
  }
  /// Barycentric coordinate of vertex k at p.
  [[nodiscard]] double barycentric(int k, Point p) const {
    const Point& a = v[(k + 1) % 3];
    const Point& b = v[(k + 2) % 3];
    return 0.5 * ((b.x - a.x) * (p.y - a.y) - (p.x - a.x) * (b.y - a.y)) / area();
  }
};

inline Triangle cell_triangle(const TriMesh& mesh, Index c) { return {mesh.cell_vertices(c)}; }

/// Integration points and weights on a physical triangle.
struct CellQuadrature {
  std::vector<Point> points;
  std::vector<double> weights;
};

inline CellQuadrature map_rule(const Triangle& t, const TriangleRule& rule) {
  CellQuadrature q;
  const double jac = 2.0 * t.area();
  for (std::size_t i = 0; i < rule.points.size(); ++i) {
    q.points.push_back(t.map(rule.points[i][0], rule.points[i][1]));
    q.weights.push_back(rule.weights[i] * jac);
  }
  return q;
}

/// P_r(K) for r in {0, 1}: {1} or {1, x - x_c, y - y_c}.
class CellBasis {
 public:
  CellBasis(const Triangle& t, int degree) : degree_(degree), center_(t.centroid()) {
    if (degree < 0 || degree > 1) throw std::invalid_argument("CellBasis: degree must be 0 or 1");
  }

  [[nodiscard]] int degree() const { return degree_; }
  [[nodiscard]] int size() const { return (degree_ + 1) * (degree_ + 2) / 2; }
  [[nodiscard]] Point center() const { return center_; }

  [[nodiscard]] double value(int i, Point p) const {
    switch (i) {
      case 0: return 1.0;
      case 1: return p.x - center_.x;
      default: return p.y - center_.y;
    }
  }
  [[nodiscard]] std::array<double, 2> gradient(int i) const {
    switch (i) {
      case 0: return {0.0, 0.0};
      case 1: return {1.0, 0.0};
      default: return {0.0, 1.0};
    }
  }

  /// Evaluate sum_i coeffs[i] * phi_i(p).
  template <class Vec>
  [[nodiscard]] double eval(const Vec& coeffs, Point p) const {
    double s = 0.0;
    for (int i = 0; i < size(); ++i) s += coeffs[i] * value(i, p);
    return s;
  }

 private:
  int degree_;
  Point center_;
};

/// P_s(e) in the arclength parameter t in [0, 1]: {1} or {1, t - 1/2}.
class EdgeBasis {
 public:
  explicit EdgeBasis(int degree) : degree_(degree) {
    if (degree < 0 || degree > 1) throw std::invalid_argument("EdgeBasis: degree must be 0 or 1");
  }
  [[nodiscard]] int degree() const { return degree_; }
  [[nodiscard]] int size() const { return degree_ + 1; }
  [[nodiscard]] double value(int i, double t) const { return i == 0 ? 1.0 : t - 0.5; }
  template <class Vec>
  [[nodiscard]] double eval(const Vec& coeffs, double t) const {
    double s = 0.0;
    for (int i = 0; i < size(); ++i) s += coeffs[i] * value(i, t);
    return s;
  }
  /// Gram matrix on an edge of the given length.
  [[nodiscard]] Eigen::MatrixXd gram(double length) const {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(size(), size());
    g(0, 0) = length;
    if (degree_ == 1) g(1, 1) = length / 12.0;
    return g;
  }

 private:
  int degree_;
};

/// Local Raviart-Thomas space G_r(K) = [P_r(K)]^2 + P^hom_r(K) x on a physical triangle.
///
/// Members are stored as coefficient tables over the scaled monomials
/// {1, s, t, s^2, s t, t^2} with s = (x - x_c)/h_K, t = (y - y_c)/h_K, one table per
/// vector component, and are orthonormalized against the cell L2 inner product.
class RtBasis {
 public:
  static constexpr int kMonomials = 6;

  RtBasis(const Triangle& t, int degree) : degree_(degree), center_(t.centroid()) {
    if (degree < 0 || degree > 1) throw std::invalid_argument("RtBasis: degree must be 0 or 1");
    if (!(std::abs(t.area()) >= 1e-14)) throw std::invalid_argument("RtBasis: degenerate triangle");
    scale_ = t.diameter();

    const int dim = degree == 0 ? 3 : 8;
    coeffs_.assign(dim, {});
    auto set = [&](int f, int comp, int mono, double v) { coeffs_[f][comp][mono] = v; };
    // monomial indices: 0:1 1:s 2:t 3:s^2 4:st 5:t^2
    if (degree == 0) {
      set(0, 0, 0, 1.0);
      set(1, 1, 0, 1.0);
      set(2, 0, 1, 1.0), set(2, 1, 2, 1.0);  // (s, t)
    } else {
      set(0, 0, 0, 1.0);
      set(1, 0, 1, 1.0);
      set(2, 0, 2, 1.0);
      set(3, 1, 0, 1.0);
      set(4, 1, 1, 1.0);
      set(5, 1, 2, 1.0);
      set(6, 0, 3, 1.0), set(6, 1, 4, 1.0);  // s (s, t)
      set(7, 0, 4, 1.0), set(7, 1, 5, 1.0);  // t (s, t)
    }

    // Orthonormalize: new_j = sum_i old_i * C(i, j) with C = L^{-T}, M = L L^T.
    const Eigen::MatrixXd m = raw_mass(t);
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) throw std::runtime_error("RtBasis: singular mass matrix");
    const Eigen::MatrixXd c = llt.matrixU().solve(Eigen::MatrixXd::Identity(dim, dim));
    std::vector<Table> orth(dim, Table{});
    for (int j = 0; j < dim; ++j)
      for (int i = 0; i < dim; ++i)
        for (int comp = 0; comp < 2; ++comp)
          for (int mo = 0; mo < kMonomials; ++mo) orth[j][comp][mo] += coeffs_[i][comp][mo] * c(i, j);
    coeffs_ = std::move(orth);
  }

  [[nodiscard]] int degree() const { return degree_; }
  [[nodiscard]] int size() const { return static_cast<int>(coeffs_.size()); }

  [[nodiscard]] std::array<double, 2> value(int j, Point p) const {
    auto m = monomials(p);
    std::array<double, 2> out{0.0, 0.0};
    for (int comp = 0; comp < 2; ++comp)
      for (int mo = 0; mo < kMonomials; ++mo) out[comp] += coeffs_[j][comp][mo] * m[mo];
    return out;
  }

  [[nodiscard]] double divergence(int j, Point p) const {
    const double s = (p.x - center_.x) / scale_, t = (p.y - center_.y) / scale_;
    const auto& cx = coeffs_[j][0];
    const auto& cy = coeffs_[j][1];
    // d/ds of x-component + d/dt of y-component, then chain rule 1/h
    const double dx = cx[1] + 2.0 * cx[3] * s + cx[4] * t;
    const double dy = cy[2] + cy[4] * s + 2.0 * cy[5] * t;
    return (dx + dy) / scale_;
  }

  /// Evaluate sum_j coeffs[j] q_j(p).
  template <class Vec>
  [[nodiscard]] std::array<double, 2> eval(const Vec& c, Point p) const {
    std::array<double, 2> out{0.0, 0.0};
    for (int j = 0; j < size(); ++j) {
      auto q = value(j, p);
      out[0] += c[j] * q[0];
      out[1] += c[j] * q[1];
    }
    return out;
  }

  /// (A q_i, q_j)_K with A a constant 2x2 matrix.
  [[nodiscard]] Eigen::MatrixXd mass(const Triangle& t,
                                     const Eigen::Matrix2d& a = Eigen::Matrix2d::Identity()) const {
    const int dim = size();
    auto q = map_rule(t, triangle_rule(2 * degree_ + 2));
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim, dim);
    for (std::size_t k = 0; k < q.points.size(); ++k) {
      std::vector<std::array<double, 2>> vals(dim);
      for (int j = 0; j < dim; ++j) vals[j] = value(j, q.points[k]);
      for (int i = 0; i < dim; ++i) {
        const double ax = a(0, 0) * vals[i][0] + a(0, 1) * vals[i][1];
        const double ay = a(1, 0) * vals[i][0] + a(1, 1) * vals[i][1];
        for (int j = 0; j < dim; ++j) m(i, j) += q.weights[k] * (ax * vals[j][0] + ay * vals[j][1]);
      }
    }
    return m;
  }

 private:
  using Table = std::array<std::array<double, kMonomials>, 2>;

  [[nodiscard]] std::array<double, kMonomials> monomials(Point p) const {
    const double s = (p.x - center_.x) / scale_, t = (p.y - center_.y) / scale_;
    return {1.0, s, t, s * s, s * t, t * t};
  }

  [[nodiscard]] Eigen::MatrixXd raw_mass(const Triangle& t) const { return mass(t); }

  int degree_;
  Point center_;
  double scale_ = 1.0;
  std::vector<Table> coeffs_;
};

inline RtBasis rt_basis(const Triangle& t, int degree) { return RtBasis(t, degree); }

}  // namespace wgeig
