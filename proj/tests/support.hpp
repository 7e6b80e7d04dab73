#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include <wgeig/wgeig.hpp>

namespace testing {

inline double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

/// Integral of x^i y^j over the reference triangle: i! j! / (i + j + 2)!.
inline double triangle_moment(int i, int j) { return factorial(i) * factorial(j) / factorial(i + j + 2); }

/// Exact for quadratics on any triangle: area/3 times the sum over edge midpoints.
inline double midpoint_rule(const wgeig::Triangle& t, const std::function<double(wgeig::Point)>& f) {
  double s = 0.0;
  for (int k = 0; k < 3; ++k) {
    const auto& a = t.v[k];
    const auto& b = t.v[(k + 1) % 3];
    s += f({0.5 * (a.x + b.x), 0.5 * (a.y + b.y)});
  }
  return std::abs(t.area()) / 3.0 * s;
}

/// Finite eigenvalues of A u = lambda B u from the eigenvalues mu of the dense
/// nonsymmetric matrix A^{-1} B, ascending. Only used on small problems.
inline Eigen::VectorXd brute_force_pencil(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double mu_cut = 1e-10) {
  const Eigen::MatrixXd m = a.inverse() * b;
  Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
  std::vector<double> lam;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const std::complex<double> mu = es.eigenvalues()[i];
    if (std::abs(mu) > mu_cut * m.norm()) lam.push_back(1.0 / mu.real());
  }
  std::sort(lam.begin(), lam.end());
  return Eigen::Map<Eigen::VectorXd>(lam.data(), static_cast<Eigen::Index>(lam.size()));
}

/// Dense Schur complement of the edge block: free DOFs are split into cell interiors
/// (the nonempty rows of B) and the remaining edge DOFs.
struct Condensed {
  Eigen::MatrixXd schur;
  Eigen::MatrixXd mass;
};

inline Condensed condense(const wgeig::SparseMatrix& a_sp, const wgeig::SparseMatrix& b_sp) {
  const Eigen::MatrixXd a = a_sp.to_dense(), b = b_sp.to_dense();
  std::vector<Eigen::Index> in, ed;
  for (Eigen::Index r = 0; r < b.rows(); ++r) (b.row(r).cwiseAbs().maxCoeff() > 0.0 ? in : ed).push_back(r);
  auto pick = [](const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& r, const std::vector<Eigen::Index>& c) {
    Eigen::MatrixXd out(r.size(), c.size());
    for (std::size_t i = 0; i < r.size(); ++i)
      for (std::size_t j = 0; j < c.size(); ++j) out(i, j) = m(r[i], c[j]);
    return out;
  };
  const Eigen::MatrixXd aee = pick(a, ed, ed), aei = pick(a, ed, in);
  Condensed out;
  out.schur = pick(a, in, in) - aei.transpose() * aee.ldlt().solve(aei);
  out.mass = pick(b, in, in);
  return out;
}

/// Lanczos with full reorthogonalization; returns the Ritz values of the tridiagonal matrix.
inline Eigen::VectorXd lanczos_ritz(const wgeig::SparseMatrix& a, int steps, std::uint64_t seed) {
  const Eigen::Index n = a.rows();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist;
  Eigen::MatrixXd q(n, steps);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = dist(rng);
  v.normalize();
  Eigen::VectorXd alpha(steps), beta(steps);
  int m = 0;
  for (; m < steps; ++m) {
    q.col(m) = v;
    Eigen::VectorXd w = a * v;
    alpha[m] = v.dot(w);
    for (int pass = 0; pass < 2; ++pass)
      for (int j = 0; j <= m; ++j) w -= q.col(j).dot(w) * q.col(j);
    beta[m] = w.norm();
    if (beta[m] < 1e-14) {
      ++m;
      break;
    }
    v = w / beta[m];
  }
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    t(i, i) = alpha[i];
    if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[i];
  }
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(t).eigenvalues();
}

inline Eigen::MatrixXd random_spd(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Eigen::MatrixXd g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g(i, j) = dist(rng);
  return g * g.transpose() + n * Eigen::MatrixXd::Identity(n, n);
}

}  // namespace testing
