#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sparse.hpp"

namespace wgeig {

/// Failure of an iterative or factorization step. `residual` is the last relative
/// residual for iterative solvers, `pivot` the failing pivot for factorizations.
class SolverError : public std::runtime_error {
 public:
  explicit SolverError(const std::string& what, double residual = std::numeric_limits<double>::quiet_NaN(),
                       Index pivot = -1)
      : std::runtime_error(what), residual_(residual), pivot_(pivot) {}
  [[nodiscard]] double residual() const { return residual_; }
  [[nodiscard]] Index pivot() const { return pivot_; }

 private:
  double residual_;
  Index pivot_;
};

enum class Preconditioner { None, Diagonal };

struct PcgResult {
  Eigen::VectorXd x;
  int iterations = 0;
  double residual = 0.0;  ///< ||b - A x|| / ||b||
};

/// Preconditioned conjugate gradients for SPD A. Stops when ||b - A x|| <= tol ||b||.
inline PcgResult pcg(const SparseMatrix& a, const Eigen::VectorXd& b, Preconditioner precond, double tol,
                     int maxit, const Eigen::VectorXd* x0 = nullptr) {
  if (!(tol > 0.0)) throw std::invalid_argument("pcg: tol must be positive");
  if (a.rows() != a.cols() || b.size() != a.rows()) throw std::invalid_argument("pcg: dimension mismatch");
  const Index n = b.size();
  PcgResult out;
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    out.x = Eigen::VectorXd::Zero(n);
    return out;
  }

  Eigen::VectorXd inv_diag = Eigen::VectorXd::Ones(n);
  if (precond == Preconditioner::Diagonal) {
    inv_diag = a.diagonal();
    for (Index i = 0; i < n; ++i) {
      if (!(inv_diag[i] > 0.0)) throw SolverError("pcg: nonpositive diagonal entry, matrix is not SPD");
      inv_diag[i] = 1.0 / inv_diag[i];
    }
  }

  out.x = x0 ? *x0 : Eigen::VectorXd::Zero(n);
  Eigen::VectorXd r = x0 ? Eigen::VectorXd(b - a * out.x) : b;
  Eigen::VectorXd z = inv_diag.cwiseProduct(r);
  Eigen::VectorXd p = z;
  Eigen::VectorXd ap(n);
  double rz = r.dot(z);
  double rnorm = r.norm();

  while (rnorm > tol * bnorm) {
    if (out.iterations >= maxit)
      throw SolverError("pcg: no convergence after " + std::to_string(maxit) + " iterations", rnorm / bnorm);
    a.multiply(p.data(), ap.data());
    const double curvature = p.dot(ap);
    if (!(curvature > 0.0)) throw SolverError("pcg: negative curvature, matrix is not SPD", rnorm / bnorm);
    const double alpha = rz / curvature;
    out.x += alpha * p;
    r -= alpha * ap;
    z = inv_diag.cwiseProduct(r);
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
    rnorm = r.norm();
    ++out.iterations;
  }
  out.residual = rnorm / bnorm;
  return out;
}

/// Eigenpairs of a symmetric pencil, eigenvalues ascending, eigenvectors normalized so
/// that u_i^T A u_j = delta_ij with A the stiffness of the pencil.
struct EigenSet {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
  Eigen::VectorXd residuals;  ///< ||A u - lambda B u|| / ||A u||, when computed
  Index infinite = 0;          ///< directions with mu = 0 that were dropped
  int iterations = 0;
  std::uint64_t seed = 0;

  [[nodiscard]] Index count() const { return values.size(); }
};

/// In-place lower Cholesky factor; throws with the index of the first nonpositive pivot.
inline Eigen::MatrixXd cholesky_lower(const Eigen::MatrixXd& a) {
  const Index n = a.rows();
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    double d = a(j, j) - l.row(j).head(j).squaredNorm();
    if (!(d > 0.0))
      throw SolverError("cholesky: matrix is not positive definite at pivot " + std::to_string(j),
                        std::numeric_limits<double>::quiet_NaN(), j);
    l(j, j) = std::sqrt(d);
    for (Index i = j + 1; i < n; ++i) l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
  }
  return l;
}

/// Smallest eigenvalues of A y = lambda B y for dense symmetric A (SPD) and B (PSD),
/// computed from the reciprocal problem B y = mu A y so that B is never factorized.
/// All pairs with mu > 1e-300 are returned, lambda = 1/mu ascending, y^T A y = 1.
inline EigenSet dense_gevp_reciprocal(const Eigen::MatrixXd& a_in, const Eigen::MatrixXd& b_in) {
  if (a_in.rows() != a_in.cols() || b_in.rows() != b_in.cols() || a_in.rows() != b_in.rows())
    throw std::invalid_argument("dense_gevp_reciprocal: dimension mismatch");
  constexpr double mu_cut = 1e-300;
  const Index n = a_in.rows();
  const Eigen::MatrixXd a = 0.5 * (a_in + a_in.transpose());
  const Eigen::MatrixXd b = 0.5 * (b_in + b_in.transpose());

  const Eigen::MatrixXd l = cholesky_lower(a);
  const auto lt = l.triangularView<Eigen::Lower>();
  // C = L^{-1} B L^{-T}
  Eigen::MatrixXd c = lt.solve(b);
  c = lt.solve(c.transpose()).transpose().eval();
  c = 0.5 * (c + c.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
  if (es.info() != Eigen::Success) throw SolverError("dense_gevp_reciprocal: eigensolver failed");
  const Eigen::MatrixXd y = l.transpose().triangularView<Eigen::Upper>().solve(es.eigenvectors());

  EigenSet out;
  Index finite = 0;
  for (Index j = n - 1; j >= 0; --j)
    if (es.eigenvalues()[j] > mu_cut) ++finite;
  out.infinite = n - finite;
  out.values.resize(finite);
  out.vectors.resize(n, finite);
  // SelfAdjointEigenSolver sorts mu ascending; largest mu = smallest lambda.
  for (Index i = 0; i < finite; ++i) {
    const Index j = n - 1 - i;
    out.values[i] = 1.0 / es.eigenvalues()[j];
    out.vectors.col(i) = y.col(j);
  }
  return out;
}

struct ReferenceOptions {
  std::uint64_t seed = 20240607;
  int max_iterations = 500;
  Preconditioner precond = Preconditioner::Diagonal;
  int pcg_maxit = 50000;
};

/// The k smallest finite eigenpairs of A u = lambda B u where A is SPD and B is PSD,
/// with the kernel of B spanned by coordinate directions (the WG edge DOFs).
///
/// Block inverse subspace iteration with Rayleigh-Ritz. Each application of A^{-1} B is
/// a PCG solve on the full system; its result already satisfies the edge rows of the
/// pencil, so iterates stay in the statically condensed space. Converged when every
/// one of the first k pairs has ||A u - lambda B u|| <= tol ||A u||.
inline EigenSet reference_eigensolve(const SparseMatrix& a, const SparseMatrix& b, int k, double tol,
                                     const ReferenceOptions& opts = {}) {
  if (k < 1) throw std::invalid_argument("reference_eigensolve: k must be >= 1");
  if (!(tol > 0.0)) throw std::invalid_argument("reference_eigensolve: tol must be positive");
  if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows())
    throw std::invalid_argument("reference_eigensolve: dimension mismatch");
  const Index n = a.rows();

  std::vector<Index> interior;
  for (Index r = 0; r < n; ++r)
    if (b.row_ptr()[r + 1] > b.row_ptr()[r]) interior.push_back(r);
  const Index n_int = static_cast<Index>(interior.size());
  if (k > n_int)
    throw std::invalid_argument("reference_eigensolve: k = " + std::to_string(k) + " exceeds the " +
                                std::to_string(n_int) + " interior degrees of freedom");
  const Index block = std::min<Index>(k + std::max(4, k), n_int);

  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, block);
  for (Index j = 0; j < block; ++j)
    for (Index r : interior) x(r, j) = dist(rng);

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(block);
  Eigen::MatrixXd y(n, block);
  double worst = 1.0;
  EigenSet out;
  out.seed = opts.seed;

  for (int it = 1; it <= opts.max_iterations; ++it) {
    const double inner_tol = std::clamp(1e-2 * worst, 1e-2 * tol, 1e-6);
    const Eigen::MatrixXd bx = b * x;
    for (Index j = 0; j < block; ++j) {
      Eigen::VectorXd rhs = bx.col(j);
      std::optional<Eigen::VectorXd> guess;
      if (theta[j] > 0.0) guess = Eigen::VectorXd(x.col(j) / theta[j]);
      auto res = pcg(a, rhs, opts.precond, inner_tol, opts.pcg_maxit, guess ? &*guess : nullptr);
      y.col(j) = res.x;
    }
    const Eigen::MatrixXd ay = a * y;
    const Eigen::MatrixXd by = b * y;
    const Eigen::MatrixXd as = y.transpose() * ay;
    const Eigen::MatrixXd bs = y.transpose() * by;
    EigenSet rr = dense_gevp_reciprocal(as, bs);
    if (rr.count() < block) throw SolverError("reference_eigensolve: iteration block lost rank");

    const Eigen::MatrixXd z = rr.vectors.leftCols(block);
    x = y * z;
    theta = rr.values.head(block);
    const Eigen::MatrixXd ax = ay * z;
    const Eigen::MatrixXd bxn = by * z;

    out.residuals.resize(k);
    worst = 0.0;
    for (Index j = 0; j < k; ++j) {
      out.residuals[j] = (ax.col(j) - theta[j] * bxn.col(j)).norm() / ax.col(j).norm();
      worst = std::max(worst, out.residuals[j]);
    }
    out.iterations = it;
    if (worst <= tol) {
      out.values = theta.head(k);
      out.vectors = x.leftCols(k);
      return out;
    }
  }
  throw SolverError("reference_eigensolve: no convergence after " + std::to_string(opts.max_iterations) +
                        " iterations",
                    worst);
}

}  // namespace wgeig
