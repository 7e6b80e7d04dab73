#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "linalg.hpp"
#include "mesh.hpp"
#include "sparse.hpp"
#include "wgspace.hpp"

namespace wgeig {

/// A fine WG discretization together with its assembled pencil (A_h, B_h).
struct FineProblem {
  WgSpace space;
  SparseMatrix stiffness;
  SparseMatrix mass;

  FineProblem(TriMesh mesh, int degree)
      : space(std::move(mesh), degree), stiffness(assemble_stiffness(space)), mass(assemble_mass(space)) {}
};

struct SolverParams {
  double pcg_tol = 1e-12;
  int pcg_maxit = 50000;
  Preconditioner precond = Preconditioner::Diagonal;
};

/// Current eigenpair approximations: values ascending, vectors a_h-normalized columns.
struct Eigenpairs {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
};

/// The augmented subspace W_H + span{enrichment}, represented by the columns [P | U]
/// with P the coarse P1 prolongation, together with the projected pencil.
///
/// The products involving P are formed once; replacing the enrichment only costs
/// k applications of A_h and B_h.
class AugmentedBasis {
 public:
  AugmentedBasis(SparseMatrix prolongation, const SparseMatrix& stiffness, const SparseMatrix& mass)
      : p_(std::move(prolongation)), a_(&stiffness), b_(&mass) {
    if (p_.rows() != stiffness.rows()) throw std::invalid_argument("AugmentedBasis: prolongation size mismatch");
    const SparseMatrix pt = p_.transpose();
    ap_ = multiply(stiffness, p_);
    bp_ = multiply(mass, p_);
    ptap_ = multiply(pt, ap_).to_dense();
    ptbp_ = multiply(pt, bp_).to_dense();
    ptap_ = 0.5 * (ptap_ + ptap_.transpose()).eval();
    ptbp_ = 0.5 * (ptbp_ + ptbp_.transpose()).eval();
  }

  [[nodiscard]] Index coarse_dim() const { return p_.cols(); }
  [[nodiscard]] Index enrichment_dim() const { return u_.cols(); }
  [[nodiscard]] Index dim() const { return coarse_dim() + enrichment_dim(); }
  [[nodiscard]] const SparseMatrix& prolongation() const { return p_; }
  [[nodiscard]] const Eigen::MatrixXd& enrichment() const { return u_; }
  [[nodiscard]] const Eigen::MatrixXd& projected_stiffness() const { return as_; }
  [[nodiscard]] const Eigen::MatrixXd& projected_mass() const { return bs_; }
  /// True when the last set_enrichment() had to orthogonalize against W_H.
  [[nodiscard]] bool reorthogonalized() const { return reorthogonalized_; }

  /// Replace the enrichment vectors. They are a_h-orthonormalized among themselves,
  /// which leaves the subspace unchanged. If the projected stiffness is then not
  /// numerically SPD, the enrichment is made a_h-orthogonal to W_H (two projection passes)
  /// and assembly retried once.
  void set_enrichment(const Eigen::MatrixXd& enrichment) {
    if (enrichment.rows() != a_->rows()) throw std::invalid_argument("set_enrichment: vector length mismatch");
    reorthogonalized_ = false;
    u_ = a_orthonormalize(enrichment);
    assemble();
    try {
      wgeig::cholesky_lower(as_);
      return;
    } catch (const SolverError&) {
    }
    reorthogonalized_ = true;
    const LowerFactor coarse = factorize(ptap_);
    Eigen::MatrixXd v = u_;
    for (int pass = 0; pass < 2; ++pass) v -= p_ * Eigen::MatrixXd(coarse.llt_solve(ap_.transpose_times(v)));
    u_ = a_orthonormalize(v);
    assemble();
    wgeig::cholesky_lower(as_);  // throws SolverError with the offending pivot
  }

  /// Fine coefficients of the basis combinations in the columns of y.
  [[nodiscard]] Eigen::MatrixXd lift(const Eigen::MatrixXd& y) const {
    if (y.rows() != dim()) throw std::invalid_argument("lift: coefficient size mismatch");
    return p_ * Eigen::MatrixXd(y.topRows(coarse_dim())) + u_ * y.bottomRows(enrichment_dim());
  }

 private:
  struct LowerFactor {
    Eigen::MatrixXd l;
    [[nodiscard]] Eigen::MatrixXd llt_solve(const Eigen::MatrixXd& rhs) const {
      Eigen::MatrixXd t = l.triangularView<Eigen::Lower>().solve(rhs);
      return l.transpose().triangularView<Eigen::Upper>().solve(t);
    }
  };
  static LowerFactor factorize(const Eigen::MatrixXd& m) { return {wgeig::cholesky_lower(m)}; }

  [[nodiscard]] Eigen::MatrixXd a_orthonormalize(const Eigen::MatrixXd& u) const {
    const Eigen::MatrixXd au = (*a_) * u;
    Eigen::MatrixXd g = u.transpose() * au;
    g = 0.5 * (g + g.transpose()).eval();
    Eigen::MatrixXd l;
    try {
      l = wgeig::cholesky_lower(g);
    } catch (const SolverError& e) {
      throw SolverError("AugmentedBasis: enrichment vectors are linearly dependent", e.residual(), e.pivot());
    }
    // U L^{-T}
    return l.triangularView<Eigen::Lower>().solve(u.transpose()).transpose();
  }

  void assemble() {
    const Index nc = coarse_dim(), k = enrichment_dim();
    const Eigen::MatrixXd au = (*a_) * u_;
    const Eigen::MatrixXd bu = (*b_) * u_;
    as_.resize(nc + k, nc + k);
    bs_.resize(nc + k, nc + k);
    as_.topLeftCorner(nc, nc) = ptap_;
    bs_.topLeftCorner(nc, nc) = ptbp_;
    const Eigen::MatrixXd pau = p_.transpose_times(au);
    const Eigen::MatrixXd pbu = p_.transpose_times(bu);
    as_.topRightCorner(nc, k) = pau;
    as_.bottomLeftCorner(k, nc) = pau.transpose();
    bs_.topRightCorner(nc, k) = pbu;
    bs_.bottomLeftCorner(k, nc) = pbu.transpose();
    Eigen::MatrixXd uau = u_.transpose() * au, ubu = u_.transpose() * bu;
    as_.bottomRightCorner(k, k) = 0.5 * (uau + uau.transpose());
    bs_.bottomRightCorner(k, k) = 0.5 * (ubu + ubu.transpose());
  }

  SparseMatrix p_;
  const SparseMatrix* a_;
  const SparseMatrix* b_;
  SparseMatrix ap_, bp_;
  Eigen::MatrixXd ptap_, ptbp_;
  Eigen::MatrixXd u_;
  Eigen::MatrixXd as_, bs_;
  bool reorthogonalized_ = false;
};

struct StepResult {
  Eigenpairs pairs;
  EigenSet projected;   ///< full spectrum of the projected problem
  int pcg_iterations = 0;
  Index selected = -1;  ///< index chosen by the single-target rule (-1 for the k-pair step)
};

/// Solve a_h(u_hat_i, v) = lambda_i b_h(u_i, v) for every current pair.
inline Eigen::MatrixXd enrichment_solves(const SparseMatrix& a, const SparseMatrix& b, const Eigenpairs& current,
                                         const SolverParams& params, int* total_iterations = nullptr) {
  Eigen::MatrixXd u_hat(current.vectors.rows(), current.vectors.cols());
  int its = 0;
  for (Index i = 0; i < current.vectors.cols(); ++i) {
    const Eigen::VectorXd ui = current.vectors.col(i);
    const Eigen::VectorXd rhs = current.values[i] * (b * ui);
    auto res = pcg(a, rhs, params.precond, params.pcg_tol, params.pcg_maxit, &ui);
    u_hat.col(i) = res.x;
    its += res.iterations;
  }
  if (total_iterations) *total_iterations = its;
  return u_hat;
}

/// Rayleigh-Ritz on the augmented subspace, keeping the k smallest pairs.
inline StepResult project_smallest(AugmentedBasis& basis, const Eigen::MatrixXd& enrichment, Index k) {
  basis.set_enrichment(enrichment);
  StepResult out;
  out.projected = dense_gevp_reciprocal(basis.projected_stiffness(), basis.projected_mass());
  if (out.projected.count() < k) throw SolverError("augmented subspace has fewer than k finite eigenpairs");
  out.pairs.values = out.projected.values.head(k);
  out.pairs.vectors = basis.lift(out.projected.vectors.leftCols(k));
  return out;
}

/// One iteration of the first-k augmented subspace method: k linear solves on the fine
/// space, then the projected eigenproblem on W_H + span{u_hat_1..u_hat_k}.
inline StepResult algorithm_k_step(AugmentedBasis& basis, const SparseMatrix& a, const SparseMatrix& b,
                                   const Eigenpairs& current, const SolverParams& params) {
  int its = 0;
  const Eigen::MatrixXd u_hat = enrichment_solves(a, b, current, params, &its);
  StepResult out = project_smallest(basis, u_hat, current.vectors.cols());
  out.pcg_iterations = its;
  return out;
}

/// Index of the projected eigenvector with the largest normalized a_h-component along
/// the enrichment direction: argmax_j |a(u_j, u_hat)| / (|u_j|_a |u_hat|_a).
/// `column` is the position of u_hat in the projected basis. Ties go to the smaller index.
inline Index select_component(const Eigen::MatrixXd& projected_stiffness, const Eigen::MatrixXd& eigvecs,
                              Index column) {
  const Eigen::MatrixXd ay = projected_stiffness * eigvecs;
  const double uhat_norm = std::sqrt(projected_stiffness(column, column));
  Index best = -1;
  double best_score = -1.0;
  for (Index j = 0; j < eigvecs.cols(); ++j) {
    const double norm_j = std::sqrt(std::max(0.0, eigvecs.col(j).dot(ay.col(j))));
    const double score = std::abs(ay(column, j)) / (norm_j * uhat_norm);
    if (score > best_score) {
      best_score = score;
      best = j;
    }
  }
  return best;
}

/// One iteration of the single-eigenpair method for a possibly interior eigenpair.
inline StepResult algorithm_single_step(AugmentedBasis& basis, const SparseMatrix& a, const SparseMatrix& b,
                                        const Eigenpairs& current, const SolverParams& params) {
  if (current.vectors.cols() != 1) throw std::invalid_argument("algorithm_single_step: expects one eigenpair");
  StepResult out;
  const Eigen::MatrixXd u_hat = enrichment_solves(a, b, current, params, &out.pcg_iterations);
  basis.set_enrichment(u_hat);
  out.projected = dense_gevp_reciprocal(basis.projected_stiffness(), basis.projected_mass());
  out.selected = select_component(basis.projected_stiffness(), out.projected.vectors, basis.dim() - 1);
  out.pairs.values = Eigen::VectorXd::Constant(1, out.projected.values[out.selected]);
  out.pairs.vectors = basis.lift(out.projected.vectors.col(out.selected));
  return out;
}

// ---------------------------------------------------------------------------
// Error metrics

/// Contiguous range [first, last] of reference eigenvalues within a relative distance
/// `tol` of their neighbours, containing index i (0-based).
inline std::pair<Index, Index> eigen_cluster(const Eigen::VectorXd& values, Index i, double tol) {
  Index lo = i, hi = i;
  while (lo > 0 && std::abs(values[lo] - values[lo - 1]) <= tol * std::abs(values[lo])) --lo;
  while (hi + 1 < values.size() && std::abs(values[hi + 1] - values[hi]) <= tol * std::abs(values[hi])) ++hi;
  return {lo, hi};
}

/// How the iterate columns relate to the reference: the first m reference pairs
/// (first-k method) or one specific target (single-target method).
enum class IterateRole { Leading, Single };

struct SubspaceError {
  double a = 0.0;
  double b = 0.0;
};

namespace detail {

/// (I - Pi) X where Pi is the a_h-orthogonal projection onto span(basis).
inline Eigen::MatrixXd a_residual(const SparseMatrix& a, const Eigen::MatrixXd& basis, const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd ab = a * basis;
  Eigen::MatrixXd g = basis.transpose() * ab;
  g = 0.5 * (g + g.transpose()).eval();
  const Eigen::MatrixXd coeffs = g.ldlt().solve(ab.transpose() * x);
  return x - basis * coeffs;
}

}  // namespace detail

/// Distance of a reference eigenfunction from the span of computed iterates, in the a_h
/// norm and the b_h seminorm, with the a_h-orthogonal projection.
///
/// `target` is 0-based. When the target belongs to a cluster of reference eigenvalues
/// (relative spacing <= cluster_tol) the error is measured against the cluster as a whole:
/// the rms distance of the cluster's reference vectors from the iterate span when the
/// iterates cover the cluster, otherwise the distance of the cluster's iterates from the
/// cluster subspace. For an isolated target both readings coincide.
inline SubspaceError subspace_error(const Eigen::MatrixXd& iterates, IterateRole role, Index target,
                                    const EigenSet& reference, const SparseMatrix& a, const SparseMatrix& b,
                                    double cluster_tol) {
  if (iterates.rows() != a.rows() || reference.vectors.rows() != a.rows())
    throw std::invalid_argument("subspace_error: dimension mismatch");
  if (target < 0 || target >= reference.count()) throw std::out_of_range("subspace_error: target out of range");
  const auto [lo, hi] = eigen_cluster(reference.values, target, cluster_tol);
  const Index m = iterates.cols();
  const Index size = hi - lo + 1;
  const bool covered = role == IterateRole::Leading ? hi < m : size == 1;

  SubspaceError err;
  if (covered) {
    const Eigen::MatrixXd r = detail::a_residual(a, iterates, reference.vectors.middleCols(lo, size));
    for (Index j = 0; j < size; ++j) {
      err.a += std::max(0.0, r.col(j).dot(a * Eigen::VectorXd(r.col(j))));
      err.b += std::max(0.0, r.col(j).dot(b * Eigen::VectorXd(r.col(j))));
    }
    err.a = std::sqrt(err.a / size);
    err.b = std::sqrt(err.b / size);
    return err;
  }

  Eigen::MatrixXd cols;
  if (role == IterateRole::Single) {
    cols = iterates.leftCols(1);
  } else {
    const Index first = std::min(lo, m), last = std::min(hi, m - 1);
    if (last < first) throw std::out_of_range("subspace_error: target not covered by the iterates");
    cols = iterates.middleCols(first, last - first + 1);
  }
  const Eigen::MatrixXd r = detail::a_residual(a, reference.vectors.middleCols(lo, size), cols);
  for (Index j = 0; j < cols.cols(); ++j) {
    const Eigen::VectorXd cj = cols.col(j), rj = r.col(j);
    const double scale = cj.dot(a * cj);
    err.a += std::max(0.0, rj.dot(a * rj)) / scale;
    err.b += std::max(0.0, rj.dot(b * rj)) / scale;
  }
  err.a = std::sqrt(err.a / cols.cols());
  err.b = std::sqrt(err.b / cols.cols());
  return err;
}

/// Spectral gaps in the reciprocal scale for target i (1-based) and block size k.
struct GapDiagnostics {
  double projected_k = std::numeric_limits<double>::infinity();  ///< min_{j>k} |1/lambda_j^(l) - 1/ref_i|
  double projected_other = std::numeric_limits<double>::infinity();  ///< min_{j!=i} |1/lambda_j^(l) - 1/ref_i|
  double reference_k = std::numeric_limits<double>::infinity();  ///< min_{j>k} |1/ref_j - 1/ref_i|
};

inline GapDiagnostics gap_diagnostics(const Eigen::VectorXd& projected, const Eigen::VectorXd& reference, Index k,
                                      Index i) {
  if (i < 1 || i > reference.size()) throw std::out_of_range("gap_diagnostics: target out of range");
  GapDiagnostics g;
  const double mu = 1.0 / reference[i - 1];
  for (Index j = 0; j < projected.size(); ++j) {
    const double d = std::abs(1.0 / projected[j] - mu);
    if (j + 1 > k) g.projected_k = std::min(g.projected_k, d);
    if (j + 1 != i) g.projected_other = std::min(g.projected_other, d);
  }
  for (Index j = k; j < reference.size(); ++j) g.reference_k = std::min(g.reference_k, std::abs(1.0 / reference[j] - mu));
  return g;
}

inline double rayleigh_quotient(const Eigen::VectorXd& psi, const SparseMatrix& a, const SparseMatrix& b) {
  if (psi.size() != a.rows()) throw std::invalid_argument("rayleigh_quotient: dimension mismatch");
  const double den = psi.dot(b * psi);
  if (!(den > 0.0)) throw std::domain_error("rayleigh_quotient: vector has zero b-norm");
  return psi.dot(a * psi) / den;
}

// ---------------------------------------------------------------------------
// Drivers

struct IterationEntry {
  int iter = 0;
  Eigen::VectorXd lambda;
  Eigen::VectorXd a_err;  ///< NaN when no reference was supplied
  Eigen::VectorXd b_err;
  double seconds = 0.0;
  int pcg_iterations = 0;
  bool ritz = true;  ///< false for a starting guess that is not a Ritz value of the augmented space
  std::vector<GapDiagnostics> gaps;
};

struct IterationTrace {
  enum class Algorithm { FirstK, Single };
  Algorithm algorithm = Algorithm::FirstK;
  std::vector<int> targets;  ///< 1-based reference indices tracked by each column
  std::vector<IterationEntry> entries;
  std::uint64_t seed = 0;
  Index coarse_dim = 0;

  /// err(l) / err(l-1) for column t; NaN for the first entry.
  [[nodiscard]] double factor(std::size_t l, Index t, bool a_norm = true) const {
    if (l == 0 || l >= entries.size()) return std::numeric_limits<double>::quiet_NaN();
    const auto& cur = a_norm ? entries[l].a_err : entries[l].b_err;
    const auto& prev = a_norm ? entries[l - 1].a_err : entries[l - 1].b_err;
    return cur[t] / prev[t];
  }
  [[nodiscard]] std::vector<double> errors(Index t, bool a_norm = true) const {
    std::vector<double> out;
    for (const auto& e : entries) out.push_back(a_norm ? e.a_err[t] : e.b_err[t]);
    return out;
  }
};

struct RunOptions {
  int k = 1;              ///< first-k method block size
  int target = 1;         ///< single-target method: 1-based eigenpair index
  int iterations = 10;
  std::uint64_t seed = 1;
  SolverParams solver;
  double cluster_tol = 1e-6;
  double coarse_tol = 1e-10;  ///< coarse WG eigensolve used to start the single-target method
  /// Stop early once every eigenvalue changes by less than this, relatively (0 disables).
  double stop_tol = 0.0;
  /// Start the first-k method from these vectors instead of random ones.
  std::optional<Eigen::MatrixXd> initial;
};

namespace detail {

inline void record(IterationTrace& trace, IterationEntry entry, const Eigenpairs& pairs,
                   const Eigen::VectorXd* projected, const EigenSet* reference, const FineProblem& fine,
                   double cluster_tol) {
  const Index m = pairs.vectors.cols();
  entry.lambda = pairs.values;
  entry.a_err = Eigen::VectorXd::Constant(m, std::numeric_limits<double>::quiet_NaN());
  entry.b_err = entry.a_err;
  if (reference) {
    const auto role = trace.algorithm == IterationTrace::Algorithm::FirstK ? IterateRole::Leading : IterateRole::Single;
    for (Index t = 0; t < m; ++t) {
      const Index target = trace.targets[t] - 1;
      if (target >= reference->count()) continue;
      auto e = subspace_error(pairs.vectors, role, target, *reference, fine.stiffness, fine.mass, cluster_tol);
      entry.a_err[t] = e.a;
      entry.b_err[t] = e.b;
      if (projected) {
        const Index k = trace.algorithm == IterationTrace::Algorithm::FirstK ? m : 1;
        entry.gaps.push_back(gap_diagnostics(*projected, reference->values, k, trace.targets[t]));
      }
    }
  }
  trace.entries.push_back(std::move(entry));
}

inline bool settled(const Eigen::VectorXd& prev, const Eigen::VectorXd& cur, double stop_tol) {
  if (!(stop_tol > 0.0)) return false;
  for (Index i = 0; i < cur.size(); ++i)
    if (std::abs(cur[i] - prev[i]) > stop_tol * std::abs(cur[i])) return false;
  return true;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

/// Random start vectors: seeded uniform entries in [-1, 1] on every free DOF.
inline Eigen::MatrixXd random_start(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Eigen::MatrixXd x(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) x(i, j) = dist(rng);
  return x;
}

/// First-k augmented subspace method. Entry 0 of the trace is the Rayleigh-Ritz solve on
/// W_H + span{start vectors}; each later entry is one full iteration.
inline IterationTrace run_algorithm_k(const TriMesh& coarse, const FineProblem& fine, const RunOptions& opts,
                                      const EigenSet* reference = nullptr) {
  if (opts.k < 1) throw std::invalid_argument("run_algorithm_k: k must be >= 1");
  if (opts.iterations < 0) throw std::invalid_argument("run_algorithm_k: negative iteration count");
  IterationTrace trace;
  trace.algorithm = IterationTrace::Algorithm::FirstK;
  trace.seed = opts.seed;
  for (int i = 1; i <= opts.k; ++i) trace.targets.push_back(i);

  AugmentedBasis basis(prolong_p1(coarse, fine.space), fine.stiffness, fine.mass);
  trace.coarse_dim = basis.coarse_dim();

  auto t0 = std::chrono::steady_clock::now();
  Eigen::MatrixXd start;
  if (opts.initial) {
    start = *opts.initial;
    if (start.rows() != fine.space.num_dofs() || start.cols() != opts.k)
      throw std::invalid_argument("run_algorithm_k: initial vectors have the wrong shape");
  } else {
    start = random_start(fine.space.num_dofs(), opts.k, opts.seed);
  }
  StepResult step = project_smallest(basis, start, opts.k);
  IterationEntry first;
  first.iter = 0;
  first.seconds = detail::seconds_since(t0);
  detail::record(trace, std::move(first), step.pairs, &step.projected.values, reference, fine, opts.cluster_tol);

  Eigenpairs current = step.pairs;
  for (int l = 1; l <= opts.iterations; ++l) {
    t0 = std::chrono::steady_clock::now();
    step = algorithm_k_step(basis, fine.stiffness, fine.mass, current, opts.solver);
    const bool done = detail::settled(current.values, step.pairs.values, opts.stop_tol);
    current = step.pairs;
    IterationEntry e;
    e.iter = l;
    e.pcg_iterations = step.pcg_iterations;
    e.seconds = detail::seconds_since(t0);
    detail::record(trace, std::move(e), current, &step.projected.values, reference, fine, opts.cluster_tol);
    if (done) break;
  }
  return trace;
}

/// Single-eigenpair augmented subspace method for the target-th eigenpair. The start is
/// the target-th eigenpair of the WG pencil on the coarse mesh, prolonged to the fine
/// mesh; it is recorded as entry 0 with the coarse eigenvalue.
inline IterationTrace run_algorithm_single(const TriMesh& coarse, const FineProblem& fine, const RunOptions& opts,
                                           const EigenSet* reference = nullptr) {
  if (opts.target < 1) throw std::invalid_argument("run_algorithm_single: target must be >= 1");
  if (opts.iterations < 0) throw std::invalid_argument("run_algorithm_single: negative iteration count");
  IterationTrace trace;
  trace.algorithm = IterationTrace::Algorithm::Single;
  trace.seed = opts.seed;
  trace.targets = {opts.target};

  auto t0 = std::chrono::steady_clock::now();
  const FineProblem coarse_wg(coarse, fine.space.degree());
  ReferenceOptions ropts;
  ropts.seed = opts.seed;
  const EigenSet coarse_pairs = reference_eigensolve(coarse_wg.stiffness, coarse_wg.mass, opts.target, opts.coarse_tol, ropts);
  const WgVector start_coarse(coarse_wg.space, coarse_pairs.vectors.col(opts.target - 1));
  Eigenpairs current;
  current.values = Eigen::VectorXd::Constant(1, coarse_pairs.values[opts.target - 1]);
  current.vectors = prolong_wg(coarse_wg.space, fine.space, start_coarse).coeffs;
  current.vectors /= energy_norm(fine.stiffness, current.vectors.col(0));

  AugmentedBasis basis(prolong_p1(coarse, fine.space), fine.stiffness, fine.mass);
  trace.coarse_dim = basis.coarse_dim();
  IterationEntry first;
  first.iter = 0;
  first.ritz = false;
  first.seconds = detail::seconds_since(t0);
  detail::record(trace, std::move(first), current, nullptr, reference, fine, opts.cluster_tol);

  for (int l = 1; l <= opts.iterations; ++l) {
    t0 = std::chrono::steady_clock::now();
    StepResult step = algorithm_single_step(basis, fine.stiffness, fine.mass, current, opts.solver);
    const bool done = detail::settled(current.values, step.pairs.values, opts.stop_tol);
    current = step.pairs;
    IterationEntry e;
    e.iter = l;
    e.pcg_iterations = step.pcg_iterations;
    e.seconds = detail::seconds_since(t0);
    detail::record(trace, std::move(e), current, &step.projected.values, reference, fine, opts.cluster_tol);
    if (done) break;
  }
  return trace;
}

}  // namespace wgeig
