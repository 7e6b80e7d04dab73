#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "mesh.hpp"

namespace wgeig {

struct Triplet {
  Index row;
  Index col;
  double value;
};

/// Compressed sparse row matrix. Column indices are strictly increasing within a row
/// and no explicit zeros are stored.
class SparseMatrix {
 public:
  SparseMatrix() = default;

  /// Duplicates are summed in the order they were produced.
  static SparseMatrix from_triplets(Index rows, Index cols, std::vector<Triplet> trips,
                                    bool symmetric = false) {
    std::stable_sort(trips.begin(), trips.end(), [](const Triplet& a, const Triplet& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    SparseMatrix m;
    m.rows_ = rows;
    m.cols_ = cols;
    m.symmetric_ = symmetric;
    m.row_ptr_.assign(rows + 1, 0);
    std::size_t i = 0;
    while (i < trips.size()) {
      const Index r = trips[i].row, c = trips[i].col;
      if (r < 0 || r >= rows || c < 0 || c >= cols)
        throw std::out_of_range("SparseMatrix: triplet index out of range");
      double v = 0.0;
      while (i < trips.size() && trips[i].row == r && trips[i].col == c) v += trips[i++].value;
      if (v != 0.0) {
        m.col_idx_.push_back(c);
        m.values_.push_back(v);
        ++m.row_ptr_[r + 1];
      }
    }
    std::partial_sum(m.row_ptr_.begin(), m.row_ptr_.end(), m.row_ptr_.begin());
    return m;
  }

  static SparseMatrix identity(Index n) {
    std::vector<Triplet> t;
    for (Index i = 0; i < n; ++i) t.push_back({i, i, 1.0});
    return from_triplets(n, n, std::move(t), true);
  }

  [[nodiscard]] Index rows() const { return rows_; }
  [[nodiscard]] Index cols() const { return cols_; }
  [[nodiscard]] Index nonzeros() const { return static_cast<Index>(values_.size()); }
  [[nodiscard]] bool symmetric() const { return symmetric_; }
  [[nodiscard]] const std::vector<Index>& row_ptr() const { return row_ptr_; }
  [[nodiscard]] const std::vector<Index>& col_idx() const { return col_idx_; }
  [[nodiscard]] const std::vector<double>& values() const { return values_; }

  [[nodiscard]] double coeff(Index r, Index c) const {
    auto b = col_idx_.begin() + row_ptr_[r], e = col_idx_.begin() + row_ptr_[r + 1];
    auto it = std::lower_bound(b, e, c);
    return (it != e && *it == c) ? values_[it - col_idx_.begin()] : 0.0;
  }

  [[nodiscard]] Eigen::VectorXd diagonal() const {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(std::min(rows_, cols_));
    for (Index r = 0; r < d.size(); ++r) d[r] = coeff(r, r);
    return d;
  }

  /// y = M x
  void multiply(const double* x, double* y) const {
    for (Index r = 0; r < rows_; ++r) {
      double s = 0.0;
      for (Index k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) s += values_[k] * x[col_idx_[k]];
      y[r] = s;
    }
  }

  [[nodiscard]] Eigen::VectorXd operator*(const Eigen::VectorXd& x) const {
    if (x.size() != cols_) throw std::invalid_argument("SparseMatrix: dimension mismatch");
    Eigen::VectorXd y(rows_);
    multiply(x.data(), y.data());
    return y;
  }

  [[nodiscard]] Eigen::MatrixXd operator*(const Eigen::MatrixXd& x) const {
    if (x.rows() != cols_) throw std::invalid_argument("SparseMatrix: dimension mismatch");
    Eigen::MatrixXd y(rows_, x.cols());
    for (Index j = 0; j < x.cols(); ++j) multiply(x.col(j).data(), y.col(j).data());
    return y;
  }

  /// M^T X without forming the transpose.
  [[nodiscard]] Eigen::MatrixXd transpose_times(const Eigen::MatrixXd& x) const {
    if (x.rows() != rows_) throw std::invalid_argument("SparseMatrix: dimension mismatch");
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(cols_, x.cols());
    for (Index r = 0; r < rows_; ++r)
      for (Index k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) y.row(col_idx_[k]) += values_[k] * x.row(r);
    return y;
  }

  [[nodiscard]] SparseMatrix transpose() const {
    std::vector<Triplet> t;
    t.reserve(values_.size());
    for (Index r = 0; r < rows_; ++r)
      for (Index k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) t.push_back({col_idx_[k], r, values_[k]});
    return from_triplets(cols_, rows_, std::move(t), symmetric_);
  }

  [[nodiscard]] Eigen::MatrixXd to_dense() const {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(rows_, cols_);
    for (Index r = 0; r < rows_; ++r)
      for (Index k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) d(r, col_idx_[k]) = values_[k];
    return d;
  }

  /// max |M - M^T|
  [[nodiscard]] double asymmetry() const {
    if (rows_ != cols_) throw std::invalid_argument("SparseMatrix: not square");
    double worst = 0.0;
    for (Index r = 0; r < rows_; ++r)
      for (Index k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
        worst = std::max(worst, std::abs(values_[k] - coeff(col_idx_[k], r)));
    return worst;
  }

  /// Symmetric permutation P M P^T where perm[old] = new.
  [[nodiscard]] SparseMatrix permuted(const std::vector<Index>& perm) const {
    std::vector<Triplet> t;
    t.reserve(values_.size());
    for (Index r = 0; r < rows_; ++r)
      for (Index k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
        t.push_back({perm[r], perm[col_idx_[k]], values_[k]});
    return from_triplets(rows_, cols_, std::move(t), symmetric_);
  }

 private:
  Index rows_ = 0;
  Index cols_ = 0;
  bool symmetric_ = false;
  std::vector<Index> row_ptr_{0};
  std::vector<Index> col_idx_;
  std::vector<double> values_;
};

/// C = A B
inline SparseMatrix multiply(const SparseMatrix& a, const SparseMatrix& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("multiply: dimension mismatch");
  std::vector<Triplet> t;
  std::vector<double> acc(b.cols(), 0.0);
  std::vector<Index> mark(b.cols(), -1), used;
  for (Index r = 0; r < a.rows(); ++r) {
    used.clear();
    for (Index ka = a.row_ptr()[r]; ka < a.row_ptr()[r + 1]; ++ka) {
      const Index mid = a.col_idx()[ka];
      const double av = a.values()[ka];
      for (Index kb = b.row_ptr()[mid]; kb < b.row_ptr()[mid + 1]; ++kb) {
        const Index c = b.col_idx()[kb];
        if (mark[c] != r) {
          mark[c] = r;
          acc[c] = 0.0;
          used.push_back(c);
        }
        acc[c] += av * b.values()[kb];
      }
    }
    std::sort(used.begin(), used.end());
    for (Index c : used) t.push_back({r, c, acc[c]});
  }
  return SparseMatrix::from_triplets(a.rows(), b.cols(), std::move(t));
}

}  // namespace wgeig
