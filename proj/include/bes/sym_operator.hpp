#pragma once

#include <cstddef>

#include "bes/types.hpp"

namespace bes {

/// Largest operator size for which dense realizations (and hence eigendecompositions) are offered.
inline constexpr std::size_t kMaxDenseSize = 4096;

/// Symmetric real operator stored sparsely, with a dense realization on demand.
class SymOperator {
 public:
  SymOperator() = default;

  /// Throws NotSymmetric when max|A - A^T| > 1e-12 * max(1, max|A|).
  static SymOperator from_dense(const Matrix& a);
  static SymOperator from_sparse(SparseMatrix a);
  static SymOperator identity(std::size_t n);
  static SymOperator diagonal(const Vector& d);

  std::size_t size() const noexcept { return static_cast<std::size_t>(mat_.rows()); }
  const SparseMatrix& sparse() const noexcept { return mat_; }

  /// Throws TooLarge above kMaxDenseSize.
  Matrix dense() const;

  Matrix apply(const Matrix& x) const;
  Vector apply(const Vector& x) const;

  Vector diagonal_values() const { return mat_.diagonal(); }
  double max_abs() const;
  double coeff(std::size_t i, std::size_t j) const { return mat_.coeff(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)); }

  SymOperator scaled(double s) const;
  /// this + s * I
  SymOperator shifted(double s) const;

 private:
  explicit SymOperator(SparseMatrix m) : mat_(std::move(m)) {}
  SparseMatrix mat_;
};

}  // namespace bes
