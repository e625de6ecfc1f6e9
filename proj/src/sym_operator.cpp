#include "bes/sym_operator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bes/error.hpp"

namespace bes {

SymOperator SymOperator::from_dense(const Matrix& a) {
  if (a.rows() != a.cols()) {
    throw Error(ErrorCode::NotSymmetric, "matrix is not square");
  }
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  const double asym = a.size() == 0 ? 0.0 : (a - a.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * scale) {
    throw Error(ErrorCode::NotSymmetric, "asymmetry " + std::to_string(asym));
  }
  return SymOperator(a.sparseView(0.0, 0.0));
}

SymOperator SymOperator::from_sparse(SparseMatrix a) {
  if (a.rows() != a.cols()) {
    throw Error(ErrorCode::NotSymmetric, "matrix is not square");
  }
  a.makeCompressed();
  return SymOperator(std::move(a));
}

SymOperator SymOperator::identity(std::size_t n) {
  SparseMatrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  m.setIdentity();
  return SymOperator(std::move(m));
}

SymOperator SymOperator::diagonal(const Vector& d) {
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(d.size()));
  for (Eigen::Index i = 0; i < d.size(); ++i) t.emplace_back(i, i, d[i]);
  SparseMatrix m(d.size(), d.size());
  m.setFromTriplets(t.begin(), t.end());
  return SymOperator(std::move(m));
}

Matrix SymOperator::dense() const {
  if (size() > kMaxDenseSize) {
    throw Error(ErrorCode::TooLarge, "dense realization requested for n=" + std::to_string(size()));
  }
  return Matrix(mat_);
}

Matrix SymOperator::apply(const Matrix& x) const {
  if (x.rows() != mat_.cols()) throw Error(ErrorCode::ShapeMismatch, "operator/matrix rows differ");
  return mat_ * x;
}

Vector SymOperator::apply(const Vector& x) const {
  if (x.size() != mat_.cols()) throw Error(ErrorCode::LengthMismatch, "operator/vector size differ");
  return mat_ * x;
}

double SymOperator::max_abs() const {
  double m = 0.0;
  for (Eigen::Index k = 0; k < mat_.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(mat_, k); it; ++it) m = std::max(m, std::abs(it.value()));
  }
  return m;
}

SymOperator SymOperator::scaled(double s) const {
  SparseMatrix m = mat_ * s;
  return SymOperator(std::move(m));
}

SymOperator SymOperator::shifted(double s) const {
  SparseMatrix id(mat_.rows(), mat_.cols());
  id.setIdentity();
  SparseMatrix m = mat_ + s * id;
  m.makeCompressed();
  return SymOperator(std::move(m));
}

}  // namespace bes
