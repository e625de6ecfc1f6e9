#include "bes/chebyshev.hpp"

#include <string>

#include "bes/error.hpp"
#include "bes/spectral.hpp"

namespace bes {

void ChebFilter::validate() const {
  if (!(lambda_max > 0.0)) throw Error(ErrorCode::NonPositiveLambdaMax, "lambda_max=" + std::to_string(lambda_max));
  if (coeffs.size() != order + 1) {
    throw Error(ErrorCode::ShapeMismatch, "expected " + std::to_string(order + 1) + " coefficients");
  }
  for (const Matrix& c : coeffs) {
    if (c.rows() != coeffs.front().rows() || c.cols() != coeffs.front().cols()) {
      throw Error(ErrorCode::ShapeMismatch, "coefficient shapes differ across orders");
    }
  }
}

ChebFilter ChebFilter::scalar(double lambda_max, const std::vector<double>& theta) {
  ChebFilter f;
  f.order = theta.empty() ? 0 : theta.size() - 1;
  f.lambda_max = lambda_max;
  for (double t : theta) f.coeffs.push_back(Matrix::Constant(1, 1, t));
  return f;
}

double estimate_lambda_max(const SymOperator& op) {
  return kLambdaMaxSlack * lambda_max_power(op, 1000, 1e-8).value;
}

SymOperator scale_operator(const SymOperator& op, double lambda_max) {
  if (!(lambda_max > 0.0)) throw Error(ErrorCode::NonPositiveLambdaMax, "lambda_max=" + std::to_string(lambda_max));
  return op.scaled(2.0 / lambda_max).shifted(-1.0);
}

namespace {
void accumulate(Matrix& y, const Matrix& tx, const Matrix& coeff) {
  if (coeff.rows() == 1 && coeff.cols() == 1) {
    y += coeff(0, 0) * tx;
  } else {
    y += tx * coeff;
  }
}
}  // namespace

Matrix cheb_apply(const ChebFilter& filter, const SymOperator& op, const Matrix& x) {
  filter.validate();
  if (static_cast<std::size_t>(x.rows()) != op.size()) {
    throw Error(ErrorCode::ShapeMismatch, "signal rows " + std::to_string(x.rows()) + " vs operator " +
                                              std::to_string(op.size()));
  }
  const Matrix& c0 = filter.coeffs.front();
  const bool scalar = c0.rows() == 1 && c0.cols() == 1;
  if (!scalar && c0.rows() != x.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "coefficient rows " + std::to_string(c0.rows()) + " vs channels " +
                                              std::to_string(x.cols()));
  }
  const SymOperator scaled = scale_operator(op, filter.lambda_max);
  Matrix y = Matrix::Zero(x.rows(), scalar ? x.cols() : c0.cols());
  Matrix prev = x;
  accumulate(y, prev, filter.coeffs[0]);
  if (filter.order == 0) return y;
  Matrix cur = scaled.apply(x);
  accumulate(y, cur, filter.coeffs[1]);
  for (std::size_t k = 2; k <= filter.order; ++k) {
    Matrix next = 2.0 * scaled.apply(cur) - prev;
    prev = std::move(cur);
    cur = std::move(next);
    accumulate(y, cur, filter.coeffs[k]);
  }
  return y;
}

SymOperator be_operator(const BEOperator& be, OperatorKind kind) {
  return kind == OperatorKind::SymNormalized ? normalized_be(be) : be.laplacian();
}

Matrix cheb_apply_be(const ChebFilter& filter, const BEOperator& be, const Matrix& x, OperatorKind kind) {
  return cheb_apply(filter, be_operator(be, kind), x);
}

std::vector<double> chebyshev_values(std::size_t order, double x) {
  std::vector<double> t(order + 1);
  t[0] = 1.0;
  if (order >= 1) t[1] = x;
  for (std::size_t k = 2; k <= order; ++k) t[k] = 2.0 * x * t[k - 1] - t[k - 2];
  return t;
}

}  // namespace bes
