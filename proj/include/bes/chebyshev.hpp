#pragma once

#include <cstddef>
#include <vector>

#include "bes/be_laplacian.hpp"
#include "bes/sym_operator.hpp"
#include "bes/types.hpp"

namespace bes {

/// Polynomial filter sum_k T_k(L~) X Theta_k of order K on L~ = 2 L / lambda_max - I.
/// A 1x1 coefficient acts as a scalar on every channel.
struct ChebFilter {
  std::size_t order = 0;  // K
  double lambda_max = 2.0;
  std::vector<Matrix> coeffs;  // K + 1 entries, uniform shape

  /// Throws NonPositiveLambdaMax or ShapeMismatch.
  void validate() const;

  static ChebFilter scalar(double lambda_max, const std::vector<double>& theta);
};

/// Multiplicative safety margin applied to power-iteration estimates before scaling.
inline constexpr double kLambdaMaxSlack = 1.01;

/// kLambdaMaxSlack * lambda_max_power(op).
double estimate_lambda_max(const SymOperator& op);

/// 2 op / lambda_max - I. Throws NonPositiveLambdaMax.
SymOperator scale_operator(const SymOperator& op, double lambda_max);

/// Three-term recurrence on X; T_k(L~) is never materialized. Throws ShapeMismatch.
Matrix cheb_apply(const ChebFilter& filter, const SymOperator& op, const Matrix& x);

enum class OperatorKind { Unnormalized, SymNormalized };

/// The Bakry-Emery operator realized per `kind`.
SymOperator be_operator(const BEOperator& be, OperatorKind kind);

/// cheb_apply on L_mu (or its symmetric normalization); lambda_max is taken from the filter.
Matrix cheb_apply_be(const ChebFilter& filter, const BEOperator& be, const Matrix& x,
                     OperatorKind kind = OperatorKind::Unnormalized);

/// Scalar Chebyshev values T_0(x)..T_K(x).
std::vector<double> chebyshev_values(std::size_t order, double x);

}  // namespace bes
