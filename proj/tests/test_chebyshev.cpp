#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "bes/chebyshev.hpp"
#include "bes/error.hpp"
#include "bes/spectral.hpp"
#include "test_util.hpp"

using namespace bes;
using namespace bes::testing;

namespace {

// Y = sum_k U T_k(L~) U^T X Theta_k with T_k evaluated as cos(k acos x) on the eigenvalues.
Matrix spectral_oracle(const Matrix& op, double lambda_max, const std::vector<Matrix>& coeffs, const Matrix& x) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(op);
  const Matrix& u = es.eigenvectors();
  const Vector s = (2.0 * es.eigenvalues().array() / lambda_max - 1.0).matrix();
  const Matrix ux = u.transpose() * x;
  const Eigen::Index cout = coeffs.front().size() == 1 ? x.cols() : coeffs.front().cols();
  Matrix y = Matrix::Zero(x.rows(), cout);
  for (std::size_t k = 0; k < coeffs.size(); ++k) {
    Vector t(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      const double c = std::clamp(s[i], -1.0, 1.0);
      t[i] = std::cos(static_cast<double>(k) * std::acos(c));
    }
    const Matrix filtered = u * t.asDiagonal() * ux;
    if (coeffs[k].size() == 1)
      y += coeffs[k](0, 0) * filtered;
    else
      y += filtered * coeffs[k];
  }
  return y;
}

double rel_err(const Matrix& a, const Matrix& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

std::vector<Matrix> random_coeffs(std::mt19937_64& rng, std::size_t order, Eigen::Index cin, Eigen::Index cout) {
  std::vector<Matrix> c;
  for (std::size_t k = 0; k <= order; ++k) c.push_back(random_matrix(rng, cin, cout));
  return c;
}

Vector ring_mu() { return (Vector(4) << 1, 1, 3, 1).finished(); }

}  // namespace

TEST(ScaleOperator, Examples) {
  const Matrix i3 = scale_operator(SymOperator::identity(3).scaled(2.5), 2.5).dense();
  EXPECT_LE((i3 - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-15);

  const Vector ring = oracle_eigenvalues(scale_operator(laplacian(ring_graph(4)), 4.0).dense());
  EXPECT_LE((ring - (Vector(4) << -1, 0, 0, 1).finished()).cwiseAbs().maxCoeff(), 1e-14);

  const BEOperator be(ring_graph(4), Potential(ring_mu()));
  const Vector ev = oracle_eigenvalues(scale_operator(be.laplacian(), (9 + std::sqrt(17.0)) / 2).dense());
  EXPECT_NEAR(ev.maxCoeff(), 1.0, 1e-12);
  EXPECT_NEAR(ev.minCoeff(), -1.0, 1e-12);
}

TEST(ScaleOperator, EstimateKeepsSpectrumInRange) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 20; ++t) {
    const Graph g = random_graph(rng, 5 + 2 * t, 0.25);
    const BEOperator be(g, Potential(random_positive(rng, static_cast<Eigen::Index>(g.num_nodes()))));
    const double lmax = estimate_lambda_max(be.laplacian());
    const Vector ev = oracle_eigenvalues(scale_operator(be.laplacian(), lmax).dense());
    EXPECT_GE(ev.minCoeff(), -1.0 - 1e-12);
    EXPECT_LE(ev.maxCoeff(), 1.0);
  }
}

TEST(ScaleOperator, RejectsNonPositive) {
  EXPECT_THROW(scale_operator(SymOperator::identity(2), 0.0), Error);
  EXPECT_THROW(scale_operator(SymOperator::identity(2), -1.0), Error);
}

TEST(ChebValues, MatchTrigonometricForm) {
  for (double x : {-1.0, -0.3, 0.0, 0.5, 1.0}) {
    const auto t = chebyshev_values(12, x);
    ASSERT_EQ(t.size(), 13u);
    for (std::size_t k = 0; k <= 12; ++k) EXPECT_NEAR(t[k], std::cos(k * std::acos(x)), 1e-12);
  }
}

TEST(ChebApply, IdentityFilter) {
  std::mt19937_64 rng(2);
  const Graph g = random_graph(rng, 10, 0.3);
  const Matrix x = random_matrix(rng, 10, 3);
  const ChebFilter f{0, 4.0, {Matrix::Identity(3, 3)}};
  EXPECT_EQ(cheb_apply(f, laplacian(g), x), x);
}

TEST(ChebApply, FirstOrderIsScaledOperator) {
  std::mt19937_64 rng(3);
  const Graph g = random_graph(rng, 10, 0.3);
  const Matrix x = random_matrix(rng, 10, 3);
  const ChebFilter f{1, 5.0, {Matrix::Zero(3, 3), Matrix::Identity(3, 3)}};
  const Matrix expected = scale_operator(laplacian(g), 5.0).dense() * x;
  EXPECT_LE(rel_err(cheb_apply(f, laplacian(g), x), expected), 1e-14);
}

TEST(ChebApply, ScalarFilterMatchesSpectralOracle) {
  std::mt19937_64 rng(4);
  const Graph g = random_graph(rng, 30, 0.15);
  const SymOperator l = laplacian(g);
  const double lmax = estimate_lambda_max(l);
  std::vector<double> theta;
  for (int k = 0; k <= 5; ++k) theta.push_back(random_vector(rng, 1)[0]);
  const Matrix x = random_matrix(rng, 30, 2);
  const ChebFilter f = ChebFilter::scalar(lmax, theta);
  std::vector<Matrix> c;
  for (double t : theta) c.push_back(Matrix::Constant(1, 1, t));
  EXPECT_LE(rel_err(cheb_apply(f, l, x), spectral_oracle(l.dense(), lmax, c, x)), 1e-9);
}

TEST(ChebApply, MatrixCoefficientsMatchOracleOnLAndLmu) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 24; ++t) {
    const auto n = static_cast<std::size_t>(4 + (t * 7) % 61);
    const std::size_t order = static_cast<std::size_t>(t % 13);
    const Graph g = random_graph(rng, n, 0.2);
    const BEOperator be(g, Potential(random_positive(rng, static_cast<Eigen::Index>(n))));
    for (const SymOperator& op : {laplacian(g), be.laplacian()}) {
      const double lmax = std::max(estimate_lambda_max(op), 1e-3);
      const auto coeffs = random_coeffs(rng, order, 3, 2);
      const Matrix x = random_matrix(rng, static_cast<Eigen::Index>(n), 3);
      const ChebFilter f{order, lmax, coeffs};
      EXPECT_LE(rel_err(cheb_apply(f, op, x), spectral_oracle(op.dense(), lmax, coeffs, x)), 1e-9)
          << "n=" << n << " K=" << order;
    }
  }
}

TEST(ChebApplyBE, UnitPotentialIsBitIdentical) {
  std::mt19937_64 rng(6);
  const Graph g = random_graph(rng, 20, 0.2);
  const Matrix x = random_matrix(rng, 20, 2);
  const ChebFilter f{4, 7.0, random_coeffs(rng, 4, 2, 2)};
  const BEOperator be(g, Potential::constant(20, 1.0));
  EXPECT_EQ(cheb_apply_be(f, be, x), cheb_apply(f, laplacian(g), x));
}

TEST(ChebApplyBE, HighPassIsOrthogonalToConstants) {
  // p(s) = 1 + s vanishes at s = -1, the image of the kernel.
  const BEOperator be(ring_graph(4), Potential(ring_mu()));
  const double lmax = (9 + std::sqrt(17.0)) / 2;
  const ChebFilter f = ChebFilter::scalar(lmax, {1.0, 1.0});
  std::mt19937_64 rng(7);
  const Matrix y = cheb_apply_be(f, be, random_matrix(rng, 4, 3));
  EXPECT_LE(y.colwise().sum().cwiseAbs().maxCoeff(), 1e-9);
}

TEST(ChebApplyBE, NormalizedMatchesOracle) {
  std::mt19937_64 rng(8);
  const Graph g = random_connected_graph(rng, 25, 0.15);
  const BEOperator be(g, Potential(random_positive(rng, 25)));
  const auto coeffs = random_coeffs(rng, 6, 2, 3);
  const Matrix x = random_matrix(rng, 25, 2);
  const ChebFilter f{6, 2.0, coeffs};
  const Matrix sym = normalized_be(be).dense();
  EXPECT_LE(rel_err(cheb_apply_be(f, be, x, OperatorKind::SymNormalized), spectral_oracle(sym, 2.0, coeffs, x)), 1e-9);
}

TEST(ChebApply, CommutesWithRingRotation) {
  std::mt19937_64 rng(9);
  const Matrix x = random_matrix(rng, 4, 2);
  Matrix rotated(4, 2);
  for (int i = 0; i < 4; ++i) rotated.row((i + 1) % 4) = x.row(i);
  const ChebFilter f{3, 4.0, random_coeffs(rng, 3, 2, 2)};
  const BEOperator be(ring_graph(4), Potential::constant(4, 1.0));
  const Matrix y = cheb_apply_be(f, be, x), yr = cheb_apply_be(f, be, rotated);
  for (int i = 0; i < 4; ++i) EXPECT_LE((yr.row((i + 1) % 4) - y.row(i)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(ChebApply, Linear) {
  std::mt19937_64 rng(10);
  const Graph g = random_graph(rng, 15, 0.3);
  const SymOperator l = laplacian(g);
  const ChebFilter f{5, estimate_lambda_max(l), random_coeffs(rng, 5, 2, 2)};
  const Matrix x = random_matrix(rng, 15, 2), z = random_matrix(rng, 15, 2);
  const Matrix lhs = cheb_apply(f, l, 1.5 * x - 0.25 * z);
  const Matrix rhs = 1.5 * cheb_apply(f, l, x) - 0.25 * cheb_apply(f, l, z);
  EXPECT_LE(rel_err(lhs, rhs), 1e-13);
}

TEST(ChebApply, ShapeErrors) {
  const SymOperator l = laplacian(ring_graph(5));
  const ChebFilter f{1, 4.0, {Matrix::Identity(2, 2), Matrix::Identity(2, 2)}};
  EXPECT_THROW(cheb_apply(f, l, Matrix::Zero(4, 2)), Error);
  EXPECT_THROW(cheb_apply(f, l, Matrix::Zero(5, 3)), Error);
  const ChebFilter ragged{1, 4.0, {Matrix::Identity(2, 2), Matrix::Identity(3, 3)}};
  EXPECT_THROW(ragged.validate(), Error);
  const ChebFilter bad_lambda{0, 0.0, {Matrix::Identity(2, 2)}};
  EXPECT_THROW(bad_lambda.validate(), Error);
  const ChebFilter missing{2, 4.0, {Matrix::Identity(2, 2)}};
  EXPECT_THROW(missing.validate(), Error);
}
