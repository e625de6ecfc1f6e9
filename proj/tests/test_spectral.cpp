#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "bes/error.hpp"
#include "bes/spectral.hpp"
#include "test_util.hpp"

using namespace bes;
using namespace bes::testing;

namespace {

Matrix random_symmetric(std::mt19937_64& rng, Eigen::Index n) {
  const Matrix a = random_matrix(rng, n, n);
  return 0.5 * (a + a.transpose());
}

void expect_decomposition_invariants(const Matrix& a, const SpectralDecomposition& d) {
  const auto n = a.rows();
  const Matrix& u = d.eigenvectors;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  EXPECT_LE((u.transpose() * u - Matrix::Identity(n, n)).cwiseAbs().maxCoeff(), 1e-10);
  for (Eigen::Index k = 0; k < n; ++k) {
    EXPECT_LE((a * u.col(k) - d.eigenvalues[k] * u.col(k)).norm(), 1e-8 * scale) << k;
    if (k > 0) EXPECT_LE(d.eigenvalues[k - 1], d.eigenvalues[k]);
    const double big = u.col(k).cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < n; ++i)
      if (std::abs(u(i, k)) > 1e-10 * big) {
        EXPECT_GT(u(i, k), 0.0) << "sign convention, column " << k;
        break;
      }
  }
}

Vector ring_mu() { return (Vector(4) << 1, 1, 3, 1).finished(); }

}  // namespace

TEST(EigSym, Diagonal) {
  const SpectralDecomposition d = eig_sym(Matrix((Vector(3) << 3, 1, 2).finished().asDiagonal()));
  EXPECT_EQ(d.eigenvalues, (Vector(3) << 1, 2, 3).finished());
  expect_decomposition_invariants(Matrix((Vector(3) << 3, 1, 2).finished().asDiagonal()), d);
}

TEST(EigSym, FourRing) {
  const Vector ev = eig_sym(laplacian(ring_graph(4))).eigenvalues;
  EXPECT_LE((ev - (Vector(4) << 0, 2, 2, 4).finished()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(EigSym, FourRingWithPotential) {
  const Vector ev = eig_sym(BEOperator(ring_graph(4), Potential(ring_mu())).laplacian()).eigenvalues;
  const double r = std::sqrt(17.0);
  EXPECT_LE((ev - (Vector(4) << 0, (9 - r) / 2, 3, (9 + r) / 2).finished()).cwiseAbs().maxCoeff(), 1e-12);
  // the potential breaks the double eigenvalue
  for (int k = 1; k < 3; ++k) EXPECT_GT(ev[k + 1] - ev[k], 0.5);
}

TEST(EigSym, MatchesOracleOnRandomMatrices) {
  std::mt19937_64 rng(1);
  for (Eigen::Index n : {1, 2, 3, 7, 16, 40, 120}) {
    const Matrix a = random_symmetric(rng, n);
    const SpectralDecomposition d = eig_sym(a);
    EXPECT_LE((d.eigenvalues - oracle_eigenvalues(a)).cwiseAbs().maxCoeff(), 1e-10 * std::max(1.0, a.norm())) << n;
    expect_decomposition_invariants(a, d);
  }
}

TEST(EigSym, RepeatedEigenvaluesKeepOrthonormalBasis) {
  for (std::size_t n : {6, 11, 30}) {
    const Matrix l = laplacian(complete_graph(n)).dense();  // eigenvalue n with multiplicity n-1
    expect_decomposition_invariants(l, eig_sym(l));
  }
  const Matrix star = laplacian(star_graph(9)).dense();
  expect_decomposition_invariants(star, eig_sym(star));
}

TEST(EigSym, GraphLaplaciansMatchOracle) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 20; ++t) {
    const Graph g = random_graph(rng, 5 + 3 * t, 0.2);
    const Matrix l = BEOperator(g, Potential(random_positive(rng, static_cast<Eigen::Index>(g.num_nodes())))).laplacian().dense();
    const SpectralDecomposition d = eig_sym(l);
    EXPECT_LE((d.eigenvalues - oracle_eigenvalues(l)).cwiseAbs().maxCoeff(), 1e-10 * std::max(1.0, l.norm()));
    expect_decomposition_invariants(l, d);
  }
}

TEST(EigSym, BitDeterministic) {
  std::mt19937_64 rng(3);
  const Matrix a = random_symmetric(rng, 50);
  const SpectralDecomposition d1 = eig_sym(a), d2 = eig_sym(a);
  EXPECT_EQ(d1.eigenvalues, d2.eigenvalues);
  EXPECT_EQ(d1.eigenvectors, d2.eigenvectors);
}

TEST(EigSym, Errors) {
  Matrix a = Matrix::Identity(3, 3);
  a(0, 1) = 1e-3;
  try {
    eig_sym(a);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotSymmetric);
  }
  try {
    eig_sym(Matrix::Zero(4097, 1));
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_TRUE(e.code() == ErrorCode::NotSymmetric || e.code() == ErrorCode::TooLarge);
  }
  try {
    eig_sym(SymOperator::identity(4097));
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooLarge);
  }
}

TEST(PowerIteration, Identity) {
  EXPECT_NEAR(lambda_max_power(SymOperator::identity(10)).value, 1.0, 1e-12);
}

TEST(PowerIteration, FourRing) {
  const PowerResult r = lambda_max_power(laplacian(ring_graph(4)), 1000, 1e-8);
  EXPECT_LE(r.value, 4.0 + 1e-12);
  EXPECT_GE(r.value * (1 + 1e-8), 4.0 - 1e-12);
}

TEST(PowerIteration, RandomPsdAgainstOracle) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 5; ++t) {
    const Matrix b = random_matrix(rng, 100, 100);
    const Matrix a = b * b.transpose() / 100.0;
    const double top = oracle_eigenvalues(a).maxCoeff();
    const PowerResult r = lambda_max_power(SymOperator::from_dense(a), 5000, 1e-6);
    EXPECT_LE(r.value, top * (1 + 1e-12));
    EXPECT_LE(std::abs(r.value - top), 1e-6 * top) << "converged=" << r.converged;
  }
}

TEST(PowerIteration, FallsBackWhenBudgetRunsOut) {
  std::mt19937_64 rng(5);
  const Graph g = random_connected_graph(rng, 40, 0.1);
  const SymOperator l = laplacian(g);
  const PowerResult r = lambda_max_power(l, 2, 1e-14);
  EXPECT_FALSE(r.converged);
  EXPECT_TRUE(r.used_fallback);
  EXPECT_NEAR(r.value, oracle_eigenvalues(l.dense()).maxCoeff(), 1e-10);
}

TEST(Rayleigh, EigenvectorsAndBounds) {
  std::mt19937_64 rng(6);
  const Graph g = random_connected_graph(rng, 15, 0.2);
  const SymOperator l = laplacian(g);
  const SpectralDecomposition d = eig_sym(l);
  for (Eigen::Index k = 0; k < 15; ++k)
    EXPECT_NEAR(rayleigh(l, d.eigenvectors.col(k)), d.eigenvalues[k], 1e-10);
  EXPECT_NEAR(rayleigh(l, Vector::Constant(15, 2.0)), 0.0, 1e-14);
  for (int t = 0; t < 50; ++t) {
    const double r = rayleigh(l, random_vector(rng, 15));
    EXPECT_GE(r, d.eigenvalues[0] - 1e-12);
    EXPECT_LE(r, d.eigenvalues[14] + 1e-12);
  }
  EXPECT_THROW(rayleigh(l, Vector::Zero(15)), Error);
}

TEST(VariationProfile, StarLeafDifference) {
  for (std::size_t n : {5, 6, 10, 50}) {
    Vector f = Vector::Zero(static_cast<Eigen::Index>(n));
    f[1] = 1;
    f[2] = -1;
    const VariationProfile p = variation_profile(star_graph(n), f);
    ASSERT_FALSE(p.degenerate);
    EXPECT_DOUBLE_EQ(p.distribution[0], 0.5);
    EXPECT_DOUBLE_EQ(p.distribution[1], 0.25);
    EXPECT_DOUBLE_EQ(p.distribution[2], 0.25);
    for (Eigen::Index i = 3; i < f.size(); ++i) EXPECT_EQ(p.distribution[i], 0.0);
  }
}

TEST(VariationProfile, StarTopEigenvector) {
  for (std::size_t n : {5, 6, 10, 50}) {
    const Vector g = eig_sym(laplacian(star_graph(n))).eigenvectors.col(static_cast<Eigen::Index>(n) - 1);
    const VariationProfile p = variation_profile(star_graph(n), g);
    EXPECT_NEAR(p.distribution[0], 0.5, 1e-12);
    for (Eigen::Index i = 1; i < g.size(); ++i) EXPECT_NEAR(p.distribution[i], 0.5 / (n - 1.0), 1e-12);
  }
}

TEST(VariationProfile, SumsToTwiceRayleigh) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 30; ++t) {
    const Graph g = random_graph(rng, 4 + t, 0.3);
    const auto n = static_cast<Eigen::Index>(g.num_nodes());
    const Vector f = random_vector(rng, n);
    const VariationProfile p = variation_profile(g, f);
    const double r = rayleigh(laplacian(g), f);
    EXPECT_NEAR(p.local_variation.sum(), 2 * r, 1e-12 * std::max(1.0, r));
    if (!p.degenerate) {
      EXPECT_GE(p.distribution.minCoeff(), 0.0);
      EXPECT_NEAR(p.distribution.sum(), 1.0, 1e-12);
    }
  }
}

TEST(VariationProfile, ConstantIsDegenerate) {
  const VariationProfile p = variation_profile(ring_graph(5), Vector::Constant(5, 1.5));
  EXPECT_TRUE(p.degenerate);
  EXPECT_EQ(p.local_variation.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_THROW(variation_profile(ring_graph(5), Vector::Zero(5)), Error);
}

TEST(Factorization, UnitPotentialCollapses) {
  std::mt19937_64 rng(8);
  const Graph g = random_connected_graph(rng, 12, 0.3);
  const Vector f = random_vector(rng, 12);
  const RayleighFactorization r = rayleigh_factorization_check(g, Potential::constant(12, 1.0), f);
  EXPECT_NEAR(r.expectation, 1.0 / 12, 1e-15);
  EXPECT_NEAR(r.rhs, rayleigh(laplacian(g), f), 1e-12);
  EXPECT_NEAR(r.lhs, r.rhs, 1e-12);
}

TEST(Factorization, FourRingRandomSignals) {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 20; ++t) {
    const RayleighFactorization r = rayleigh_factorization_check(ring_graph(4), Potential(ring_mu()), random_vector(rng, 4));
    EXPECT_LE(std::abs(r.lhs - r.rhs), 1e-10 * std::abs(r.lhs));
  }
}

TEST(Factorization, StarLeafDifference) {
  const Potential mu = star_corollary_potential(6, StarCorollary::GapReduction, 1.0);
  Vector f = Vector::Zero(6);
  f[1] = 1;
  f[2] = -1;
  const RayleighFactorization r = rayleigh_factorization_check(star_graph(6), mu, f);
  EXPECT_NEAR(r.expectation, 1.0 / 8, 1e-15);
  EXPECT_NEAR(r.lhs, 1.0 / 8, 1e-14);  // ||mu||_1 = 1, lambda_1 = 1
  EXPECT_NEAR(r.rhs, 1.0 / 8, 1e-14);
}

TEST(Factorization, RandomSamples) {
  std::mt19937_64 rng(10);
  int checked = 0;
  while (checked < 200) {
    const Graph g = random_graph(rng, 3 + checked % 25, 0.35);
    const auto n = static_cast<Eigen::Index>(g.num_nodes());
    const Vector f = random_vector(rng, n);
    if (variation_profile(g, f).degenerate) continue;
    const RayleighFactorization r = rayleigh_factorization_check(g, Potential(random_positive(rng, n)), f);
    EXPECT_LE(std::abs(r.lhs - r.rhs), 1e-10 * std::abs(r.lhs));
    ++checked;
  }
}

TEST(Corollaries, GapReductionPotential) {
  const Vector mu = star_corollary_potential(6, StarCorollary::GapReduction, 1.0).values();
  EXPECT_LE((mu - (Vector(6) << 0.25, 0, 0, 0.25, 0.25, 0.25).finished()).cwiseAbs().maxCoeff(), 1e-15);
  const Vector mu2 = star_corollary_potential(10, StarCorollary::GapAndRadius).values();
  EXPECT_NEAR(mu2.sum(), 2.0, 1e-14);
  EXPECT_EQ(mu2[0], 1.0);  // 2 * mu~(0)
  EXPECT_EQ(mu2[1], 0.0);
  EXPECT_NEAR(mu2[5], 2.0 * (0.5 / 9 + 1.0 / 63), 1e-15);
}

TEST(Corollaries, GapReductionHoldsWithEquality) {
  for (std::size_t n : {5, 6, 10, 50}) {
    const CorollaryReport r = corollary_star_check(n, StarCorollary::GapReduction, 1.0);
    EXPECT_TRUE(r.passed()) << n;
    // independent oracle for the weighted star
    const Potential mu = star_corollary_potential(n, StarCorollary::GapReduction, 1.0);
    const double l1 = oracle_eigenvalues(reference_be_laplacian(star_graph(n), mu.values()))[1];
    EXPECT_NEAR(r.lambda1_mu, l1, 1e-12);
    EXPECT_LE(l1, 1.0 / (2.0 * (n - 2.0)) + 1e-12);
  }
  EXPECT_NEAR(corollary_star_check(6, StarCorollary::GapReduction).lambda1_mu, 0.125, 1e-9);
  EXPECT_NEAR(corollary_star_check(50, StarCorollary::GapReduction).lambda1_mu, 1.0 / 96, 1e-9);
}

TEST(Corollaries, GapAndRadiusReportsClaims) {
  for (std::size_t n : {5, 6, 10, 50}) {
    const CorollaryReport r = corollary_star_check(n, StarCorollary::GapAndRadius);
    EXPECT_TRUE(r.passed()) << n;
    EXPECT_LE(r.lambda1_mu, 0.5 * r.lambda1 + 1e-12);
    const double recomputed = 2.0 * n * n / (2.0 * (n - 1.0)) / 2.0;  // ||mu||_1 lambda_max E[p_g]
    EXPECT_GE(r.lambda_max_mu, recomputed - 1e-12);
    bool reported = false;
    for (const auto& c : r.checks)
      if (!c.asserted) reported = true;
    EXPECT_TRUE(reported);
  }
  const CorollaryReport r6 = corollary_star_check(6, StarCorollary::GapAndRadius);
  EXPECT_LT(r6.lambda_max_mu, 1.5 * r6.lambda_max);  // the 3/2 claim does not hold here
}

TEST(Corollaries, BadN) {
  EXPECT_THROW(corollary_star_check(4, StarCorollary::GapReduction), Error);
}

TEST(Sandwich, ContainmentOnRandomGraphs) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 5; ++t) {
    const Graph g = random_connected_graph(rng, 10 + t, 0.25);
    const auto n = static_cast<Eigen::Index>(g.num_nodes());
    const auto checks = theorem_sandwich_check(g, Potential(random_positive(rng, n)), 100, 100 + t);
    ASSERT_FALSE(checks.empty());
    for (const auto& c : checks) {
      EXPECT_TRUE(c.contained) << "k=" << c.k << " " << c.lower << " <= " << c.ratio << " <= " << c.upper;
      EXPECT_LE(c.lower, c.upper);
    }
  }
}
