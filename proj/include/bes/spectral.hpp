#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "bes/be_laplacian.hpp"
#include "bes/graph.hpp"
#include "bes/sym_operator.hpp"
#include "bes/types.hpp"

namespace bes {

/// Eigenvalues ascending; column k of `eigenvectors` pairs with eigenvalues[k], unit norm,
/// first component above 1e-10 * max|u_k| taken positive.
struct SpectralDecomposition {
  Vector eigenvalues;
  Matrix eigenvectors;
};

/// Householder tridiagonalization followed by implicit-shift QL. Deterministic.
/// Throws NotSymmetric, TooLarge (n > 4096) or NotConverged.
SpectralDecomposition eig_sym(const SymOperator& op);
SpectralDecomposition eig_sym(const Matrix& a);

/// Eigenvalues only, ascending.
Vector eigenvalues_sym(const SymOperator& op);

struct PowerResult {
  double value = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  /// True when the estimate came from eig_sym because power iteration did not converge.
  bool used_fallback = false;
};

/// Largest eigenvalue of a PSD operator by power iteration from a fixed start vector.
/// Stops once the residual ||A x - rho x|| falls below tol * rho. When the iteration
/// budget runs out, falls back to eig_sym for n < 512 and otherwise returns the last
/// (lower) estimate with converged = false.
PowerResult lambda_max_power(const SymOperator& op, std::size_t max_iters = 1000, double tol = 1e-8);

/// f^T op f / f^T f. Throws ZeroSignal for f = 0.
double rayleigh(const SymOperator& op, const NodeSignal& f);

/// Per-node squared local variation ||grad f(u)||^2 / f^T f and its normalization p_f.
struct VariationProfile {
  Vector local_variation;  // N(f)
  Vector distribution;     // p_f; all zeros when degenerate
  bool degenerate = false; // N(f) = 0 (f constant on every component)
};

/// Throws ZeroSignal for f = 0; constant f yields a degenerate profile.
VariationProfile variation_profile(const Graph& g, const NodeSignal& f);

struct RayleighFactorization {
  double lhs = 0.0;  // f^T L_mu f / f^T f
  double rhs = 0.0;  // ||mu||_1 * E_{mu~}[p_f] * R(f)
  double expectation = 0.0;
};

/// Both sides of R_mu(f) = ||mu||_1 E_{mu/||mu||_1}[p_f] R(f). Throws ZeroSignal when f is
/// zero or has no variation.
RayleighFactorization rayleigh_factorization_check(const Graph& g, const Potential& mu, const NodeSignal& f);

enum class StarCorollary { GapReduction, GapAndRadius };

struct InequalityCheck {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;     // rhs - lhs for lhs <= rhs
  bool holds = false;     // slack >= -1e-12 * max(1, |rhs|)
  bool asserted = false;  // false: reported only
};

struct CorollaryReport {
  std::size_t n = 0;
  StarCorollary which = StarCorollary::GapReduction;
  double mu_norm = 0.0;
  Vector mu;
  double lambda1 = 0.0;
  double lambda_max = 0.0;
  double lambda1_mu = 0.0;
  double lambda_max_mu = 0.0;
  std::vector<InequalityCheck> checks;

  /// All asserted inequalities hold.
  bool passed() const;
};

/// Star graph S_n with the explicit potentials from the two star-graph corollaries.
/// GapReduction: mu~(1)=mu~(2)=0, mu~(k)=1/(n-2) otherwise, scaled by mu_norm.
/// GapAndRadius: mu~(0)=1/2, mu~(1)=mu~(2)=0, else 1/(2(n-1)) + 1/((n-1)(n-3)), ||mu||_1 = 2.
/// Throws BadN for n < 5.
Potential star_corollary_potential(std::size_t n, StarCorollary which, double mu_norm = 1.0);
CorollaryReport corollary_star_check(std::size_t n, StarCorollary which, double mu_norm = 1.0);

/// Sampled containment of lambda_k^mu / lambda_k between ||mu||_1 * min E[p_g] over
/// span(g_k..g_{n-1}) and ||mu||_1 * max E[p_f] over span(f_1..f_k). The extrema are taken
/// over `samples` random unit vectors of each span plus the extremal Ritz vector of L_mu
/// restricted to that span, so the bracket is an inner approximation of the exact one.
struct SandwichCheck {
  std::size_t k = 0;
  double ratio = 0.0;  // lambda_k^mu / lambda_k
  double lower = 0.0;
  double upper = 0.0;
  bool contained = false;
};

std::vector<SandwichCheck> theorem_sandwich_check(const Graph& g, const Potential& mu, std::size_t samples,
                                                  std::uint64_t seed);

}  // namespace bes
