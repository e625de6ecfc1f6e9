#pragma once

#include <cstddef>

#include "bes/graph.hpp"
#include "bes/sym_operator.hpp"
#include "bes/types.hpp"

namespace bes {

/// Nonnegative node potential mu with positive total mass.
class Potential {
 public:
  /// Throws NegativePotential for negative or non-finite entries, ZeroPotential when ||mu||_1 = 0.
  explicit Potential(Vector mu);

  static Potential constant(std::size_t n, double value) { return Potential(Vector::Constant(static_cast<Eigen::Index>(n), value)); }

  const Vector& values() const noexcept { return mu_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(mu_.size()); }
  double operator[](std::size_t i) const { return mu_[static_cast<Eigen::Index>(i)]; }
  double l1_norm() const { return mu_.sum(); }
  /// mu / ||mu||_1
  Vector normalized() const { return mu_ / l1_norm(); }

 private:
  Vector mu_;
};

/// Elementwise max(mu, eps). Nothing in the library floors implicitly.
Potential floor_potential(const Potential& mu, double eps);

/// Edge weight 1/2 (mu_u + mu_v) per canonical edge.
EdgeSignal be_edge_weights(const Graph& g, const Vector& mu);

/// Assembles D_w - A_w for per-edge weights w on g.
SymOperator weighted_laplacian(const Graph& g, const EdgeSignal& w);

/// The Bakry-Emery Laplacian L_mu = D_mu - A_mu with A_mu = M_mu (Hadamard) A,
/// M_mu(i,j) = (mu_i + mu_j)/2. Immutable; weights are stored per canonical edge.
class BEOperator {
 public:
  /// Throws LengthMismatch when mu does not match the graph.
  BEOperator(Graph g, Potential mu);

  const Graph& graph() const noexcept { return graph_; }
  const Potential& potential() const noexcept { return mu_; }
  const EdgeSignal& edge_weights() const noexcept { return weights_; }
  /// Diagonal of D_mu (weighted degrees).
  const Vector& degrees() const noexcept { return degrees_; }

  const SymOperator& laplacian() const noexcept { return laplacian_; }
  SymOperator adjacency() const;
  /// L_mu f without assembling a matrix.
  Vector apply(const Vector& f) const;

 private:
  Graph graph_;
  Potential mu_;
  EdgeSignal weights_;
  Vector degrees_;
  SymOperator laplacian_;
};

inline BEOperator build_be(const Graph& g, const Potential& mu) { return BEOperator(g, mu); }

/// Node-wise split of L_mu f into an isotropic diffusion term mu_i (L f)_i and the edge
/// coupling 1/2 sum_{j~i} grad_ij(mu) grad_ij(f). With L_mu = D_mu - A_mu,
/// L_mu f = diffusion - advection.
struct AdvectionSplit {
  NodeSignal diffusion;
  NodeSignal advection;

  NodeSignal combined() const { return diffusion - advection; }
};

AdvectionSplit advection_decomposition(const BEOperator& be, const NodeSignal& f);

enum class Normalization { Symmetric, RandomWalk };

/// D_mu^{-1/2} L_mu D_mu^{-1/2}. Throws IsolatedNodeUnderMu when some weighted degree is 0.
SymOperator normalized_be(const BEOperator& be);

/// D_mu^{-1} L_mu, which is not symmetric (it is similar to the symmetric variant).
SparseMatrix random_walk_be(const BEOperator& be);

enum class HeatScheme { Spectral, Euler, RK4 };

struct HeatOptions {
  HeatScheme scheme = HeatScheme::Spectral;
  double dt = 1e-3;
};

/// Solves df/dt = -L_mu f up to time t (decaying convention).
/// Explicit schemes throw UnstableStep when dt * lambda_max(L_mu) >= 2 (Euler) or
/// >= 2.78 (RK4). Throws LengthMismatch or ConfigInvalid for bad t/dt.
NodeSignal heat_flow(const BEOperator& be, const NodeSignal& f0, double t, const HeatOptions& opts = {});

}  // namespace bes
