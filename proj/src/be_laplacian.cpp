#include "bes/be_laplacian.hpp"

#include <cmath>
#include <string>

#include "bes/error.hpp"
#include "bes/spectral.hpp"

namespace bes {

Potential::Potential(Vector mu) : mu_(std::move(mu)) {
  for (Eigen::Index i = 0; i < mu_.size(); ++i) {
    if (!std::isfinite(mu_[i]) || mu_[i] < 0.0) {
      throw Error(ErrorCode::NegativePotential, "mu[" + std::to_string(i) + "] = " + std::to_string(mu_[i]));
    }
  }
  if (!(mu_.sum() > 0.0)) throw Error(ErrorCode::ZeroPotential, "potential has zero mass");
}

Potential floor_potential(const Potential& mu, double eps) {
  return Potential(mu.values().cwiseMax(eps));
}

EdgeSignal be_edge_weights(const Graph& g, const Vector& mu) {
  if (static_cast<std::size_t>(mu.size()) != g.num_nodes()) {
    throw Error(ErrorCode::LengthMismatch, "potential length " + std::to_string(mu.size()) +
                                                " vs n=" + std::to_string(g.num_nodes()));
  }
  EdgeSignal w(static_cast<Eigen::Index>(g.num_edges()));
  Eigen::Index k = 0;
  for (const Edge& e : g.edges()) {
    w[k++] = 0.5 * (mu[static_cast<Eigen::Index>(e.u)] + mu[static_cast<Eigen::Index>(e.v)]);
  }
  return w;
}

SymOperator weighted_laplacian(const Graph& g, const EdgeSignal& w) {
  if (static_cast<std::size_t>(w.size()) != g.num_edges()) {
    throw Error(ErrorCode::LengthMismatch, "edge weights length");
  }
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  std::vector<Triplet> t;
  t.reserve(g.adjacency_nnz() + g.num_nodes());
  for (std::size_t i = 0; i < g.num_nodes(); ++i) {
    const auto nb = g.neighbors(i);
    const auto ids = g.incident_edges(i);
    double d = 0.0;
    for (std::size_t k = 0; k < nb.size(); ++k) d += w[static_cast<Eigen::Index>(ids[k])];
    t.emplace_back(i, i, d);
    for (std::size_t k = 0; k < nb.size(); ++k) t.emplace_back(i, nb[k], -w[static_cast<Eigen::Index>(ids[k])]);
  }
  SparseMatrix l(n, n);
  l.setFromTriplets(t.begin(), t.end());
  return SymOperator::from_sparse(std::move(l));
}

BEOperator::BEOperator(Graph g, Potential mu)
    : graph_(std::move(g)), mu_(std::move(mu)), weights_(be_edge_weights(graph_, mu_.values())) {
  degrees_ = Vector::Zero(static_cast<Eigen::Index>(graph_.num_nodes()));
  for (std::size_t i = 0; i < graph_.num_nodes(); ++i) {
    double d = 0.0;
    for (std::size_t id : graph_.incident_edges(i)) d += weights_[static_cast<Eigen::Index>(id)];
    degrees_[static_cast<Eigen::Index>(i)] = d;
  }
  laplacian_ = weighted_laplacian(graph_, weights_);
}

SymOperator BEOperator::adjacency() const {
  const auto n = static_cast<Eigen::Index>(graph_.num_nodes());
  std::vector<Triplet> t;
  t.reserve(graph_.adjacency_nnz());
  Eigen::Index k = 0;
  for (const Edge& e : graph_.edges()) {
    t.emplace_back(e.u, e.v, weights_[k]);
    t.emplace_back(e.v, e.u, weights_[k]);
    ++k;
  }
  SparseMatrix a(n, n);
  a.setFromTriplets(t.begin(), t.end());
  return SymOperator::from_sparse(std::move(a));
}

Vector BEOperator::apply(const Vector& f) const {
  if (static_cast<std::size_t>(f.size()) != graph_.num_nodes()) {
    throw Error(ErrorCode::LengthMismatch, "signal length");
  }
  Vector out = degrees_.cwiseProduct(f);
  Eigen::Index k = 0;
  for (const Edge& e : graph_.edges()) {
    const auto u = static_cast<Eigen::Index>(e.u), v = static_cast<Eigen::Index>(e.v);
    out[u] -= weights_[k] * f[v];
    out[v] -= weights_[k] * f[u];
    ++k;
  }
  return out;
}

AdvectionSplit advection_decomposition(const BEOperator& be, const NodeSignal& f) {
  const Graph& g = be.graph();
  if (static_cast<std::size_t>(f.size()) != g.num_nodes()) {
    throw Error(ErrorCode::LengthMismatch, "signal length");
  }
  const Vector& mu = be.potential().values();
  AdvectionSplit out;
  out.diffusion = mu.cwiseProduct(laplacian(g).apply(f));
  out.advection = Vector::Zero(f.size());
  for (const Edge& e : g.edges()) {
    const auto u = static_cast<Eigen::Index>(e.u), v = static_cast<Eigen::Index>(e.v);
    // grad_uv(mu) grad_uv(f) is orientation independent, so both endpoints get the same term.
    const double c = 0.5 * (mu[v] - mu[u]) * (f[v] - f[u]);
    out.advection[u] += c;
    out.advection[v] += c;
  }
  return out;
}

namespace {
Vector inverse_sqrt_degrees(const BEOperator& be) {
  const Vector& d = be.degrees();
  Vector s(d.size());
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (!(d[i] > 0.0)) {
      throw Error(ErrorCode::IsolatedNodeUnderMu, "weighted degree of node " + std::to_string(i) + " is zero");
    }
    s[i] = 1.0 / std::sqrt(d[i]);
  }
  return s;
}
}  // namespace

SymOperator normalized_be(const BEOperator& be) {
  const Vector s = inverse_sqrt_degrees(be);
  SparseMatrix m = s.asDiagonal() * be.laplacian().sparse() * s.asDiagonal();
  return SymOperator::from_sparse(std::move(m));
}

SparseMatrix random_walk_be(const BEOperator& be) {
  const Vector s = inverse_sqrt_degrees(be);
  const Vector inv = s.cwiseProduct(s);
  SparseMatrix m = inv.asDiagonal() * be.laplacian().sparse();
  m.makeCompressed();
  return m;
}

NodeSignal heat_flow(const BEOperator& be, const NodeSignal& f0, double t, const HeatOptions& opts) {
  if (static_cast<std::size_t>(f0.size()) != be.graph().num_nodes()) {
    throw Error(ErrorCode::LengthMismatch, "initial condition length");
  }
  if (!(t >= 0.0) || !std::isfinite(t)) throw Error(ErrorCode::ConfigInvalid, "time must be finite and >= 0");
  if (t == 0.0) return f0;

  if (opts.scheme == HeatScheme::Spectral) {
    const SpectralDecomposition sd = eig_sym(be.laplacian());
    const Vector coeffs = sd.eigenvectors.transpose() * f0;
    const Vector decay = (-t * sd.eigenvalues.array()).exp().matrix();
    return sd.eigenvectors * decay.cwiseProduct(coeffs);
  }

  if (!(opts.dt > 0.0)) throw Error(ErrorCode::ConfigInvalid, "dt must be positive");
  const double lmax = lambda_max_power(be.laplacian(), 10000, 1e-10).value;
  const double limit = opts.scheme == HeatScheme::Euler ? 2.0 : 2.78;
  if (opts.dt * lmax >= limit) {
    throw Error(ErrorCode::UnstableStep,
                "dt=" + std::to_string(opts.dt) + " with lambda_max=" + std::to_string(lmax));
  }
  const auto steps = static_cast<long>(std::ceil(t / opts.dt - 1e-9));
  const double h = t / static_cast<double>(steps);
  Vector f = f0;
  for (long s = 0; s < steps; ++s) {
    if (opts.scheme == HeatScheme::Euler) {
      f -= h * be.apply(f);
    } else {
      const Vector k1 = -be.apply(f);
      const Vector k2 = -be.apply(f + 0.5 * h * k1);
      const Vector k3 = -be.apply(f + 0.5 * h * k2);
      const Vector k4 = -be.apply(f + h * k3);
      f += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
  }
  return f;
}

}  // namespace bes
