#include "bes/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "bes/error.hpp"

namespace bes {

namespace {

// Householder reduction of the symmetric matrix held in v to tridiagonal form.
// On return d holds the diagonal, e the subdiagonal (e[0] = 0) and v the accumulated
// orthogonal transform.
void householder_tridiagonalize(Matrix& v, Vector& d, Vector& e) {
  const Eigen::Index n = v.rows();
  for (Eigen::Index j = 0; j < n; ++j) d[j] = v(n - 1, j);

  for (Eigen::Index i = n - 1; i > 0; --i) {
    double scale = 0.0;
    double h = 0.0;
    for (Eigen::Index k = 0; k < i; ++k) scale += std::abs(d[k]);
    if (scale == 0.0) {
      e[i] = d[i - 1];
      for (Eigen::Index j = 0; j < i; ++j) {
        d[j] = v(i - 1, j);
        v(i, j) = 0.0;
        v(j, i) = 0.0;
      }
    } else {
      for (Eigen::Index k = 0; k < i; ++k) {
        d[k] /= scale;
        h += d[k] * d[k];
      }
      double f = d[i - 1];
      double g = std::sqrt(h);
      if (f > 0) g = -g;
      e[i] = scale * g;
      h -= f * g;
      d[i - 1] = f - g;
      for (Eigen::Index j = 0; j < i; ++j) e[j] = 0.0;

      for (Eigen::Index j = 0; j < i; ++j) {
        f = d[j];
        v(j, i) = f;
        g = e[j] + v(j, j) * f;
        for (Eigen::Index k = j + 1; k <= i - 1; ++k) {
          g += v(k, j) * d[k];
          e[k] += v(k, j) * f;
        }
        e[j] = g;
      }
      f = 0.0;
      for (Eigen::Index j = 0; j < i; ++j) {
        e[j] /= h;
        f += e[j] * d[j];
      }
      const double hh = f / (h + h);
      for (Eigen::Index j = 0; j < i; ++j) e[j] -= hh * d[j];
      for (Eigen::Index j = 0; j < i; ++j) {
        f = d[j];
        g = e[j];
        for (Eigen::Index k = j; k <= i - 1; ++k) v(k, j) -= (f * e[k] + g * d[k]);
        d[j] = v(i - 1, j);
        v(i, j) = 0.0;
      }
    }
    d[i] = h;
  }

  for (Eigen::Index i = 0; i < n - 1; ++i) {
    v(n - 1, i) = v(i, i);
    v(i, i) = 1.0;
    const double h = d[i + 1];
    if (h != 0.0) {
      for (Eigen::Index k = 0; k <= i; ++k) d[k] = v(k, i + 1) / h;
      for (Eigen::Index j = 0; j <= i; ++j) {
        double g = 0.0;
        for (Eigen::Index k = 0; k <= i; ++k) g += v(k, i + 1) * v(k, j);
        for (Eigen::Index k = 0; k <= i; ++k) v(k, j) -= g * d[k];
      }
    }
    for (Eigen::Index k = 0; k <= i; ++k) v(k, i + 1) = 0.0;
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    d[j] = v(n - 1, j);
    v(n - 1, j) = 0.0;
  }
  v(n - 1, n - 1) = 1.0;
  e[0] = 0.0;
}

// Implicit-shift QL on the tridiagonal (d, e), accumulating rotations into v.
void implicit_ql(Matrix& v, Vector& d, Vector& e) {
  const Eigen::Index n = v.rows();
  for (Eigen::Index i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;

  constexpr double eps = std::numeric_limits<double>::epsilon();
  constexpr int kMaxSweeps = 60;
  double f = 0.0;
  double tst1 = 0.0;
  for (Eigen::Index l = 0; l < n; ++l) {
    tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
    Eigen::Index m = l;
    while (m < n) {
      if (std::abs(e[m]) <= eps * tst1) break;
      ++m;
    }
    if (m > l) {
      int sweeps = 0;
      do {
        if (++sweeps > kMaxSweeps) {
          throw Error(ErrorCode::NotConverged, "QL iteration did not converge at index " + std::to_string(l));
        }
        double g = d[l];
        double p = (d[l + 1] - g) / (2.0 * e[l]);
        double r = std::hypot(p, 1.0);
        if (p < 0) r = -r;
        d[l] = e[l] / (p + r);
        d[l + 1] = e[l] * (p + r);
        const double dl1 = d[l + 1];
        double h = g - d[l];
        for (Eigen::Index i = l + 2; i < n; ++i) d[i] -= h;
        f += h;

        p = d[m];
        double c = 1.0, c2 = 1.0, c3 = 1.0;
        const double el1 = e[l + 1];
        double s = 0.0, s2 = 0.0;
        for (Eigen::Index i = m - 1; i >= l; --i) {
          c3 = c2;
          c2 = c;
          s2 = s;
          g = c * e[i];
          h = c * p;
          r = std::hypot(p, e[i]);
          e[i + 1] = s * r;
          s = e[i] / r;
          c = p / r;
          p = c * d[i] - s * g;
          d[i + 1] = h + s * (c * g + s * d[i]);
          for (Eigen::Index k = 0; k < n; ++k) {
            h = v(k, i + 1);
            v(k, i + 1) = s * v(k, i) + c * h;
            v(k, i) = c * v(k, i) - s * h;
          }
        }
        p = -s * s2 * c3 * el1 * e[l] / dl1;
        e[l] = s * p;
        d[l] = c * p;
      } while (std::abs(e[l]) > eps * tst1);
    }
    d[l] += f;
    e[l] = 0.0;
  }
}

void canonicalize_signs(Matrix& u) {
  for (Eigen::Index k = 0; k < u.cols(); ++k) {
    const double cutoff = 1e-10 * u.col(k).cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < u.rows(); ++i) {
      if (std::abs(u(i, k)) > cutoff) {
        if (u(i, k) < 0) u.col(k) *= -1.0;
        break;
      }
    }
  }
}

}  // namespace

SpectralDecomposition eig_sym(const Matrix& a) {
  if (a.rows() != a.cols()) throw Error(ErrorCode::NotSymmetric, "matrix is not square");
  const auto n = a.rows();
  if (static_cast<std::size_t>(n) > kMaxDenseSize) {
    throw Error(ErrorCode::TooLarge, "eig_sym supports n <= 4096, got " + std::to_string(n));
  }
  SpectralDecomposition out;
  if (n == 0) return out;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw Error(ErrorCode::NotSymmetric, "input matrix is not symmetric");
  }

  // Work on the exactly symmetrized copy so the result depends only on one triangle's bits.
  Matrix v = 0.5 * (a + a.transpose());
  Vector d(n), e(n);
  householder_tridiagonalize(v, d, e);
  implicit_ql(v, d, e);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) { return d[x] < d[y]; });
  out.eigenvalues.resize(n);
  out.eigenvectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index src = order[static_cast<std::size_t>(k)];
    out.eigenvalues[k] = d[src];
    out.eigenvectors.col(k) = v.col(src);
  }
  canonicalize_signs(out.eigenvectors);
  return out;
}

SpectralDecomposition eig_sym(const SymOperator& op) { return eig_sym(op.dense()); }

Vector eigenvalues_sym(const SymOperator& op) { return eig_sym(op).eigenvalues; }

PowerResult lambda_max_power(const SymOperator& op, std::size_t max_iters, double tol) {
  const auto n = static_cast<Eigen::Index>(op.size());
  PowerResult res;
  if (n == 0) {
    res.converged = true;
    return res;
  }
  // Fixed, non-constant start vector (constants are the kernel of every Laplacian).
  Vector x(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto h = (static_cast<std::uint64_t>(i) + 1) * 0x9E3779B97F4A7C15ULL;
    x[i] = 0.5 + static_cast<double>(h >> 11) * 0x1.0p-53;
  }
  x.normalize();
  double rho = 0.0;
  for (std::size_t it = 1; it <= max_iters; ++it) {
    Vector y = op.apply(x);
    const double next = x.dot(y);
    const double norm = y.norm();
    res.iterations = it;
    if (norm == 0.0) {
      res.value = 0.0;
      res.converged = true;
      return res;
    }
    // Residual ||A x - rho x|| bounds the distance from rho to the spectrum.
    const double residual = (y - next * x).norm();
    x = y / norm;
    rho = next;
    if (residual <= tol * std::abs(next)) {
      res.value = next;
      res.converged = true;
      return res;
    }
  }
  res.value = rho;
  if (op.size() < 512) {
    res.value = eigenvalues_sym(op)[n - 1];
    res.used_fallback = true;
  }
  return res;
}

double rayleigh(const SymOperator& op, const NodeSignal& f) {
  if (static_cast<std::size_t>(f.size()) != op.size()) throw Error(ErrorCode::LengthMismatch, "signal length");
  const double ff = f.squaredNorm();
  if (ff == 0.0) throw Error(ErrorCode::ZeroSignal, "Rayleigh quotient of the zero vector");
  return f.dot(op.apply(f)) / ff;
}

VariationProfile variation_profile(const Graph& g, const NodeSignal& f) {
  if (static_cast<std::size_t>(f.size()) != g.num_nodes()) throw Error(ErrorCode::LengthMismatch, "signal length");
  const double ff = f.squaredNorm();
  if (ff == 0.0) throw Error(ErrorCode::ZeroSignal, "variation profile of the zero vector");
  VariationProfile out;
  out.local_variation = Vector::Zero(f.size());
  for (const Edge& e : g.edges()) {
    const auto u = static_cast<Eigen::Index>(e.u), v = static_cast<Eigen::Index>(e.v);
    const double d2 = (f[u] - f[v]) * (f[u] - f[v]);
    out.local_variation[u] += d2;
    out.local_variation[v] += d2;
  }
  out.local_variation /= ff;
  const double total = out.local_variation.sum();
  if (total == 0.0) {
    out.degenerate = true;
    out.distribution = Vector::Zero(f.size());
  } else {
    out.distribution = out.local_variation / total;
  }
  return out;
}

RayleighFactorization rayleigh_factorization_check(const Graph& g, const Potential& mu, const NodeSignal& f) {
  const VariationProfile prof = variation_profile(g, f);
  if (prof.degenerate) throw Error(ErrorCode::ZeroSignal, "signal has no local variation");
  const BEOperator be(g, mu);
  RayleighFactorization out;
  out.lhs = rayleigh(be.laplacian(), f);
  out.expectation = mu.normalized().dot(prof.distribution);
  out.rhs = mu.l1_norm() * out.expectation * rayleigh(laplacian(g), f);
  return out;
}

bool CorollaryReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const InequalityCheck& c) { return !c.asserted || c.holds; });
}

Potential star_corollary_potential(std::size_t n, StarCorollary which, double mu_norm) {
  if (n < 5) throw Error(ErrorCode::BadN, "star corollaries need n >= 5, got " + std::to_string(n));
  const auto nn = static_cast<Eigen::Index>(n);
  const double nd = static_cast<double>(n);
  Vector mu_tilde(nn);
  if (which == StarCorollary::GapReduction) {
    mu_tilde.setConstant(1.0 / (nd - 2.0));
    mu_tilde[1] = mu_tilde[2] = 0.0;
  } else {
    mu_tilde.setConstant(1.0 / (2.0 * (nd - 1.0)) + 1.0 / ((nd - 1.0) * (nd - 3.0)));
    mu_tilde[0] = 0.5;
    mu_tilde[1] = mu_tilde[2] = 0.0;
    mu_norm = 2.0;
  }
  return Potential(mu_norm * mu_tilde);
}

namespace {
InequalityCheck make_check(std::string name, double lhs, double rhs, bool asserted) {
  InequalityCheck c;
  c.name = std::move(name);
  c.lhs = lhs;
  c.rhs = rhs;
  c.slack = rhs - lhs;
  c.holds = c.slack >= -1e-12 * std::max(1.0, std::abs(rhs));
  c.asserted = asserted;
  return c;
}
}  // namespace

CorollaryReport corollary_star_check(std::size_t n, StarCorollary which, double mu_norm) {
  const Potential mu = star_corollary_potential(n, which, mu_norm);
  const Graph g = star_graph(n);
  const Vector base = eigenvalues_sym(laplacian(g));
  const Vector weighted = eigenvalues_sym(BEOperator(g, mu).laplacian());
  const auto last = static_cast<Eigen::Index>(n) - 1;

  CorollaryReport r;
  r.n = n;
  r.which = which;
  r.mu = mu.values();
  r.mu_norm = mu.l1_norm();
  r.lambda1 = base[1];
  r.lambda_max = base[last];
  r.lambda1_mu = weighted[1];
  r.lambda_max_mu = weighted[last];
  const double nd = static_cast<double>(n);

  if (which == StarCorollary::GapReduction) {
    r.checks.push_back(make_check("lambda1_mu <= ||mu||_1 * lambda1 / (2(n-2))", r.lambda1_mu,
                                  r.mu_norm * r.lambda1 / (2.0 * (nd - 2.0)), true));
  } else {
    r.checks.push_back(make_check("lambda1_mu <= lambda1 / 2", r.lambda1_mu, 0.5 * r.lambda1, true));
    // Claimed lower bound on the spectral radius, reported only.
    r.checks.push_back(make_check("3/2 * lambda_max <= lambda_max_mu", 1.5 * r.lambda_max, r.lambda_max_mu, false));
    // Recomputed bound from the unit top eigenvector g of L: center sqrt((n-1)/n), leaves -1/sqrt(n(n-1)).
    Vector top(static_cast<Eigen::Index>(n));
    top.setConstant(-1.0 / std::sqrt(nd * (nd - 1.0)));
    top[0] = std::sqrt((nd - 1.0) / nd);
    const double expectation = mu.normalized().dot(variation_profile(g, top).distribution);
    r.checks.push_back(make_check("||mu||_1 * lambda_max * E[p_g] <= lambda_max_mu",
                                  r.mu_norm * r.lambda_max * expectation, r.lambda_max_mu, true));
  }
  return r;
}

std::vector<SandwichCheck> theorem_sandwich_check(const Graph& g, const Potential& mu, std::size_t samples,
                                                  std::uint64_t seed) {
  const SpectralDecomposition base = eig_sym(laplacian(g));
  const BEOperator be(g, mu);
  const Matrix lmu = be.laplacian().dense();
  const Vector weighted = eig_sym(lmu).eigenvalues;
  const Vector mu_tilde = mu.normalized();
  const double norm = mu.l1_norm();
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;

  auto expectation = [&](const Vector& f) -> double {
    const VariationProfile p = variation_profile(g, f);
    return p.degenerate ? 0.0 : mu_tilde.dot(p.distribution);
  };
  auto ritz = [&](const Matrix& q, bool top) -> Vector {
    const Matrix proj = q.transpose() * lmu * q;
    const SpectralDecomposition sd = eig_sym(Matrix(0.5 * (proj + proj.transpose())));
    return q * sd.eigenvectors.col(top ? sd.eigenvectors.cols() - 1 : 0);
  };

  std::vector<SandwichCheck> out;
  for (Eigen::Index k = 1; k < n; ++k) {
    if (base.eigenvalues[k] <= 1e-12 * std::max(1.0, base.eigenvalues[n - 1])) continue;
    const Matrix low = base.eigenvectors.middleCols(1, k);       // f_1..f_k
    const Matrix high = base.eigenvectors.rightCols(n - k);      // g_k..g_{n-1}
    double upper = expectation(ritz(low, true));
    double lower = expectation(ritz(high, false));
    for (std::size_t s = 0; s < samples; ++s) {
      Vector a(low.cols()), b(high.cols());
      for (Eigen::Index i = 0; i < a.size(); ++i) a[i] = normal(rng);
      for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = normal(rng);
      upper = std::max(upper, expectation(low * a.normalized()));
      lower = std::min(lower, expectation(high * b.normalized()));
    }
    SandwichCheck c;
    c.k = static_cast<std::size_t>(k);
    c.ratio = weighted[k] / base.eigenvalues[k];
    c.lower = norm * lower;
    c.upper = norm * upper;
    const double tol = 1e-10 * std::max(1.0, c.ratio);
    c.contained = c.lower <= c.ratio + tol && c.ratio <= c.upper + tol;
    out.push_back(c);
  }
  return out;
}

}  // namespace bes
