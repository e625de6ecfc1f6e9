#include "bes/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "bes/be_laplacian.hpp"
#include "bes/error.hpp"
#include "bes/spectral.hpp"

namespace bes {

namespace {

Graph random_connected(std::size_t n, double p, std::mt19937_64& rng) {
  for (;;) {
    Graph g = erdos_renyi(n, p, rng);
    if (g.is_connected()) return g;
  }
}

Vector random_potential(std::size_t n, std::mt19937_64& rng, double lo = 0.1, double hi = 3.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector mu(static_cast<Eigen::Index>(n));
  for (auto& m : mu) m = u(rng);
  return mu;
}

Vector random_signal(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Vector f(static_cast<Eigen::Index>(n));
  for (auto& v : f) v = z(rng);
  return f;
}

SuiteCheck worst_case(std::string name, double worst, double tol, std::string detail = {}) {
  SuiteCheck c;
  c.name = std::move(name);
  c.value = worst;
  c.tolerance = tol;
  c.passed = std::isfinite(worst) && worst <= tol;
  c.detail = std::move(detail);
  return c;
}

double rel_diff(double a, double b) {
  const double s = std::max(std::abs(a), std::abs(b));
  return s == 0.0 ? 0.0 : std::abs(a - b) / s;
}

SuiteReport algebra_suite(const VerifyOptions& opts) {
  std::mt19937_64 rng(opts.seed);
  std::uniform_int_distribution<std::size_t> size(2, 30);
  std::uniform_real_distribution<double> density(0.1, 0.9);

  std::size_t reduction_fail = 0;
  double dirichlet = 0.0, psd = 0.0, rows = 0.0, split = 0.0;
  for (std::size_t t = 0; t < opts.graphs; ++t) {
    const std::size_t n = size(rng);
    const Graph g = erdos_renyi(n, density(rng), rng);
    const Vector mu = random_potential(n, rng);
    const Vector f = random_signal(n, rng);
    const Vector h = random_signal(n, rng);
    const BEOperator be(g, Potential(mu));

    const Matrix unit = BEOperator(g, Potential::constant(n, 1.0)).laplacian().dense();
    if (!(unit.array() == laplacian(g).dense().array()).all()) ++reduction_fail;

    double direct = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j : g.neighbors(i)) {
        const auto a = static_cast<Eigen::Index>(i), b = static_cast<Eigen::Index>(j);
        direct += mu[a] * (f[a] - f[b]) * (h[a] - h[b]);
      }
    direct *= 0.5;
    dirichlet = std::max(dirichlet, rel_diff(f.dot(be.apply(h)), direct));

    const Vector ev = eigenvalues_sym(be.laplacian());
    psd = std::max(psd, -ev.minCoeff() / std::max(1.0, ev.maxCoeff()));

    const Matrix dense = be.laplacian().dense();
    rows = std::max(rows, dense.rowwise().sum().cwiseAbs().maxCoeff() / std::max(1.0, dense.cwiseAbs().maxCoeff()));

    const Vector lf = be.apply(f);
    const Vector rebuilt = advection_decomposition(be, f).combined();
    double scale = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j : g.neighbors(i)) {
        const auto a = static_cast<Eigen::Index>(i), b = static_cast<Eigen::Index>(j);
        s += (mu[a] + mu[b]) * (std::abs(f[a]) + std::abs(f[b]));
      }
      scale = std::max(scale, s);
    }
    split = std::max(split, (lf - rebuilt).cwiseAbs().maxCoeff() / scale);
  }

  SuiteReport r;
  r.suite = "algebra";
  SuiteCheck red;
  red.name = "constant potential 1 reproduces L exactly";
  red.value = static_cast<double>(reduction_fail);
  red.passed = reduction_fail == 0;
  red.detail = std::to_string(opts.graphs) + " graphs";
  r.checks.push_back(red);
  r.checks.push_back(worst_case("Dirichlet identity (relative)", dirichlet, 1e-10));
  r.checks.push_back(worst_case("L_mu positive semidefinite (-min eig / max eig)", psd, 1e-10));
  r.checks.push_back(worst_case("row sums zero (relative)", rows, 1e-12));
  r.checks.push_back(worst_case("diffusion minus advection reconstructs L_mu f", split, 1e-12));
  return r;
}

SuiteReport lemma_suite(const VerifyOptions& opts) {
  std::mt19937_64 rng(opts.seed);
  std::uniform_int_distribution<std::size_t> size(5, 30);
  std::uniform_real_distribution<double> density(0.15, 0.8);
  double worst = 0.0;
  for (std::size_t s = 0; s < opts.samples; ++s) {
    const std::size_t n = size(rng);
    const Graph g = random_connected(n, density(rng), rng);
    const Potential mu(random_potential(n, rng));
    const Vector f = random_signal(n, rng);
    const auto fac = rayleigh_factorization_check(g, mu, f);
    worst = std::max(worst, rel_diff(fac.lhs, fac.rhs));
  }
  SuiteReport r;
  r.suite = "lemma";
  r.checks.push_back(worst_case("R_mu(f) = ||mu||_1 E[p_f] R(f) (relative)", worst, 1e-10,
                                std::to_string(opts.samples) + " samples"));
  return r;
}

SuiteReport corollaries_suite(const VerifyOptions& opts) {
  SuiteReport r;
  r.suite = "corollaries";
  for (std::size_t n : opts.star_sizes) {
    for (StarCorollary which : {StarCorollary::GapReduction, StarCorollary::GapAndRadius}) {
      const CorollaryReport rep = corollary_star_check(n, which);
      const std::string tag = std::string(which == StarCorollary::GapReduction ? "gap" : "gap+radius") +
                              " star n=" + std::to_string(n) + ": ";
      for (const auto& c : rep.checks) {
        SuiteCheck s;
        s.name = tag + c.name;
        s.value = c.slack;
        s.tolerance = -1e-12 * std::max(1.0, std::abs(c.rhs));
        s.passed = c.holds;
        s.asserted = c.asserted;
        s.detail = "lhs=" + std::to_string(c.lhs) + " rhs=" + std::to_string(c.rhs);
        r.checks.push_back(s);
      }
      if (which == StarCorollary::GapReduction) {
        const double target = 1.0 / (2.0 * (static_cast<double>(n) - 2.0));
        SuiteCheck eq = worst_case(tag + "lambda1_mu equals 1/(2(n-2))", std::abs(rep.lambda1_mu - target), 1e-9,
                                   "lambda1_mu=" + std::to_string(rep.lambda1_mu));
        eq.asserted = n == 6;
        r.checks.push_back(eq);
      }
    }
  }
  std::mt19937_64 rng(opts.seed);
  std::size_t outside = 0, total = 0;
  for (std::size_t t = 0; t < 5; ++t) {
    const std::size_t n = 8 + 4 * t;
    const Graph g = random_connected(n, 0.4, rng);
    for (const auto& c : theorem_sandwich_check(g, Potential(random_potential(n, rng)), 500, opts.seed + t)) {
      ++total;
      if (!c.contained) ++outside;
    }
  }
  SuiteCheck sw;
  sw.name = "eigenvalue ratio inside sampled variation bounds";
  sw.value = static_cast<double>(outside);
  sw.passed = outside == 0;
  sw.detail = std::to_string(total) + " eigenvalues on 5 random graphs";
  r.checks.push_back(sw);
  return r;
}

SuiteReport gradcheck_suite(const VerifyOptions& opts) {
  SuiteReport r;
  r.suite = "gradcheck";
  double worst = 0.0;
  std::string where;
  for (std::size_t p = 0; p < opts.points; ++p) {
    const GradcheckPoint pt = model_gradcheck_point(derive_seed(opts.seed, p));
    if (pt.max_rel_error >= worst) {
      worst = pt.max_rel_error;
      where = "point " + std::to_string(p) + " (" + std::to_string(pt.nodes) + " nodes) at " + pt.worst;
    }
  }
  r.checks.push_back(worst_case("mu-ChebNet gradients vs central differences", worst, 1e-4, where));
  const GradcheckPoint un = model_gradcheck_point(opts.seed, OperatorKind::Unnormalized);
  r.checks.push_back(worst_case("unnormalized operator variant", un.max_rel_error, 1e-4, un.worst));
  const GradcheckPoint st = model_gradcheck_point(opts.seed, OperatorKind::SymNormalized, true);
  r.checks.push_back(worst_case("stable residual variant", st.max_rel_error, 1e-4, st.worst));
  return r;
}

SuiteReport stability_suite(const VerifyOptions& opts) {
  SuiteReport r;
  r.suite = "stability";
  double re = 0.0;
  for (std::size_t dim : {2, 3, 8, 16, 32}) re = std::max(re, antisymmetric_real_part(dim, opts.seed + dim));
  r.checks.push_back(worst_case("eigenvalues of W - W^T purely imaginary (max |Re|)", re, 1e-10));

  const StabilityContrast sc = stability_contrast(opts.seed);
  SuiteCheck fin;
  fin.name = "stable run: hidden norms finite";
  fin.passed = sc.stable.finite;
  fin.value = fin.passed ? 1.0 : 0.0;
  r.checks.push_back(fin);
  r.checks.push_back(worst_case("stable run: max norm ratio over 64 layers", sc.stable.max_ratio, 10.0));
  r.checks.push_back(worst_case("stable run: per-layer growth within 1 + eps sum ||M_k||",
                                sc.stable.max_step_growth - sc.stable.step_bound, 0.0,
                                "growth=" + std::to_string(sc.stable.max_step_growth) +
                                    " bound=" + std::to_string(sc.stable.step_bound)));
  SuiteCheck grow;
  grow.name = "unstabilized run: final norm ratio >= 10";
  grow.value = sc.unstabilized.final_ratio;
  grow.tolerance = 10.0;
  grow.passed = !sc.unstabilized.finite || sc.unstabilized.final_ratio >= 10.0;
  r.checks.push_back(grow);
  SuiteCheck small;
  small.name = "raw weights at eps 0.1: final norm ratio";
  small.value = sc.raw_small_step.final_ratio;
  small.passed = true;
  small.asserted = false;
  r.checks.push_back(small);
  return r;
}

NormTrace trace_norms(const MuChebNet& model, const Batch& batch) {
  const auto& c = model.config();
  NormTrace t;
  const Matrix enc = (batch.x * model.params().value("enc.W")).rowwise() + model.params().value("enc.b").row(0);
  ForwardOptions fo;
  fo.track_norms = true;
  ad::Tape tape;
  const auto leaves = model.params().bind(tape);
  const ForwardResult fr = model.forward(tape, leaves, batch, fo);
  t.norms.push_back(enc.norm());
  t.norms.insert(t.norms.end(), fr.hidden_norms.begin(), fr.hidden_norms.end());
  for (std::size_t l = 0; l < c.layers; ++l) {
    double bound = 0.0;
    for (std::size_t k = 0; k <= c.K; ++k) {
      const Matrix& w = model.params().value("stable" + std::to_string(l) + ".W" + std::to_string(k));
      const Matrix m = c.antisymmetric ? stable_update_matrix(w, c.gamma) : w;
      bound += Eigen::JacobiSVD<Matrix>(m).singularValues()(0);
    }
    t.step_bound = std::max(t.step_bound, 1.0 + c.eps * bound);
    const double growth = t.norms[l + 1] / t.norms[l];
    t.max_step_growth = std::max(t.max_step_growth, growth);
  }
  for (double v : t.norms) {
    t.finite = t.finite && std::isfinite(v);
    t.max_ratio = std::max(t.max_ratio, v / t.norms.front());
  }
  t.final_ratio = t.norms.back() / t.norms.front();
  return t;
}

}  // namespace

bool SuiteReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const SuiteCheck& c) { return !c.asserted || c.passed; });
}

nlohmann::json SuiteReport::to_json() const {
  nlohmann::json cs = nlohmann::json::array();
  for (const auto& c : checks) {
    cs.push_back({{"name", c.name}, {"passed", c.passed}, {"asserted", c.asserted}, {"value", c.value},
                  {"tolerance", c.tolerance}, {"detail", c.detail}});
  }
  return {{"suite", suite}, {"passed", passed()}, {"seconds", seconds}, {"checks", cs}};
}

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"algebra", "lemma", "corollaries", "gradcheck", "stability"};
  return names;
}

SuiteReport run_suite(const std::string& name, const VerifyOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  SuiteReport r;
  if (name == "algebra") {
    r = algebra_suite(opts);
  } else if (name == "lemma") {
    r = lemma_suite(opts);
  } else if (name == "corollaries") {
    r = corollaries_suite(opts);
  } else if (name == "gradcheck") {
    r = gradcheck_suite(opts);
  } else if (name == "stability") {
    r = stability_suite(opts);
  } else {
    throw Error(ErrorCode::ConfigInvalid, "unknown suite '" + name + "'");
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

double antisymmetric_real_part(std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  Matrix w(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (auto& v : w.reshaped()) v = z(rng);
  const Eigen::EigenSolver<Matrix> es(stable_update_matrix(w, 0.0), false);
  return es.eigenvalues().real().cwiseAbs().maxCoeff();
}

StabilityContrast stability_contrast(std::uint64_t seed, std::size_t layers, std::size_t K) {
  const TaskInstance inst = gen_barbell(barbell_clique_size(50), 4, derive_seed(seed, 7));
  const std::vector<Graph> graphs{inst.graph};
  const std::vector<Matrix> feats{inst.x};
  const Batch batch = make_batch(graphs, feats);

  ModelConfig mc;
  mc.layers = layers;
  mc.K = K;
  mc.hidden = 16;
  mc.stable = true;
  mc.eps = 0.1;
  mc.gamma = 0.05;
  mc.in_dim = 1;
  mc.out_dim = 1;
  mc.use_mu = false;

  StabilityContrast out;
  mc.antisymmetric = true;
  out.stable = trace_norms(MuChebNet(mc, seed), batch);
  mc.antisymmetric = false;
  out.raw_small_step = trace_norms(MuChebNet(mc, seed), batch);
  mc.eps = 1.0;
  out.unstabilized = trace_norms(MuChebNet(mc, seed), batch);
  return out;
}

GradcheckPoint model_gradcheck_point(std::uint64_t seed, OperatorKind op, bool stable) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> size(8, 16);
  const std::size_t n = size(rng);
  const Graph g = random_connected(n, 0.3, rng);
  std::normal_distribution<double> z(0.0, 1.0);
  const auto rows = static_cast<Eigen::Index>(n);
  Matrix x(rows, 3), y(rows, 2);
  for (auto& v : x.reshaped()) v = z(rng);
  for (auto& v : y.reshaped()) v = z(rng);
  Vector mask(rows);
  std::bernoulli_distribution keep(0.5);
  for (auto& m : mask) m = keep(rng) ? 1.0 : 0.0;
  mask[0] = 1.0;

  ModelConfig mc;
  mc.layers = 2;
  mc.K = 3;
  mc.hidden = 4;
  mc.op = op;
  mc.activation = Activation::Tanh;
  mc.in_dim = 3;
  mc.out_dim = 2;
  mc.mu.hidden = 4;
  if (stable) {
    mc.stable = true;
    mc.eps = 0.5;
    mc.gamma = 0.1;
    mc.stable_activation = true;
  }
  MuChebNet model(mc, seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (auto& p : model.params())
    for (auto& v : p.value.reshaped()) v = u(rng);

  const std::vector<Graph> graphs{g};
  const std::vector<Matrix> feats{x};
  const Batch batch = make_batch(graphs, feats);
  ForwardOptions fo;
  {
    ad::Tape tape;
    const auto leaves = model.params().bind(tape);
    fo.lambda_max = model.forward(tape, leaves, batch).lambda_max;
  }
  const auto res = ad::gradcheck(model.params(), [&](ad::Tape& tape, const std::vector<ad::Var>& leaves) {
    return loss(LossKind::Mse, model.forward(tape, leaves, batch, fo).prediction, y, mask);
  });
  return {res.max_rel_error, res.entries, res.worst, n};
}

}  // namespace bes
