#include "bes/models.hpp"

#include <cmath>
#include <random>
#include <string>

#include "bes/error.hpp"

namespace bes {

namespace {

std::string mu_w(std::size_t l) { return "mu.gcn" + std::to_string(l) + ".W"; }
std::string mu_b(std::size_t l) { return "mu.gcn" + std::to_string(l) + ".b"; }
std::string cheb_theta(std::size_t l, std::size_t k) {
  return "cheb" + std::to_string(l) + ".theta" + std::to_string(k);
}
std::string cheb_b(std::size_t l) { return "cheb" + std::to_string(l) + ".b"; }
std::string stable_w(std::size_t l, std::size_t k) { return "stable" + std::to_string(l) + ".W" + std::to_string(k); }

Matrix uniform_init(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double fan_in) {
  const double bound = 1.0 / std::sqrt(fan_in);
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = dist(rng);
  return m;
}

ad::Var activate(Activation a, const ad::Var& x) { return a == Activation::ReLU ? ad::relu(x) : ad::tanh(x); }

const char* to_string(OperatorKind k) { return k == OperatorKind::SymNormalized ? "sym" : "unnorm"; }
const char* to_string(MuInput k) {
  switch (k) {
    case MuInput::Features: return "features";
    case MuInput::Degree: return "degree";
    case MuInput::FeaturesAndDegree: return "features+degree";
  }
  return "features";
}

}  // namespace

void ModelConfig::validate() const {
  if (layers == 0) throw Error(ErrorCode::ConfigInvalid, "layers must be >= 1");
  if (hidden == 0 || in_dim == 0 || out_dim == 0) throw Error(ErrorCode::ConfigInvalid, "dimensions must be >= 1");
  if (stable && eps < 0.0) throw Error(ErrorCode::ConfigInvalid, "eps must be >= 0");
  if (stable && gamma < 0.0) throw Error(ErrorCode::ConfigInvalid, "gamma must be >= 0");
  if (use_mu && mu.layers == 0) throw Error(ErrorCode::ConfigInvalid, "mu.layers must be >= 1");
  if (use_mu && !(mu.eps_floor > 0.0)) throw Error(ErrorCode::ConfigInvalid, "mu.eps_floor must be > 0");
  if (lambda_max < 0.0) throw Error(ErrorCode::ConfigInvalid, "lambda_max must be >= 0");
}

nlohmann::json to_json(const ModelConfig& c) {
  return {
      {"layers", c.layers},
      {"K", c.K},
      {"hidden", c.hidden},
      {"operator", to_string(c.op)},
      {"stable", c.stable},
      {"antisymmetric", c.antisymmetric},
      {"gamma", c.gamma},
      {"eps", c.eps},
      {"stable_activation", c.stable_activation},
      {"use_mu", c.use_mu},
      {"mu",
       {{"layers", c.mu.layers},
        {"hidden", c.mu.hidden},
        {"eps_floor", c.mu.eps_floor},
        {"input", to_string(c.mu.input)},
        {"zero_head", c.mu.zero_head}}},
      {"activation", c.activation == Activation::ReLU ? "relu" : "tanh"},
      {"readout", c.readout == Readout::Node ? "node" : "graph"},
      {"in_dim", c.in_dim},
      {"out_dim", c.out_dim},
      {"lambda_max", c.lambda_max},
  };
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.layers = j.value("layers", c.layers);
    c.K = j.value("K", c.K);
    c.hidden = j.value("hidden", c.hidden);
    const std::string op = j.value("operator", std::string("sym"));
    if (op == "sym") {
      c.op = OperatorKind::SymNormalized;
    } else if (op == "unnorm") {
      c.op = OperatorKind::Unnormalized;
    } else {
      throw Error(ErrorCode::ConfigInvalid, "operator must be \"sym\" or \"unnorm\"");
    }
    c.stable = j.value("stable", c.stable);
    c.antisymmetric = j.value("antisymmetric", c.antisymmetric);
    c.gamma = j.value("gamma", c.gamma);
    c.eps = j.value("eps", c.eps);
    c.stable_activation = j.value("stable_activation", c.stable_activation);
    c.use_mu = j.value("use_mu", c.use_mu);
    if (j.contains("mu")) {
      const auto& m = j.at("mu");
      c.mu.layers = m.value("layers", c.mu.layers);
      c.mu.hidden = m.value("hidden", c.mu.hidden);
      c.mu.eps_floor = m.value("eps_floor", c.mu.eps_floor);
      c.mu.zero_head = m.value("zero_head", c.mu.zero_head);
      const std::string in = m.value("input", std::string("features"));
      if (in == "features") {
        c.mu.input = MuInput::Features;
      } else if (in == "degree") {
        c.mu.input = MuInput::Degree;
      } else if (in == "features+degree") {
        c.mu.input = MuInput::FeaturesAndDegree;
      } else {
        throw Error(ErrorCode::ConfigInvalid, "mu.input must be features, degree or features+degree");
      }
    }
    const std::string act = j.value("activation", std::string("relu"));
    if (act != "relu" && act != "tanh") throw Error(ErrorCode::ConfigInvalid, "activation must be relu or tanh");
    c.activation = act == "relu" ? Activation::ReLU : Activation::Tanh;
    const std::string ro = j.value("readout", std::string("node"));
    if (ro != "node" && ro != "graph") throw Error(ErrorCode::ConfigInvalid, "readout must be node or graph");
    c.readout = ro == "node" ? Readout::Node : Readout::Graph;
    c.in_dim = j.value("in_dim", c.in_dim);
    c.out_dim = j.value("out_dim", c.out_dim);
    c.lambda_max = j.value("lambda_max", c.lambda_max);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, e.what());
  }
  c.validate();
  return c;
}

Batch make_batch(std::span<const Graph> graphs, std::span<const Matrix> features) {
  if (graphs.size() != features.size() || graphs.empty()) {
    throw Error(ErrorCode::ShapeMismatch, "batch needs one feature matrix per graph");
  }
  Batch b;
  b.num_graphs = graphs.size();
  b.graph = graphs.size() == 1 ? graphs.front() : disjoint_union(graphs);
  const Eigen::Index cols = features.front().cols();
  b.x.resize(static_cast<Eigen::Index>(b.graph.num_nodes()), cols);
  b.offsets.push_back(0);
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    const auto n = static_cast<Eigen::Index>(graphs[i].num_nodes());
    if (features[i].rows() != n || features[i].cols() != cols) {
      throw Error(ErrorCode::ShapeMismatch, "features of instance " + std::to_string(i));
    }
    b.x.middleRows(static_cast<Eigen::Index>(b.offsets.back()), n) = features[i];
    b.segment.insert(b.segment.end(), static_cast<std::size_t>(n), i);
    b.offsets.push_back(b.offsets.back() + static_cast<std::size_t>(n));
  }

  const Graph& g = b.graph;
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  b.degree.resize(n, 1);
  Vector inv(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = static_cast<double>(g.degree(static_cast<std::size_t>(i)));
    b.degree(i, 0) = d;
    inv[i] = 1.0 / std::sqrt(d + 1.0);
  }
  std::vector<Triplet> t;
  t.reserve(g.adjacency_nnz() + g.num_nodes());
  for (Eigen::Index i = 0; i < n; ++i) {
    t.emplace_back(i, i, inv[i] * inv[i]);
    for (std::size_t j : g.neighbors(static_cast<std::size_t>(i))) {
      t.emplace_back(i, j, inv[i] * inv[static_cast<Eigen::Index>(j)]);
    }
  }
  b.gcn_adjacency.resize(n, n);
  b.gcn_adjacency.setFromTriplets(t.begin(), t.end());
  return b;
}

std::vector<double> segment_lambda_max(const SparseMatrix& op, std::span<const std::size_t> offsets,
                                       std::size_t max_iters, double tol) {
  const std::size_t segs = offsets.size() - 1;
  const Eigen::Index n = op.rows();
  Vector x(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto h = (static_cast<std::uint64_t>(i) + 1) * 0x9E3779B97F4A7C15ULL;
    x[i] = 0.5 + static_cast<double>(h >> 11) * 0x1.0p-53;
  }
  auto seg = [&](std::size_t s) {
    return std::pair<Eigen::Index, Eigen::Index>(static_cast<Eigen::Index>(offsets[s]),
                                                 static_cast<Eigen::Index>(offsets[s + 1] - offsets[s]));
  };
  for (std::size_t s = 0; s < segs; ++s) {
    auto [o, len] = seg(s);
    x.segment(o, len).normalize();
  }
  std::vector<double> rho(segs, 0.0);
  std::vector<bool> done(segs, false);
  for (std::size_t it = 1; it <= max_iters; ++it) {
    const Vector y = op * x;
    bool all = true;
    for (std::size_t s = 0; s < segs; ++s) {
      if (done[s]) continue;
      auto [o, len] = seg(s);
      const double next = x.segment(o, len).dot(y.segment(o, len));
      const double norm = y.segment(o, len).norm();
      if (norm == 0.0) {
        rho[s] = 0.0;
        done[s] = true;
        continue;
      }
      x.segment(o, len) = y.segment(o, len) / norm;
      if (it > 1 && std::abs(next - rho[s]) <= tol * std::abs(next)) done[s] = true;
      rho[s] = next;
      all = all && done[s];
    }
    if (all) break;
  }
  for (double& r : rho) r *= kLambdaMaxSlack;
  return rho;
}

Matrix stable_update_matrix(const Matrix& w, double gamma) {
  return w - w.transpose() - gamma * Matrix::Identity(w.rows(), w.cols());
}

MuChebNet::MuChebNet(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  init_params(seed);
}

MuChebNet::MuChebNet(ModelConfig config, ad::ParameterSet params) : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
  // Shape check against a freshly initialized reference.
  MuChebNet ref(config_, 0);
  if (ref.params_.size() != params_.size()) throw Error(ErrorCode::ShapeMismatch, "parameter count differs from config");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& a = ref.params_[i];
    const auto& b = params_[i];
    if (a.name != b.name || a.value.rows() != b.value.rows() || a.value.cols() != b.value.cols()) {
      throw Error(ErrorCode::ShapeMismatch, "parameter " + b.name + " does not match the config");
    }
  }
}

std::size_t MuChebNet::mu_input_dim() const {
  switch (config_.mu.input) {
    case MuInput::Features: return config_.in_dim;
    case MuInput::Degree: return 1;
    case MuInput::FeaturesAndDegree: return config_.in_dim + 1;
  }
  return config_.in_dim;
}

void MuChebNet::init_params(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto& c = config_;
  const auto h = static_cast<Eigen::Index>(c.hidden);
  if (c.use_mu) {
    auto in = static_cast<Eigen::Index>(mu_input_dim());
    for (std::size_t l = 0; l < c.mu.layers; ++l) {
      const bool head = l + 1 == c.mu.layers;
      const Eigen::Index out = head ? 1 : static_cast<Eigen::Index>(c.mu.hidden);
      Matrix w = uniform_init(rng, in, out, static_cast<double>(in));
      if (head && c.mu.zero_head) w.setZero();
      params_.add(mu_w(l), std::move(w));
      params_.add(mu_b(l), Matrix::Zero(1, out));
      in = out;
    }
  }
  const double terms = static_cast<double>(c.K + 1);
  if (c.stable) {
    params_.add("enc.W", uniform_init(rng, static_cast<Eigen::Index>(c.in_dim), h, static_cast<double>(c.in_dim)));
    params_.add("enc.b", Matrix::Zero(1, h));
    for (std::size_t l = 0; l < c.layers; ++l)
      for (std::size_t k = 0; k <= c.K; ++k) {
        params_.add(stable_w(l, k), uniform_init(rng, h, h, static_cast<double>(c.hidden) * terms));
      }
  } else {
    auto in = static_cast<Eigen::Index>(c.in_dim);
    for (std::size_t l = 0; l < c.layers; ++l) {
      for (std::size_t k = 0; k <= c.K; ++k) {
        params_.add(cheb_theta(l, k), uniform_init(rng, in, h, static_cast<double>(in) * terms));
      }
      params_.add(cheb_b(l), Matrix::Zero(1, h));
      in = h;
    }
  }
  params_.add("head.W", uniform_init(rng, h, static_cast<Eigen::Index>(c.out_dim), static_cast<double>(c.hidden)));
  params_.add("head.b", Matrix::Zero(1, static_cast<Eigen::Index>(c.out_dim)));
}

ad::Var MuChebNet::potential(ad::Tape& tape, const std::vector<ad::Var>& leaves, const Batch& batch) const {
  const auto& c = config_;
  if (!c.use_mu) return tape.constant(Matrix::Ones(static_cast<Eigen::Index>(batch.graph.num_nodes()), 1));
  Matrix input;
  switch (c.mu.input) {
    case MuInput::Features: input = batch.x; break;
    case MuInput::Degree: input = batch.degree; break;
    case MuInput::FeaturesAndDegree:
      input.resize(batch.x.rows(), batch.x.cols() + 1);
      input << batch.x, batch.degree;
      break;
  }
  if (static_cast<std::size_t>(input.cols()) != mu_input_dim()) {
    throw Error(ErrorCode::ShapeMismatch, "potential network expects " + std::to_string(mu_input_dim()) + " inputs");
  }
  ad::Var h = tape.constant(std::move(input));
  ad::Var z;
  for (std::size_t l = 0; l < c.mu.layers; ++l) {
    const ad::Var& w = leaves[params_.index_of(mu_w(l))];
    const ad::Var& b = leaves[params_.index_of(mu_b(l))];
    z = ad::add_row(ad::matmul(ad::spmm(batch.gcn_adjacency, h), w), b);
    if (l + 1 < c.mu.layers) h = activate(c.activation, z);
  }
  return ad::add_scalar(ad::softplus(z), c.mu.eps_floor);
}

ForwardResult MuChebNet::forward(ad::Tape& tape, const std::vector<ad::Var>& leaves, const Batch& batch,
                                 const ForwardOptions& opts) const {
  const auto& c = config_;
  const Graph& g = batch.graph;
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  if (leaves.size() != params_.size()) throw Error(ErrorCode::ShapeMismatch, "leaves do not match parameters");
  if (static_cast<std::size_t>(batch.x.cols()) != c.in_dim) {
    throw Error(ErrorCode::ShapeMismatch, "model expects " + std::to_string(c.in_dim) + " input channels, got " +
                                              std::to_string(batch.x.cols()));
  }
  auto leaf = [&](const std::string& name) -> const ad::Var& { return leaves[params_.index_of(name)]; };

  ForwardResult res;
  res.mu = opts.constant_mu ? tape.constant(Matrix::Constant(n, 1, *opts.constant_mu)) : potential(tape, leaves, batch);
  const ad::Var w = ad::edge_weights(g, res.mu);
  const ad::Var deg = ad::weighted_degree(g, w);
  const bool sym = c.op == OperatorKind::SymNormalized;

  ad::Var inv_sqrt;
  if (sym) {
    if ((deg.value().array() <= 0.0).any()) {
      throw Error(ErrorCode::IsolatedNodeUnderMu, "normalized operator needs positive weighted degrees");
    }
    inv_sqrt = ad::pow(deg, -0.5);
  }

  if (c.lambda_max > 0.0) {
    res.lambda_max.assign(batch.num_graphs, c.lambda_max);
  } else if (opts.lambda_max) {
    if (opts.lambda_max->size() != batch.num_graphs) throw Error(ErrorCode::ShapeMismatch, "lambda_max per instance");
    res.lambda_max = *opts.lambda_max;
  } else {
    // Numeric copy of the operator; lambda_max carries no gradient.
    std::vector<Triplet> t;
    t.reserve(g.adjacency_nnz() + g.num_nodes());
    const Matrix& wv = w.value();
    const Matrix& dv = deg.value();
    for (Eigen::Index i = 0; i < n; ++i) {
      t.emplace_back(i, i, sym ? 1.0 : dv(i, 0));
      const auto nb = g.neighbors(static_cast<std::size_t>(i));
      const auto ids = g.incident_edges(static_cast<std::size_t>(i));
      for (std::size_t k = 0; k < nb.size(); ++k) {
        double a = wv(static_cast<Eigen::Index>(ids[k]), 0);
        if (sym) a *= inv_sqrt.value()(i, 0) * inv_sqrt.value()(static_cast<Eigen::Index>(nb[k]), 0);
        t.emplace_back(i, nb[k], -a);
      }
    }
    SparseMatrix op(n, n);
    op.setFromTriplets(t.begin(), t.end());
    res.lambda_max = segment_lambda_max(op, batch.offsets);
  }
  Matrix scale_col(n, 1);
  for (std::size_t s = 0; s < batch.num_graphs; ++s) {
    const double lm = res.lambda_max[s];
    if (!(lm > 0.0)) throw Error(ErrorCode::NonPositiveLambdaMax, "instance " + std::to_string(s));
    for (std::size_t i = batch.offsets[s]; i < batch.offsets[s + 1]; ++i) scale_col(static_cast<Eigen::Index>(i), 0) = 2.0 / lm;
  }
  const ad::Var scale = tape.constant(std::move(scale_col));

  // L~ X = (2 / lambda_max) L X - X, per instance.
  auto apply_scaled = [&](const ad::Var& x) {
    ad::Var lx = sym ? ad::sub(x, ad::scale_rows(ad::adjacency_matmul(g, w, ad::scale_rows(x, inv_sqrt)), inv_sqrt))
                     : ad::sub(ad::scale_rows(x, deg), ad::adjacency_matmul(g, w, x));
    return ad::sub(ad::scale_rows(lx, scale), x);
  };

  ad::Var h = tape.constant(batch.x);
  if (c.stable) h = ad::add_row(ad::matmul(h, leaf("enc.W")), leaf("enc.b"));
  const Matrix damping = -c.gamma * Matrix::Identity(static_cast<Eigen::Index>(c.hidden), static_cast<Eigen::Index>(c.hidden));

  for (std::size_t l = 0; l < c.layers; ++l) {
    ad::Var acc;
    ad::Var prev, cur;
    for (std::size_t k = 0; k <= c.K; ++k) {
      ad::Var tk;
      if (k == 0) {
        tk = h;
      } else if (k == 1) {
        tk = apply_scaled(h);
      } else {
        tk = ad::sub(ad::scale(apply_scaled(cur), 2.0), prev);
      }
      if (k >= 1) {
        prev = k == 1 ? h : cur;
      }
      cur = tk;

      ad::Var weight;
      if (c.stable) {
        const ad::Var& wk = leaf(stable_w(l, k));
        weight = c.antisymmetric ? ad::add(ad::sub(wk, ad::transpose(wk)), tape.constant(damping)) : wk;
      } else {
        weight = leaf(cheb_theta(l, k));
      }
      const ad::Var term = ad::matmul(tk, weight);
      acc = acc.valid() ? ad::add(acc, term) : term;
    }
    if (c.stable) {
      h = ad::add(h, ad::scale(acc, c.eps));
      if (c.stable_activation) h = activate(c.activation, h);
    } else {
      h = activate(c.activation, ad::add_row(acc, leaf(cheb_b(l))));
    }
    if (opts.track_norms) res.hidden_norms.push_back(h.value().norm());
  }

  if (c.readout == Readout::Graph) h = ad::segment_mean(h, batch.segment, batch.num_graphs);
  res.prediction = ad::add_row(ad::matmul(h, leaf("head.W")), leaf("head.b"));
  return res;
}

Matrix MuChebNet::predict(const Batch& batch, const ForwardOptions& opts) const {
  ad::Tape tape;
  const auto leaves = params_.bind(tape);
  return forward(tape, leaves, batch, opts).prediction.value();
}

Vector MuChebNet::potential_values(const Batch& batch) const {
  ad::Tape tape;
  const auto leaves = params_.bind(tape);
  return potential(tape, leaves, batch).value().col(0);
}

ad::Var loss(LossKind kind, const ad::Var& pred, const Matrix& target, const Vector& mask) {
  switch (kind) {
    case LossKind::Mse: return ad::masked_mse(pred, target, mask);
    case LossKind::Log10MseReport: {
      const double mse = ad::masked_mse(pred, target, mask).scalar();
      return pred.tape()->constant(Matrix::Constant(1, 1, std::log10(mse)));
    }
    case LossKind::CrossEntropy: {
      if (target.rows() != pred.rows() || target.cols() < 1) throw Error(ErrorCode::ShapeMismatch, "class targets");
      std::vector<std::size_t> labels(static_cast<std::size_t>(target.rows()));
      for (Eigen::Index i = 0; i < target.rows(); ++i) labels[static_cast<std::size_t>(i)] = static_cast<std::size_t>(std::lround(target(i, 0)));
      return ad::cross_entropy(pred, labels, mask);
    }
  }
  throw Error(ErrorCode::ConfigInvalid, "unknown loss kind");
}

}  // namespace bes
