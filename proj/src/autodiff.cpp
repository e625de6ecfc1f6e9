#include "bes/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bes/error.hpp"

namespace bes::ad {

namespace {

Tape& tape_of(const Var& a) {
  if (!a.valid()) throw Error(ErrorCode::DetachedLoss, "use of an unrecorded variable");
  return *a.tape();
}

Tape& tape_of(const Var& a, const Var& b) {
  if (a.tape() != b.tape()) throw Error(ErrorCode::DetachedLoss, "operands live on different tapes");
  return tape_of(a);
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorCode::ShapeMismatch, std::string(op) + ": " + std::to_string(a.rows()) + "x" +
                                              std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                              std::to_string(b.cols()));
  }
}

std::size_t count_mask(const Vector& mask) {
  return static_cast<std::size_t>((mask.array() > 0.0).count());
}

}  // namespace

const Matrix& Var::value() const { return tape_->value(id_); }

void GradSink::add(const Var& v, const Matrix& g) {
  if (!needs_[v.id()]) return;
  Matrix& slot = grads_[v.id()];
  if (slot.size() == 0) {
    slot = g;
  } else {
    slot += g;
  }
}

Matrix Gradients::of(const Var& leaf) const {
  if (leaf.tape() != tape_) throw Error(ErrorCode::DetachedLoss, "leaf from another tape");
  const Matrix& g = grads_[leaf.id()];
  if (g.size() == 0) return Matrix::Zero(leaf.rows(), leaf.cols());
  return g;
}

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), false, false, {}, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::leaf(Matrix value) {
  nodes_.push_back(Node{std::move(value), true, true, {}, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Matrix value, std::initializer_list<Var> parents, Backward backward) {
  Node node;
  node.value = std::move(value);
  for (const Var& p : parents) {
    if (p.tape() != this) throw Error(ErrorCode::DetachedLoss, "parent recorded on another tape");
    node.parents.push_back(p.id());
    node.requires_grad = node.requires_grad || nodes_[p.id()].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Gradients Tape::backward(const Var& loss) const {
  if (loss.tape() != this) throw Error(ErrorCode::DetachedLoss, "loss was not recorded on this tape");
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw Error(ErrorCode::NotScalar, "loss has shape " + std::to_string(loss.rows()) + "x" + std::to_string(loss.cols()));
  }
  std::vector<Matrix> grads(nodes_.size());
  std::vector<bool> needs(nodes_.size(), false);
  for (std::size_t i = 0; i < nodes_.size(); ++i) needs[i] = nodes_[i].requires_grad;
  grads[loss.id()] = Matrix::Ones(1, 1);
  GradSink sink(grads, needs);
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    const Node& node = nodes_[i];
    if (!node.backward || grads[i].size() == 0) continue;
    node.backward(grads[i], sink);
    if (!node.trainable) grads[i].resize(0, 0);
  }
  return Gradients(this, std::move(grads));
}

// ---- primitives -------------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b);
  if (a.cols() != b.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "matmul " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                              " * " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  return t.record(a.value() * b.value(), {a, b}, [a, b](const Matrix& g, GradSink& s) {
    if (s.wants(a)) s.add(a, g * b.value().transpose());
    if (s.wants(b)) s.add(b, a.value().transpose() * g);
  });
}

Var add(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b);
  require_same_shape(a, b, "add");
  return t.record(a.value() + b.value(), {a, b}, [a, b](const Matrix& g, GradSink& s) {
    s.add(a, g);
    s.add(b, g);
  });
}

Var sub(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b);
  require_same_shape(a, b, "sub");
  return t.record(a.value() - b.value(), {a, b}, [a, b](const Matrix& g, GradSink& s) {
    s.add(a, g);
    if (s.wants(b)) s.add(b, -g);
  });
}

Var hadamard(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b);
  require_same_shape(a, b, "hadamard");
  return t.record(a.value().cwiseProduct(b.value()), {a, b}, [a, b](const Matrix& g, GradSink& s) {
    if (s.wants(a)) s.add(a, g.cwiseProduct(b.value()));
    if (s.wants(b)) s.add(b, g.cwiseProduct(a.value()));
  });
}

Var scale(const Var& a, double k) {
  return tape_of(a).record(k * a.value(), {a}, [a, k](const Matrix& g, GradSink& s) { s.add(a, k * g); });
}

Var add_scalar(const Var& a, double k) {
  Matrix v = a.value().array() + k;
  return tape_of(a).record(std::move(v), {a}, [a](const Matrix& g, GradSink& s) { s.add(a, g); });
}

Var add_row(const Var& a, const Var& row) {
  Tape& t = tape_of(a, row);
  if (row.rows() != 1 || row.cols() != a.cols()) throw Error(ErrorCode::ShapeMismatch, "add_row expects 1 x cols");
  Matrix v = a.value().rowwise() + row.value().row(0);
  return t.record(std::move(v), {a, row}, [a, row](const Matrix& g, GradSink& s) {
    s.add(a, g);
    if (s.wants(row)) s.add(row, g.colwise().sum());
  });
}

Var scale_rows(const Var& a, const Var& v) {
  Tape& t = tape_of(a, v);
  if (v.cols() != 1 || v.rows() != a.rows()) throw Error(ErrorCode::ShapeMismatch, "scale_rows expects n x 1");
  Matrix out = v.value().col(0).asDiagonal() * a.value();
  return t.record(std::move(out), {a, v}, [a, v](const Matrix& g, GradSink& s) {
    if (s.wants(a)) s.add(a, v.value().col(0).asDiagonal() * g);
    if (s.wants(v)) s.add(v, g.cwiseProduct(a.value()).rowwise().sum());
  });
}

Var relu(const Var& a) {
  Matrix v = a.value().cwiseMax(0.0);
  return tape_of(a).record(std::move(v), {a}, [a](const Matrix& g, GradSink& s) {
    s.add(a, (a.value().array() > 0.0).cast<double>().matrix().cwiseProduct(g));
  });
}

Var softplus(const Var& a) {
  Matrix v = a.value().unaryExpr([](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); });
  return tape_of(a).record(std::move(v), {a}, [a](const Matrix& g, GradSink& s) {
    const Matrix sig = a.value().unaryExpr([](double x) {
      return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    });
    s.add(a, sig.cwiseProduct(g));
  });
}

Var exp(const Var& a) {
  Matrix v = a.value().array().exp().matrix();
  Tape& t = tape_of(a);
  const std::size_t self = t.size();
  return t.record(std::move(v), {a}, [a, &t, self](const Matrix& g, GradSink& s) {
    s.add(a, t.value(self).cwiseProduct(g));
  });
}

Var tanh(const Var& a) {
  Matrix v = a.value().array().tanh().matrix();
  Tape& t = tape_of(a);
  const std::size_t self = t.size();
  return t.record(std::move(v), {a}, [a, &t, self](const Matrix& g, GradSink& s) {
    const Matrix& y = t.value(self);
    s.add(a, (1.0 - y.array().square()).matrix().cwiseProduct(g));
  });
}

Var pow(const Var& a, double p) {
  Matrix v = a.value().array().pow(p).matrix();
  return tape_of(a).record(std::move(v), {a}, [a, p](const Matrix& g, GradSink& s) {
    s.add(a, (p * a.value().array().pow(p - 1.0)).matrix().cwiseProduct(g));
  });
}

Var sum(const Var& a) {
  return tape_of(a).record(Matrix::Constant(1, 1, a.value().sum()), {a}, [a](const Matrix& g, GradSink& s) {
    s.add(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  return tape_of(a).record(Matrix::Constant(1, 1, a.value().sum() / n), {a}, [a, n](const Matrix& g, GradSink& s) {
    s.add(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0) / n));
  });
}

Var concat_cols(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b);
  if (a.rows() != b.rows()) throw Error(ErrorCode::ShapeMismatch, "concat_cols row counts differ");
  Matrix v(a.rows(), a.cols() + b.cols());
  v << a.value(), b.value();
  return t.record(std::move(v), {a, b}, [a, b](const Matrix& g, GradSink& s) {
    if (s.wants(a)) s.add(a, g.leftCols(a.cols()));
    if (s.wants(b)) s.add(b, g.rightCols(b.cols()));
  });
}

Var transpose(const Var& a) {
  return tape_of(a).record(a.value().transpose(), {a}, [a](const Matrix& g, GradSink& s) { s.add(a, g.transpose()); });
}

Var gather_rows(const Var& a, const std::vector<std::size_t>& idx) {
  Matrix v(static_cast<Eigen::Index>(idx.size()), a.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= static_cast<std::size_t>(a.rows())) throw Error(ErrorCode::IndexOutOfRange, "gather_rows");
    v.row(static_cast<Eigen::Index>(r)) = a.value().row(static_cast<Eigen::Index>(idx[r]));
  }
  return tape_of(a).record(std::move(v), {a}, [a, idx](const Matrix& g, GradSink& s) {
    Matrix out = Matrix::Zero(a.rows(), a.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) {
      out.row(static_cast<Eigen::Index>(idx[r])) += g.row(static_cast<Eigen::Index>(r));
    }
    s.add(a, out);
  });
}

Var segment_mean(const Var& a, const std::vector<std::size_t>& segment, std::size_t num_segments) {
  if (segment.size() != static_cast<std::size_t>(a.rows())) throw Error(ErrorCode::ShapeMismatch, "segment_mean");
  std::vector<double> counts(num_segments, 0.0);
  for (std::size_t s : segment) {
    if (s >= num_segments) throw Error(ErrorCode::IndexOutOfRange, "segment id");
    counts[s] += 1.0;
  }
  Matrix v = Matrix::Zero(static_cast<Eigen::Index>(num_segments), a.cols());
  for (std::size_t i = 0; i < segment.size(); ++i) v.row(static_cast<Eigen::Index>(segment[i])) += a.value().row(static_cast<Eigen::Index>(i));
  for (std::size_t s = 0; s < num_segments; ++s) {
    if (counts[s] > 0) v.row(static_cast<Eigen::Index>(s)) /= counts[s];
  }
  return tape_of(a).record(std::move(v), {a}, [a, segment, counts](const Matrix& g, GradSink& s) {
    Matrix out(a.rows(), a.cols());
    for (std::size_t i = 0; i < segment.size(); ++i) {
      out.row(static_cast<Eigen::Index>(i)) = g.row(static_cast<Eigen::Index>(segment[i])) / counts[segment[i]];
    }
    s.add(a, out);
  });
}

Var spmm(const SparseMatrix& op, const Var& a) {
  if (op.cols() != a.rows()) throw Error(ErrorCode::ShapeMismatch, "spmm operator/columns");
  Matrix v = op * a.value();
  return tape_of(a).record(std::move(v), {a}, [op, a](const Matrix& g, GradSink& s) {
    s.add(a, op.transpose() * g);
  });
}

Var edge_weights(const Graph& g, const Var& mu) {
  if (mu.cols() != 1 || static_cast<std::size_t>(mu.rows()) != g.num_nodes()) {
    throw Error(ErrorCode::ShapeMismatch, "edge_weights expects an n x 1 potential");
  }
  const Matrix& m = mu.value();
  Matrix w(static_cast<Eigen::Index>(g.num_edges()), 1);
  Eigen::Index k = 0;
  for (const Edge& e : g.edges()) {
    w(k++, 0) = 0.5 * (m(static_cast<Eigen::Index>(e.u), 0) + m(static_cast<Eigen::Index>(e.v), 0));
  }
  return tape_of(mu).record(std::move(w), {mu}, [g, mu](const Matrix& up, GradSink& s) {
    Matrix out = Matrix::Zero(mu.rows(), 1);
    Eigen::Index k = 0;
    for (const Edge& e : g.edges()) {
      const double half = 0.5 * up(k++, 0);
      out(static_cast<Eigen::Index>(e.u), 0) += half;
      out(static_cast<Eigen::Index>(e.v), 0) += half;
    }
    s.add(mu, out);
  });
}

Var adjacency_matmul(const Graph& g, const Var& w, const Var& x) {
  Tape& t = tape_of(w, x);
  if (w.cols() != 1 || static_cast<std::size_t>(w.rows()) != g.num_edges() ||
      static_cast<std::size_t>(x.rows()) != g.num_nodes()) {
    throw Error(ErrorCode::ShapeMismatch, "adjacency_matmul shapes");
  }
  // Row-major copies keep the per-edge row updates contiguous.
  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const RowMatrix xv = x.value();
  const Matrix& wv = w.value();
  RowMatrix y = RowMatrix::Zero(xv.rows(), xv.cols());
  Eigen::Index k = 0;
  for (const Edge& e : g.edges()) {
    const auto u = static_cast<Eigen::Index>(e.u), v = static_cast<Eigen::Index>(e.v);
    const double we = wv(k++, 0);
    y.row(u) += we * xv.row(v);
    y.row(v) += we * xv.row(u);
  }
  return t.record(Matrix(y), {w, x}, [g, w, x](const Matrix& up, GradSink& s) {
    const RowMatrix gu = up;
    const Matrix& wv = w.value();
    if (s.wants(x)) {
      RowMatrix gx = RowMatrix::Zero(gu.rows(), gu.cols());
      Eigen::Index k = 0;
      for (const Edge& e : g.edges()) {
        const auto u = static_cast<Eigen::Index>(e.u), v = static_cast<Eigen::Index>(e.v);
        const double we = wv(k++, 0);
        gx.row(u) += we * gu.row(v);
        gx.row(v) += we * gu.row(u);
      }
      s.add(x, Matrix(gx));
    }
    if (s.wants(w)) {
      const RowMatrix xv = x.value();
      Matrix gw(wv.rows(), 1);
      Eigen::Index k = 0;
      for (const Edge& e : g.edges()) {
        const auto u = static_cast<Eigen::Index>(e.u), v = static_cast<Eigen::Index>(e.v);
        gw(k++, 0) = gu.row(u).dot(xv.row(v)) + gu.row(v).dot(xv.row(u));
      }
      s.add(w, gw);
    }
  });
}

Var weighted_degree(const Graph& g, const Var& w) {
  if (w.cols() != 1 || static_cast<std::size_t>(w.rows()) != g.num_edges()) {
    throw Error(ErrorCode::ShapeMismatch, "weighted_degree expects m x 1 weights");
  }
  const Matrix& wv = w.value();
  Matrix d = Matrix::Zero(static_cast<Eigen::Index>(g.num_nodes()), 1);
  for (std::size_t i = 0; i < g.num_nodes(); ++i) {
    double acc = 0.0;
    for (std::size_t id : g.incident_edges(i)) acc += wv(static_cast<Eigen::Index>(id), 0);
    d(static_cast<Eigen::Index>(i), 0) = acc;
  }
  return tape_of(w).record(std::move(d), {w}, [g, w](const Matrix& up, GradSink& s) {
    Matrix gw(w.rows(), 1);
    Eigen::Index k = 0;
    for (const Edge& e : g.edges()) {
      gw(k++, 0) = up(static_cast<Eigen::Index>(e.u), 0) + up(static_cast<Eigen::Index>(e.v), 0);
    }
    s.add(w, gw);
  });
}

Var masked_mse(const Var& pred, const Matrix& target, const Vector& mask) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols() || mask.size() != pred.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "masked_mse shapes");
  }
  const std::size_t count = count_mask(mask);
  if (count == 0) throw Error(ErrorCode::EmptyMask, "no supervised rows");
  const double denom = static_cast<double>(count) * static_cast<double>(pred.cols());
  Matrix diff = pred.value() - target;
  for (Eigen::Index i = 0; i < diff.rows(); ++i) {
    if (!(mask[i] > 0.0)) diff.row(i).setZero();
  }
  const double loss = diff.squaredNorm() / denom;
  return tape_of(pred).record(Matrix::Constant(1, 1, loss), {pred}, [pred, diff, denom](const Matrix& g, GradSink& s) {
    s.add(pred, (2.0 * g(0, 0) / denom) * diff);
  });
}

Var cross_entropy(const Var& logits, const std::vector<std::size_t>& labels, const Vector& mask) {
  if (labels.size() != static_cast<std::size_t>(logits.rows()) || mask.size() != logits.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "cross_entropy shapes");
  }
  const std::size_t count = count_mask(mask);
  if (count == 0) throw Error(ErrorCode::EmptyMask, "no supervised rows");
  const Matrix& z = logits.value();
  Matrix probs = Matrix::Zero(z.rows(), z.cols());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    if (!(mask[i] > 0.0)) continue;
    if (labels[static_cast<std::size_t>(i)] >= static_cast<std::size_t>(z.cols())) {
      throw Error(ErrorCode::IndexOutOfRange, "class label");
    }
    const double mx = z.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (z.row(i).array() - mx).exp().matrix();
    const double total = e.sum();
    probs.row(i) = e / total;
    loss += -(z(i, static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)])) - mx - std::log(total));
  }
  const double n = static_cast<double>(count);
  return tape_of(logits).record(Matrix::Constant(1, 1, loss / n), {logits},
                                [logits, probs, labels, mask, n](const Matrix& g, GradSink& s) {
                                  Matrix out = probs;
                                  for (Eigen::Index i = 0; i < out.rows(); ++i) {
                                    if (mask[i] > 0.0) out(i, static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)])) -= 1.0;
                                  }
                                  s.add(logits, (g(0, 0) / n) * out);
                                });
}

// ---- parameters -------------------------------------------------------------

std::size_t ParameterSet::add(std::string name, Matrix value) {
  for (const Parameter& p : params_) {
    if (p.name == name) throw Error(ErrorCode::ConfigInvalid, "duplicate parameter " + name);
  }
  params_.push_back(Parameter{std::move(name), std::move(value)});
  return params_.size() - 1;
}

std::size_t ParameterSet::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  throw Error(ErrorCode::ConfigInvalid, "unknown parameter " + name);
}

std::size_t ParameterSet::total_size() const {
  std::size_t n = 0;
  for (const Parameter& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

std::vector<Var> ParameterSet::bind(Tape& tape) const {
  std::vector<Var> out;
  out.reserve(params_.size());
  for (const Parameter& p : params_) out.push_back(tape.leaf(p.value));
  return out;
}

GradcheckResult gradcheck(ParameterSet& params, const LossFn& loss, double h, double floor) {
  Tape tape;
  const std::vector<Var> leaves = params.bind(tape);
  const Var l = loss(tape, leaves);
  const Gradients grads = tape.backward(l);

  auto evaluate = [&]() {
    Tape t;
    return loss(t, params.bind(t)).scalar();
  };

  GradcheckResult res;
  for (std::size_t p = 0; p < params.size(); ++p) {
    const Matrix analytic = grads.of(leaves[p]);
    Matrix& value = params[p].value;
    for (Eigen::Index c = 0; c < value.cols(); ++c) {
      for (Eigen::Index r = 0; r < value.rows(); ++r) {
        const double saved = value(r, c);
        value(r, c) = saved + h;
        const double up = evaluate();
        value(r, c) = saved - h;
        const double down = evaluate();
        value(r, c) = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double a = analytic(r, c);
        const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
        ++res.entries;
        if (rel > res.max_rel_error || res.worst.empty()) {
          res.max_rel_error = rel;
          res.worst = params[p].name + "[" + std::to_string(r) + "," + std::to_string(c) + "]";
        }
      }
    }
  }
  return res;
}

}  // namespace bes::ad
