#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "bes/graph.hpp"
#include "bes/types.hpp"

namespace bes::ad {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }

  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Accumulates vector-Jacobian products into parent gradients during backward.
class GradSink {
 public:
  explicit GradSink(std::vector<Matrix>& grads, const std::vector<bool>& needs) : grads_(grads), needs_(needs) {}

  bool wants(const Var& v) const { return needs_[v.id()]; }
  void add(const Var& v, const Matrix& g);

 private:
  std::vector<Matrix>& grads_;
  const std::vector<bool>& needs_;
};

using Backward = std::function<void(const Matrix& upstream, GradSink& sink)>;

/// Gradients of a scalar loss with respect to the trainable leaves of a tape.
class Gradients {
 public:
  Gradients() = default;
  Gradients(const Tape* tape, std::vector<Matrix> grads) : tape_(tape), grads_(std::move(grads)) {}

  /// Gradient for `leaf`; zeros of the leaf's shape when the loss does not depend on it.
  Matrix of(const Var& leaf) const;

 private:
  const Tape* tape_ = nullptr;
  std::vector<Matrix> grads_;
};

/// Records primitive operations in evaluation order. One tape per forward/backward pass.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Value that never receives a gradient.
  Var constant(Matrix value);
  /// Trainable leaf.
  Var leaf(Matrix value);
  /// Records a derived value. `backward` is dropped when no parent needs a gradient.
  Var record(Matrix value, std::initializer_list<Var> parents, Backward backward);

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(const Var& v) const { return nodes_[v.id()].requires_grad; }
  bool is_leaf(const Var& v) const { return nodes_[v.id()].trainable; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Reverse sweep from a 1x1 loss recorded on this tape. Every node is visited at most
  /// once, in reverse recording order. Throws NotScalar or DetachedLoss.
  Gradients backward(const Var& loss) const;

 private:
  struct Node {
    Matrix value;
    bool requires_grad = false;
    bool trainable = false;
    std::vector<std::size_t> parents;
    Backward backward;
  };
  std::vector<Node> nodes_;
};

// ---- primitives -------------------------------------------------------------

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
/// Elementwise product.
Var hadamard(const Var& a, const Var& b);
Var scale(const Var& a, double s);
/// a + s (elementwise).
Var add_scalar(const Var& a, double s);
/// Adds a 1 x c row to every row of a.
Var add_row(const Var& a, const Var& row);
/// diag(v) a for an n x 1 column v.
Var scale_rows(const Var& a, const Var& v);
Var relu(const Var& a);
Var softplus(const Var& a);
Var exp(const Var& a);
Var tanh(const Var& a);
/// Elementwise a^p (a > 0 where p is not an integer).
Var pow(const Var& a, double p);
Var sum(const Var& a);
Var mean(const Var& a);
Var concat_cols(const Var& a, const Var& b);
Var transpose(const Var& a);
/// Rows of a selected by idx, in idx order.
Var gather_rows(const Var& a, const std::vector<std::size_t>& idx);
/// Mean of the rows of a per segment: out(s) = mean{a(i) : segment[i] = s}.
Var segment_mean(const Var& a, const std::vector<std::size_t>& segment, std::size_t num_segments);
/// Constant sparse operator times a.
Var spmm(const SparseMatrix& op, const Var& a);

/// Per canonical edge: w_e = (mu_u + mu_v) / 2. mu is n x 1; result m x 1.
Var edge_weights(const Graph& g, const Var& mu);
/// A_w x for edge weights w (m x 1) and x (n x c).
Var adjacency_matmul(const Graph& g, const Var& w, const Var& x);
/// Weighted degrees d_i = sum of incident w_e (n x 1).
Var weighted_degree(const Graph& g, const Var& w);

/// Mean over rows with mask[i] > 0 of the squared error summed over columns / columns.
/// Throws EmptyMask.
Var masked_mse(const Var& pred, const Matrix& target, const Vector& mask);
/// Mean over masked rows of -log softmax(logits)[label]. Throws EmptyMask.
Var cross_entropy(const Var& logits, const std::vector<std::size_t>& labels, const Vector& mask);

// ---- parameters -------------------------------------------------------------

struct Parameter {
  std::string name;
  Matrix value;
};

/// Ordered, named parameter tensors.
class ParameterSet {
 public:
  std::size_t add(std::string name, Matrix value);
  std::size_t size() const noexcept { return params_.size(); }
  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  /// Index of `name`; throws ConfigInvalid when missing.
  std::size_t index_of(const std::string& name) const;
  const Matrix& value(const std::string& name) const { return params_[index_of(name)].value; }
  std::size_t total_size() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  /// Registers every parameter as a trainable leaf, in order.
  std::vector<Var> bind(Tape& tape) const;

 private:
  std::vector<Parameter> params_;
};

struct GradcheckResult {
  double max_rel_error = 0.0;
  std::size_t entries = 0;
  std::string worst;  // "<param>[r,c]"
};

using LossFn = std::function<Var(Tape&, const std::vector<Var>&)>;

/// Compares backward() against central differences for every parameter entry.
/// Relative error is |a - n| / max(|a|, |n|, floor).
GradcheckResult gradcheck(ParameterSet& params, const LossFn& loss, double h = 1e-5, double floor = 1e-6);

}  // namespace bes::ad
