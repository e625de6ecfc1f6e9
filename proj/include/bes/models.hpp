#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"

#include "bes/autodiff.hpp"
#include "bes/chebyshev.hpp"
#include "bes/graph.hpp"
#include "bes/types.hpp"

namespace bes {

/// Floor added after the softplus head of the potential network.
inline constexpr double kMuFloor = 1e-4;

enum class MuInput { Features, Degree, FeaturesAndDegree };
enum class Activation { ReLU, Tanh };
enum class Readout { Node, Graph };

/// GCN producing the potential: layers-1 hidden GCN layers, then a GCN head to one
/// channel followed by softplus + eps_floor. Propagation uses D~^-1/2 (A + I) D~^-1/2.
struct MuConfig {
  std::size_t layers = 2;
  std::size_t hidden = 16;
  double eps_floor = kMuFloor;
  MuInput input = MuInput::Features;
  /// Start the head at zero so the initial potential is the constant softplus(0) + eps.
  bool zero_head = false;
};

struct ModelConfig {
  std::size_t layers = 2;
  std::size_t K = 9;
  std::size_t hidden = 16;
  OperatorKind op = OperatorKind::SymNormalized;
  /// Residual update X + eps * sum_k T_k X (W_k - W_k^T - gamma I).
  bool stable = false;
  /// With stable = true and antisymmetric = false, the residual uses raw W_k (no stabilization).
  bool antisymmetric = true;
  double gamma = 0.0;
  double eps = 0.1;
  /// Nonlinearity after each stable residual layer.
  bool stable_activation = false;
  /// false gives a plain ChebNet (mu == 1).
  bool use_mu = true;
  MuConfig mu;
  Activation activation = Activation::ReLU;
  Readout readout = Readout::Node;
  std::size_t in_dim = 1;
  std::size_t out_dim = 1;
  /// > 0 pins lambda_max; otherwise it is re-estimated per instance on every forward.
  double lambda_max = 0.0;

  /// Throws ConfigInvalid.
  void validate() const;
};

nlohmann::json to_json(const ModelConfig& c);
/// Missing keys keep their defaults. Throws ConfigInvalid.
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Several graphs stacked block-diagonally; node rows of instance b are contiguous.
struct Batch {
  Graph graph;
  Matrix x;
  std::vector<std::size_t> segment;  // instance id per node
  std::vector<std::size_t> offsets;  // node offset per instance, plus total
  std::size_t num_graphs = 0;
  SparseMatrix gcn_adjacency;        // D~^-1/2 (A + I) D~^-1/2
  Matrix degree;                     // n x 1
};

/// Throws ShapeMismatch when a feature matrix does not match its graph.
Batch make_batch(std::span<const Graph> graphs, std::span<const Matrix> features);

struct ForwardOptions {
  /// Per-instance lambda_max to use instead of re-estimating (e.g. frozen for gradchecks).
  std::optional<std::vector<double>> lambda_max;
  /// Replace the learned potential by this constant.
  std::optional<double> constant_mu;
  /// Record the Frobenius norm of the hidden state after each propagation layer.
  bool track_norms = false;
};

struct ForwardResult {
  ad::Var prediction;  // n x out (node readout) or num_graphs x out (graph readout)
  ad::Var mu;          // n x 1
  std::vector<double> lambda_max;
  std::vector<double> hidden_norms;
};

/// mu-ChebNet and its stable residual variant; also plain ChebNet when use_mu is false.
class MuChebNet {
 public:
  MuChebNet(ModelConfig config, std::uint64_t seed);
  MuChebNet(ModelConfig config, ad::ParameterSet params);

  const ModelConfig& config() const noexcept { return config_; }
  ad::ParameterSet& params() noexcept { return params_; }
  const ad::ParameterSet& params() const noexcept { return params_; }

  /// `leaves` must come from params().bind(tape).
  ForwardResult forward(ad::Tape& tape, const std::vector<ad::Var>& leaves, const Batch& batch,
                        const ForwardOptions& opts = {}) const;

  /// Potential only (on tape).
  ad::Var potential(ad::Tape& tape, const std::vector<ad::Var>& leaves, const Batch& batch) const;

  /// Convenience: numeric forward on a fresh tape.
  Matrix predict(const Batch& batch, const ForwardOptions& opts = {}) const;
  Vector potential_values(const Batch& batch) const;

 private:
  void init_params(std::uint64_t seed);
  std::size_t mu_input_dim() const;

  ModelConfig config_;
  ad::ParameterSet params_;
};

/// Per-instance largest eigenvalue of a block-diagonal PSD operator by simultaneous power
/// iteration, multiplied by kLambdaMaxSlack.
std::vector<double> segment_lambda_max(const SparseMatrix& op, std::span<const std::size_t> offsets,
                                       std::size_t max_iters = 2000, double tol = 1e-12);

enum class LossKind { Mse, Log10MseReport, CrossEntropy };

/// Mse and CrossEntropy are differentiable; Log10MseReport returns a detached constant.
/// CrossEntropy reads class ids from column 0 of `target`. Throws EmptyMask.
ad::Var loss(LossKind kind, const ad::Var& pred, const Matrix& target, const Vector& mask);

/// Effective stable-layer weight W - W^T - gamma I.
Matrix stable_update_matrix(const Matrix& w, double gamma);

}  // namespace bes
