#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "bes/models.hpp"
#include "bes/tasks.hpp"

namespace bes {

struct SuiteCheck {
  std::string name;
  bool passed = false;
  /// false: reported only, never fails the suite.
  bool asserted = true;
  double value = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct SuiteReport {
  std::string suite;
  std::vector<SuiteCheck> checks;
  double seconds = 0.0;

  bool passed() const;
  nlohmann::json to_json() const;
};

struct VerifyOptions {
  std::uint64_t seed = 0;
  /// algebra: number of random graphs.
  std::size_t graphs = 100;
  /// lemma: number of random (graph, potential, signal) samples.
  std::size_t samples = 200;
  /// corollaries: star sizes.
  std::vector<std::size_t> star_sizes{5, 6, 10, 50};
  /// gradcheck: number of random parameter points.
  std::size_t points = 20;
};

/// Suites: algebra, lemma, corollaries, gradcheck, stability. Throws ConfigInvalid for other names.
SuiteReport run_suite(const std::string& name, const VerifyOptions& opts = {});
const std::vector<std::string>& suite_names();

// Building blocks shared with the acceptance harness.

/// Largest over layers of the hidden-state norm relative to the encoder output, plus the
/// per-layer growth factors and the a-priori bound 1 + eps * sum_k ||M_k||_2.
struct NormTrace {
  std::vector<double> norms;  // after encoder, then after each layer
  double max_ratio = 0.0;
  double final_ratio = 0.0;
  bool finite = true;
  double max_step_growth = 0.0;
  double step_bound = 0.0;
};

struct StabilityContrast {
  NormTrace stable;
  /// Plain residual ChebNet X + sum_k T_k X W_k (raw weights, unit step).
  NormTrace unstabilized;
  /// Raw weights at the stable run's step size.
  NormTrace raw_small_step;
};

/// 64-layer K=20 residual runs on one barbell instance (N = 50) from the same initial weights:
/// W_k - W_k^T - gamma I with eps 0.1, gamma 0.05, against raw W_k.
StabilityContrast stability_contrast(std::uint64_t seed, std::size_t layers = 64, std::size_t K = 20);

/// Largest |real part| over eigenvalues of W - W^T for a random square W.
double antisymmetric_real_part(std::size_t dim, std::uint64_t seed);

struct GradcheckPoint {
  double max_rel_error = 0.0;
  std::size_t entries = 0;
  std::string worst;
  std::size_t nodes = 0;
};

/// End-to-end gradcheck of a small mu-ChebNet on a random connected 8-16 node instance.
/// lambda_max is frozen at the starting point and tanh replaces ReLU (finite differences
/// across ReLU kinks are not meaningful).
GradcheckPoint model_gradcheck_point(std::uint64_t seed, OperatorKind op = OperatorKind::SymNormalized,
                                     bool stable = false);

}  // namespace bes
