#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "bes/graph.hpp"
#include "bes/types.hpp"

namespace bes {

/// One supervised example. Node-level tasks have y with one row per node; graph-level
/// tasks have a single row and a single-entry mask.
struct TaskInstance {
  Graph graph;
  Matrix x;
  Matrix y;
  Vector mask;
  nlohmann::json meta;
  bool graph_level = false;
};

/// Independent child seed for stream `index` of `base` (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

// ---- barbell -------------------------------------------------------------------

/// Two cliques K_n joined through k bridge nodes (k + 1 bridge edges). Nodes 0..n-1 form
/// the left bell, n..n+k-1 the bridge (left to right), n+k..2n+k-1 the right bell. The
/// first clique touches the bridge at node n-1, the second at node n+k.
Graph barbell_graph(std::size_t n_clique, std::size_t k_path);

/// Reads total size N as two equal cliques plus a bridge of k nodes: n = (N - k) / 2.
/// Throws BadSize when the split is not integral or n < 2.
std::size_t barbell_clique_size(std::size_t total, std::size_t k_path = 4);

enum class BarbellFeatures {
  /// x_i ~ N(0, 1) independently.
  Iid,
  /// Each bell b draws s_b ~ N(0, offset_std^2); bell nodes get s_b + N(0, noise_std^2),
  /// bridge nodes N(0, noise_std^2).
  BellOffset,
};

struct BarbellOptions {
  BarbellFeatures features = BarbellFeatures::BellOffset;
  double offset_std = 1.0;
  double noise_std = 1.0;
};

/// Target per bell node is the mean feature of the opposite bell; bridge nodes are unsupervised.
/// Throws BadSize for n_clique < 2 or k_path < 1.
TaskInstance gen_barbell(std::size_t n_clique, std::size_t k_path, std::uint64_t seed,
                         const BarbellOptions& opts = {});
/// Same labelling for caller-supplied scalar features (length 2n + k).
TaskInstance barbell_from_features(std::size_t n_clique, std::size_t k_path, const Vector& features);

// ---- graph properties ------------------------------------------------------------

enum class PropertyTask { Diameter, Sssp, Eccentricity };
enum class RandomGraphModel { ErdosRenyi, BarabasiAlbert };

std::string to_string(PropertyTask t);
PropertyTask property_task_from_string(const std::string& s);

Graph erdos_renyi(std::size_t n, double p, std::mt19937_64& rng);
/// Starts from a star on m + 1 nodes; each new node attaches to m distinct targets drawn
/// proportionally to degree.
Graph barabasi_albert(std::size_t n, std::size_t m, std::mt19937_64& rng);

/// Hop distances from `source`; -1 for unreachable nodes.
std::vector<long> bfs_distances(const Graph& g, std::size_t source);
/// Row-major n x n hop distances.
std::vector<std::vector<long>> all_pairs_distances(const Graph& g);

struct PropertyOptions {
  PropertyTask task = PropertyTask::Sssp;
  std::size_t n_min = 15;
  std::size_t n_max = 25;
  RandomGraphModel model = RandomGraphModel::ErdosRenyi;
  double p = 0.2;
  std::size_t m = 2;
  std::size_t max_retries = 100;
};

/// Labels for a given connected graph. Features are (1, degree) plus a source indicator for
/// SSSP. Throws DisconnectedAfterRetries when g is disconnected, IndexOutOfRange for a bad source.
TaskInstance property_instance(PropertyTask task, const Graph& g, std::size_t source = 0);
/// Throws DisconnectedAfterRetries, BadSize.
TaskInstance gen_graph_property(const PropertyOptions& opts, std::uint64_t seed);

// ---- ring routing --------------------------------------------------------------

struct RingRoutingOptions {
  std::size_t num_classes = 10;
  double noise_std = 1.0;
};

/// Ring C_n with query q and answer q + n/2. The answer row is a one-hot class; one of the
/// two arcs between them is zero, the other i.i.d. noise; the query row is zero. meta lists
/// query, answer, label and the clean/noisy intermediate nodes. Throws BadSize.
TaskInstance gen_ring_routing(std::size_t n, std::uint64_t seed, const RingRoutingOptions& opts = {});

// ---- diagnostics and persistence -----------------------------------------------

enum class Diagnosis { Ok, Oversquashing, Oversmoothing };
std::string to_string(Diagnosis d);
/// < 0.5 ok, [0.5, 5) oversquashing, >= 5 oversmoothing.
Diagnosis oracle_mse_interpretation(double mse);

/// Writes graph.edges, x.csv, y.csv, mask.csv and meta.json into `dir`.
void save_instance(const std::filesystem::path& dir, const TaskInstance& inst);
/// Throws DatasetMissing, ParseError, ShapeMismatch.
TaskInstance load_instance(const std::filesystem::path& dir);

/// Instances go to dir/<split>/<00000..>/.
void save_dataset(const std::filesystem::path& dir, const std::string& split, const std::vector<TaskInstance>& data);
/// Throws DatasetMissing when the split directory is absent or empty.
std::vector<TaskInstance> load_dataset(const std::filesystem::path& dir, const std::string& split);

}  // namespace bes
