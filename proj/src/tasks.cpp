#include "bes/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <cstdio>

#include "bes/error.hpp"
#include "bes/io.hpp"

namespace bes {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// ---- barbell -------------------------------------------------------------------

Graph barbell_graph(std::size_t n_clique, std::size_t k_path) {
  if (n_clique < 2 || k_path < 1) throw Error(ErrorCode::BadSize, "barbell needs n_clique >= 2 and k_path >= 1");
  const std::size_t right = n_clique + k_path;
  std::vector<std::pair<std::size_t, std::size_t>> e;
  for (std::size_t i = 0; i < n_clique; ++i)
    for (std::size_t j = i + 1; j < n_clique; ++j) {
      e.emplace_back(i, j);
      e.emplace_back(right + i, right + j);
    }
  for (std::size_t i = n_clique - 1; i < right; ++i) e.emplace_back(i, i + 1);
  return Graph::from_edges(2 * n_clique + k_path, e);
}

std::size_t barbell_clique_size(std::size_t total, std::size_t k_path) {
  if (total <= k_path || (total - k_path) % 2 != 0 || (total - k_path) / 2 < 2) {
    throw Error(ErrorCode::BadSize, "total size " + std::to_string(total) +
                                                " does not split into two cliques around " +
                                                std::to_string(k_path) + " bridge nodes");
  }
  return (total - k_path) / 2;
}

TaskInstance barbell_from_features(std::size_t n_clique, std::size_t k_path, const Vector& features) {
  TaskInstance inst;
  inst.graph = barbell_graph(n_clique, k_path);
  const auto n = static_cast<Eigen::Index>(inst.graph.num_nodes());
  if (features.size() != n) throw Error(ErrorCode::ShapeMismatch, "barbell features must have one entry per node");
  const auto nc = static_cast<Eigen::Index>(n_clique);
  const auto right = nc + static_cast<Eigen::Index>(k_path);
  const double left_mean = features.head(nc).mean();
  const double right_mean = features.segment(right, nc).mean();

  inst.x = features;
  inst.y = Matrix::Zero(n, 1);
  inst.mask = Vector::Zero(n);
  for (Eigen::Index i = 0; i < nc; ++i) {
    inst.y(i, 0) = right_mean;
    inst.y(right + i, 0) = left_mean;
    inst.mask[i] = 1.0;
    inst.mask[right + i] = 1.0;
  }
  std::vector<std::string> roles(static_cast<std::size_t>(n), "bridge");
  for (Eigen::Index i = 0; i < nc; ++i) {
    roles[static_cast<std::size_t>(i)] = "left_bell";
    roles[static_cast<std::size_t>(right + i)] = "right_bell";
  }
  inst.meta = {{"task", "barbell"}, {"n_clique", n_clique}, {"k_path", k_path}, {"num_nodes", n},
               {"supervision", "bell nodes"}, {"roles", roles}};
  return inst;
}

TaskInstance gen_barbell(std::size_t n_clique, std::size_t k_path, std::uint64_t seed, const BarbellOptions& opts) {
  if (n_clique < 2 || k_path < 1) throw Error(ErrorCode::BadSize, "barbell needs n_clique >= 2 and k_path >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto n = static_cast<Eigen::Index>(2 * n_clique + k_path);
  const auto nc = static_cast<Eigen::Index>(n_clique);
  const auto right = nc + static_cast<Eigen::Index>(k_path);
  Vector x(n);
  if (opts.features == BarbellFeatures::Iid) {
    for (Eigen::Index i = 0; i < n; ++i) x[i] = normal(rng);
  } else {
    const double s_left = opts.offset_std * normal(rng);
    const double s_right = opts.offset_std * normal(rng);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double base = i < nc ? s_left : (i >= right ? s_right : 0.0);
      x[i] = base + opts.noise_std * normal(rng);
    }
  }
  TaskInstance inst = barbell_from_features(n_clique, k_path, x);
  inst.meta["seed"] = seed;
  if (opts.features == BarbellFeatures::Iid) {
    inst.meta["features"] = {{"kind", "iid_normal"}};
  } else {
    inst.meta["features"] = {{"kind", "bell_offset"}, {"offset_std", opts.offset_std}, {"noise_std", opts.noise_std}};
  }
  return inst;
}

// ---- graph properties ------------------------------------------------------------

std::string to_string(PropertyTask t) {
  switch (t) {
    case PropertyTask::Diameter: return "diameter";
    case PropertyTask::Sssp: return "sssp";
    case PropertyTask::Eccentricity: return "eccentricity";
  }
  return "sssp";
}

PropertyTask property_task_from_string(const std::string& s) {
  if (s == "diameter") return PropertyTask::Diameter;
  if (s == "sssp") return PropertyTask::Sssp;
  if (s == "eccentricity") return PropertyTask::Eccentricity;
  throw Error(ErrorCode::ConfigInvalid, "unknown property task '" + s + "'");
}

Graph erdos_renyi(std::size_t n, double p, std::mt19937_64& rng) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::ConfigInvalid, "edge probability must lie in [0, 1]");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::pair<std::size_t, std::size_t>> e;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (u(rng) < p) e.emplace_back(i, j);
  return Graph::from_edges(n, e);
}

Graph barabasi_albert(std::size_t n, std::size_t m, std::mt19937_64& rng) {
  if (m < 1 || n < m + 1) throw Error(ErrorCode::BadSize, "barabasi-albert needs m >= 1 and n >= m + 1");
  std::vector<std::pair<std::size_t, std::size_t>> e;
  std::vector<std::size_t> ends;  // every edge endpoint, so sampling is degree-proportional
  for (std::size_t i = 1; i <= m; ++i) {
    e.emplace_back(0, i);
    ends.push_back(0);
    ends.push_back(i);
  }
  for (std::size_t v = m + 1; v < n; ++v) {
    std::vector<std::size_t> targets;
    while (targets.size() < m) {
      std::uniform_int_distribution<std::size_t> pick(0, ends.size() - 1);
      const std::size_t t = ends[pick(rng)];
      if (std::find(targets.begin(), targets.end(), t) == targets.end()) targets.push_back(t);
    }
    for (std::size_t t : targets) {
      e.emplace_back(t, v);
      ends.push_back(t);
      ends.push_back(v);
    }
  }
  return Graph::from_edges(n, e);
}

std::vector<long> bfs_distances(const Graph& g, std::size_t source) {
  if (source >= g.num_nodes()) throw Error(ErrorCode::IndexOutOfRange, "bfs source");
  std::vector<long> dist(g.num_nodes(), -1);
  std::deque<std::size_t> queue{source};
  dist[source] = 0;
  while (!queue.empty()) {
    const std::size_t u = queue.front();
    queue.pop_front();
    for (std::size_t v : g.neighbors(u)) {
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        queue.push_back(v);
      }
    }
  }
  return dist;
}

std::vector<std::vector<long>> all_pairs_distances(const Graph& g) {
  std::vector<std::vector<long>> d;
  d.reserve(g.num_nodes());
  for (std::size_t s = 0; s < g.num_nodes(); ++s) d.push_back(bfs_distances(g, s));
  return d;
}

TaskInstance property_instance(PropertyTask task, const Graph& g, std::size_t source) {
  if (!g.is_connected() || g.num_nodes() == 0) {
    throw Error(ErrorCode::DisconnectedAfterRetries, "property labels need a connected graph");
  }
  if (source >= g.num_nodes()) throw Error(ErrorCode::IndexOutOfRange, "source node");
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  TaskInstance inst;
  inst.graph = g;
  inst.x.resize(n, task == PropertyTask::Sssp ? 3 : 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    inst.x(i, 0) = 1.0;
    inst.x(i, 1) = static_cast<double>(g.degree(static_cast<std::size_t>(i)));
    if (task == PropertyTask::Sssp) inst.x(i, 2) = static_cast<std::size_t>(i) == source ? 1.0 : 0.0;
  }
  inst.meta = {{"task", to_string(task)}, {"num_nodes", n}, {"num_edges", g.num_edges()}};

  if (task == PropertyTask::Sssp) {
    const auto d = bfs_distances(g, source);
    inst.y.resize(n, 1);
    for (Eigen::Index i = 0; i < n; ++i) inst.y(i, 0) = static_cast<double>(d[static_cast<std::size_t>(i)]);
    inst.mask = Vector::Ones(n);
    inst.meta["source"] = source;
    return inst;
  }
  const auto d = all_pairs_distances(g);
  Vector ecc(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = d[static_cast<std::size_t>(i)];
    ecc[i] = static_cast<double>(*std::max_element(row.begin(), row.end()));
  }
  if (task == PropertyTask::Eccentricity) {
    inst.y = ecc;
    inst.mask = Vector::Ones(n);
  } else {
    inst.y = Matrix::Constant(1, 1, ecc.maxCoeff());
    inst.mask = Vector::Ones(1);
    inst.graph_level = true;
  }
  return inst;
}

TaskInstance gen_graph_property(const PropertyOptions& opts, std::uint64_t seed) {
  if (opts.n_min < 2 || opts.n_max < opts.n_min) throw Error(ErrorCode::BadSize, "node range");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> size(opts.n_min, opts.n_max);
  const std::size_t n = size(rng);
  for (std::size_t attempt = 0; attempt <= opts.max_retries; ++attempt) {
    Graph g = opts.model == RandomGraphModel::ErdosRenyi ? erdos_renyi(n, opts.p, rng) : barabasi_albert(n, opts.m, rng);
    if (!g.is_connected()) continue;
    std::uniform_int_distribution<std::size_t> node(0, n - 1);
    const std::size_t source = opts.task == PropertyTask::Sssp ? node(rng) : 0;
    TaskInstance inst = property_instance(opts.task, g, source);
    inst.meta["seed"] = seed;
    inst.meta["attempts"] = attempt + 1;
    if (opts.model == RandomGraphModel::ErdosRenyi) {
      inst.meta["generator"] = {{"model", "erdos-renyi"}, {"p", opts.p}};
    } else {
      inst.meta["generator"] = {{"model", "barabasi-albert"}, {"m", opts.m}};
    }
    return inst;
  }
  throw Error(ErrorCode::DisconnectedAfterRetries,
              "no connected graph with n=" + std::to_string(n) + " after " +
                  std::to_string(opts.max_retries) + " retries");
}

// ---- ring routing --------------------------------------------------------------

TaskInstance gen_ring_routing(std::size_t n, std::uint64_t seed, const RingRoutingOptions& opts) {
  if (n < 8 || n % 2 != 0) throw Error(ErrorCode::BadSize, "ring routing needs an even ring size >= 8");
  if (opts.num_classes < 2) throw Error(ErrorCode::BadSize, "ring routing needs at least two classes");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_node(0, n - 1);
  std::uniform_int_distribution<std::size_t> pick_class(0, opts.num_classes - 1);
  std::bernoulli_distribution coin(0.5);
  std::normal_distribution<double> normal(0.0, 1.0);

  const std::size_t query = pick_node(rng);
  const std::size_t answer = (query + n / 2) % n;
  const std::size_t label = pick_class(rng);
  const bool forward_noisy = coin(rng);

  std::vector<std::size_t> forward, backward;  // intermediate nodes walking +1 / -1 from the query
  for (std::size_t s = 1; s < n / 2; ++s) {
    forward.push_back((query + s) % n);
    backward.push_back((query + n - s) % n);
  }
  const auto& noisy = forward_noisy ? forward : backward;
  const auto& clean = forward_noisy ? backward : forward;

  TaskInstance inst;
  inst.graph = ring_graph(n);
  const auto c = static_cast<Eigen::Index>(opts.num_classes);
  inst.x = Matrix::Zero(static_cast<Eigen::Index>(n), c);
  inst.x(static_cast<Eigen::Index>(answer), static_cast<Eigen::Index>(label)) = 1.0;
  for (std::size_t v : noisy)
    for (Eigen::Index j = 0; j < c; ++j) inst.x(static_cast<Eigen::Index>(v), j) = opts.noise_std * normal(rng);
  inst.y = Matrix::Zero(static_cast<Eigen::Index>(n), 1);
  inst.y(static_cast<Eigen::Index>(query), 0) = static_cast<double>(label);
  inst.mask = Vector::Zero(static_cast<Eigen::Index>(n));
  inst.mask[static_cast<Eigen::Index>(query)] = 1.0;
  inst.meta = {{"task", "ring_routing"}, {"num_nodes", n},      {"num_classes", opts.num_classes},
               {"seed", seed},           {"query", query},      {"answer", answer},
               {"label", label},         {"clean_path", clean}, {"noisy_path", noisy},
               {"noise_std", opts.noise_std}};
  return inst;
}

// ---- diagnostics and persistence -----------------------------------------------

std::string to_string(Diagnosis d) {
  switch (d) {
    case Diagnosis::Ok: return "ok";
    case Diagnosis::Oversquashing: return "oversquashing";
    case Diagnosis::Oversmoothing: return "oversmoothing";
  }
  return "ok";
}

Diagnosis oracle_mse_interpretation(double mse) {
  if (mse < 0.5) return Diagnosis::Ok;
  if (mse < 5.0) return Diagnosis::Oversquashing;
  return Diagnosis::Oversmoothing;
}

void save_instance(const std::filesystem::path& dir, const TaskInstance& inst) {
  std::filesystem::create_directories(dir);
  write_edge_list(dir / "graph.edges", inst.graph);
  write_csv(dir / "x.csv", inst.x);
  write_csv(dir / "y.csv", inst.y);
  write_csv(dir / "mask.csv", inst.mask);
  nlohmann::json meta = inst.meta;
  meta["graph_level"] = inst.graph_level;
  write_text(dir / "meta.json", meta.dump(2) + "\n");
}

TaskInstance load_instance(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::DatasetMissing, dir.string());
  TaskInstance inst;
  inst.graph = read_edge_list(dir / "graph.edges");
  inst.x = read_csv(dir / "x.csv");
  inst.y = read_csv(dir / "y.csv");
  const Matrix mask = read_csv(dir / "mask.csv");
  try {
    inst.meta = nlohmann::json::parse(read_text(dir / "meta.json"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, (dir / "meta.json").string() + ": " + e.what());
  }
  inst.graph_level = inst.meta.value("graph_level", false);
  inst.meta.erase("graph_level");
  const auto n = static_cast<Eigen::Index>(inst.graph.num_nodes());
  const Eigen::Index rows = inst.graph_level ? 1 : n;
  if (inst.x.rows() != n || inst.y.rows() != rows || mask.rows() != rows || mask.cols() != 1) {
    throw Error(ErrorCode::ShapeMismatch, dir.string() + ": file shapes disagree with the graph");
  }
  inst.mask = mask.col(0);
  return inst;
}

void save_dataset(const std::filesystem::path& dir, const std::string& split, const std::vector<TaskInstance>& data) {
  char name[24];
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::snprintf(name, sizeof name, "%05zu", i);
    save_instance(dir / split / name, data[i]);
  }
}

std::vector<TaskInstance> load_dataset(const std::filesystem::path& dir, const std::string& split) {
  const auto root = dir / split;
  if (!std::filesystem::is_directory(root)) throw Error(ErrorCode::DatasetMissing, root.string());
  std::vector<std::filesystem::path> dirs;
  for (const auto& entry : std::filesystem::directory_iterator(root))
    if (entry.is_directory()) dirs.push_back(entry.path());
  if (dirs.empty()) throw Error(ErrorCode::DatasetMissing, root.string() + " holds no instances");
  std::sort(dirs.begin(), dirs.end());
  std::vector<TaskInstance> out;
  out.reserve(dirs.size());
  for (const auto& d : dirs) out.push_back(load_instance(d));
  return out;
}

}  // namespace bes
