#include <algorithm>
#include <filesystem>
#include <limits>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "bes/error.hpp"
#include "bes/tasks.hpp"
#include "test_util.hpp"

using namespace bes;
using namespace bes::testing;

namespace {

// All-pairs hop distances by Floyd-Warshall on doubles, independent of the BFS code.
Matrix floyd_warshall(const Graph& g) {
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  const double inf = std::numeric_limits<double>::infinity();
  Matrix d = Matrix::Constant(n, n, inf);
  for (Eigen::Index i = 0; i < n; ++i) d(i, i) = 0;
  for (const Edge& e : g.edges()) d(static_cast<Eigen::Index>(e.u), static_cast<Eigen::Index>(e.v)) = d(static_cast<Eigen::Index>(e.v), static_cast<Eigen::Index>(e.u)) = 1;
  for (Eigen::Index k = 0; k < n; ++k)
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) d(i, j) = std::min(d(i, j), d(i, k) + d(k, j));
  return d;
}

bool same_instance(const TaskInstance& a, const TaskInstance& b) {
  return a.graph == b.graph && a.x == b.x && a.y == b.y && a.mask == b.mask && a.graph_level == b.graph_level;
}

void expect_code(ErrorCode code, auto&& fn) {
  try {
    fn();
    ADD_FAILURE() << "expected " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

}  // namespace

TEST(Barbell, SmallestStructure) {
  const Graph g = barbell_graph(2, 1);
  EXPECT_EQ(g.num_nodes(), 5u);
  EXPECT_EQ(g.num_edges(), 4u);  // one edge per clique plus two bridge edges
  const std::vector<std::size_t> deg{1, 2, 2, 2, 1};
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(g.degree(i), deg[i]) << i;
  EXPECT_TRUE(g.is_connected());
}

TEST(Barbell, CliquesAndBridge) {
  const std::size_t n = 6, k = 4;
  const Graph g = barbell_graph(n, k);
  EXPECT_EQ(g.num_nodes(), 2 * n + k);
  EXPECT_EQ(g.num_edges(), n * (n - 1) + k + 1);
  const Matrix d = floyd_warshall(g);
  EXPECT_EQ(d(0, 2 * n + k - 1), 1 + (k + 1) + 1);
  EXPECT_EQ(barbell_clique_size(50), 23u);
  EXPECT_EQ(barbell_clique_size(70), 33u);
  expect_code(ErrorCode::BadSize, [] { barbell_clique_size(51); });
  expect_code(ErrorCode::BadSize, [] { gen_barbell(1, 4, 0); });
  expect_code(ErrorCode::BadSize, [] { gen_barbell(3, 0, 0); });
}

TEST(Barbell, ConstantFeaturesGiveConstantTargets) {
  const TaskInstance inst = barbell_from_features(5, 3, Vector::Constant(13, 2.5));
  for (Eigen::Index i = 0; i < 13; ++i) {
    if (inst.mask[i] > 0) EXPECT_DOUBLE_EQ(inst.y(i, 0), 2.5);
  }
  EXPECT_EQ(inst.mask.sum(), 10.0);
}

TEST(Barbell, TargetIsOppositeBellMean) {
  std::mt19937_64 rng(1);
  const std::size_t n = 7, k = 2;
  const Vector f = random_vector(rng, 2 * n + k);
  const TaskInstance inst = barbell_from_features(n, k, f);
  const double left = f.head(n).mean(), right = f.tail(n).mean();
  for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(inst.y(static_cast<Eigen::Index>(i), 0), right, 1e-15);
  for (std::size_t i = n + k; i < 2 * n + k; ++i) EXPECT_NEAR(inst.y(static_cast<Eigen::Index>(i), 0), left, 1e-15);
  for (std::size_t i = n; i < n + k; ++i) EXPECT_EQ(inst.mask[static_cast<Eigen::Index>(i)], 0.0);
}

TEST(Barbell, SwappingBellsSwapsTargets) {
  std::mt19937_64 rng(2);
  const std::size_t n = 5, k = 3;
  const Vector f = random_vector(rng, 2 * n + k);
  Vector swapped = f;
  swapped.head(n) = f.tail(n);
  swapped.tail(n) = f.head(n);
  const TaskInstance a = barbell_from_features(n, k, f), b = barbell_from_features(n, k, swapped);
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_EQ(a.y(static_cast<Eigen::Index>(i), 0), b.y(static_cast<Eigen::Index>(n + k + i), 0));
    EXPECT_EQ(a.y(static_cast<Eigen::Index>(n + k + i), 0), b.y(static_cast<Eigen::Index>(i), 0));
  }
}

TEST(Barbell, FeatureModesRecordedAndSeeded) {
  const TaskInstance a = gen_barbell(23, 4, 5), b = gen_barbell(23, 4, 5), c = gen_barbell(23, 4, 6);
  EXPECT_TRUE(same_instance(a, b));
  EXPECT_FALSE(a.x == c.x);
  EXPECT_EQ(a.meta.at("features").at("kind"), "bell_offset");
  EXPECT_EQ(gen_barbell(4, 2, 1, {BarbellFeatures::Iid}).meta.at("features").at("kind"), "iid_normal");
  EXPECT_EQ(a.meta.at("roles").size(), 50u);
}

TEST(Properties, HandCountableExamples) {
  const TaskInstance p5 = property_instance(PropertyTask::Diameter, path_graph(5));
  EXPECT_TRUE(p5.graph_level);
  EXPECT_EQ(p5.y.rows(), 1);
  EXPECT_EQ(p5.y(0, 0), 4.0);

  const TaskInstance star = property_instance(PropertyTask::Eccentricity, star_graph(6));
  EXPECT_EQ(star.y.col(0), (Vector(6) << 1, 2, 2, 2, 2, 2).finished());

  const TaskInstance sssp = property_instance(PropertyTask::Sssp, path_graph(4), 1);
  EXPECT_EQ(sssp.y.col(0), (Vector(4) << 1, 0, 1, 2).finished());
  EXPECT_EQ(sssp.x.cols(), 3);
  EXPECT_EQ(sssp.x.col(2), (Vector(4) << 0, 1, 0, 0).finished());
  EXPECT_EQ(sssp.x.col(0), Vector::Ones(4));
  EXPECT_EQ(sssp.x.col(1), (Vector(4) << 1, 2, 2, 1).finished());
}

TEST(Properties, LabelsMatchFloydWarshall) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    std::mt19937_64 rng(s);
    Graph g = erdos_renyi(20, 0.3, rng);
    if (!g.is_connected()) continue;
    const Matrix d = floyd_warshall(g);
    const auto apd = all_pairs_distances(g);
    for (std::size_t i = 0; i < 20; ++i)
      for (std::size_t j = 0; j < 20; ++j) EXPECT_EQ(static_cast<double>(apd[i][j]), d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    EXPECT_EQ(property_instance(PropertyTask::Diameter, g).y(0, 0), d.maxCoeff());
    const TaskInstance ecc = property_instance(PropertyTask::Eccentricity, g);
    EXPECT_EQ(ecc.y.col(0), Vector(d.rowwise().maxCoeff()));
    const std::size_t src = s % 20;
    EXPECT_EQ(property_instance(PropertyTask::Sssp, g, src).y.col(0), Vector(d.row(static_cast<Eigen::Index>(src)).transpose()));
  }
}

TEST(Properties, GeneratedInstancesAreConnectedWithIntegerLabels) {
  for (PropertyTask task : {PropertyTask::Diameter, PropertyTask::Sssp, PropertyTask::Eccentricity})
    for (RandomGraphModel model : {RandomGraphModel::ErdosRenyi, RandomGraphModel::BarabasiAlbert}) {
      PropertyOptions o;
      o.task = task;
      o.model = model;
      for (std::uint64_t s = 0; s < 10; ++s) {
        const TaskInstance inst = gen_graph_property(o, s);
        EXPECT_TRUE(inst.graph.is_connected());
        EXPECT_GE(inst.graph.num_nodes(), o.n_min);
        EXPECT_LE(inst.graph.num_nodes(), o.n_max);
        EXPECT_EQ(inst.y, inst.y.array().round().matrix());
        EXPECT_TRUE(same_instance(inst, gen_graph_property(o, s)));
      }
    }
}

TEST(Properties, DisconnectedAfterRetries) {
  PropertyOptions o;
  o.p = 0.0;
  o.max_retries = 3;
  expect_code(ErrorCode::DisconnectedAfterRetries, [&] { gen_graph_property(o, 0); });
  const std::vector<std::pair<std::size_t, std::size_t>> e{{0, 1}};
  expect_code(ErrorCode::DisconnectedAfterRetries, [&] { property_instance(PropertyTask::Sssp, Graph::from_edges(3, e)); });
}

TEST(Properties, BarabasiAlbertDegrees) {
  std::mt19937_64 rng(3);
  const Graph g = barabasi_albert(30, 2, rng);
  EXPECT_EQ(g.num_nodes(), 30u);
  EXPECT_EQ(g.num_edges(), 2u + 2u * (30 - 3));
  EXPECT_TRUE(g.is_connected());
}

TEST(RingRouting, Construction) {
  bool found = false;
  for (std::uint64_t s = 0; s < 200 && !found; ++s) {
    const TaskInstance inst = gen_ring_routing(8, s);
    if (inst.meta.at("label") != 3) continue;
    found = true;
    const auto q = inst.meta.at("query").get<std::size_t>(), a = inst.meta.at("answer").get<std::size_t>();
    EXPECT_EQ(a, (q + 4) % 8);
    EXPECT_EQ(inst.x.row(static_cast<Eigen::Index>(a)), Eigen::RowVectorXd::Unit(10, 3));
    const auto clean = inst.meta.at("clean_path").get<std::vector<std::size_t>>();
    const auto noisy = inst.meta.at("noisy_path").get<std::vector<std::size_t>>();
    EXPECT_EQ(clean.size(), 3u);
    EXPECT_EQ(noisy.size(), 3u);
    for (std::size_t i : clean) EXPECT_EQ(inst.x.row(static_cast<Eigen::Index>(i)).cwiseAbs().maxCoeff(), 0.0);
    for (std::size_t i : noisy) EXPECT_GT(inst.x.row(static_cast<Eigen::Index>(i)).cwiseAbs().maxCoeff(), 0.0);
    std::set<std::size_t> all(clean.begin(), clean.end());
    all.insert(noisy.begin(), noisy.end());
    all.insert(q);
    all.insert(a);
    EXPECT_EQ(all.size(), 8u);
    EXPECT_EQ(inst.mask.sum(), 1.0);
    EXPECT_EQ(inst.mask[static_cast<Eigen::Index>(q)], 1.0);
    EXPECT_EQ(inst.y(static_cast<Eigen::Index>(q), 0), 3.0);
    EXPECT_EQ(inst.x.row(static_cast<Eigen::Index>(q)).cwiseAbs().maxCoeff(), 0.0);
  }
  EXPECT_TRUE(found);
}

TEST(RingRouting, ZeroNoiseIsSymmetric) {
  const TaskInstance inst = gen_ring_routing(12, 4, {10, 0.0});
  const auto q = static_cast<Eigen::Index>(inst.meta.at("query").get<std::size_t>());
  for (Eigen::Index d = 1; d < 6; ++d) EXPECT_EQ(inst.x.row((q + d) % 12), inst.x.row((q - d + 12) % 12));
  EXPECT_EQ(inst.x.cwiseAbs().sum(), 1.0);
}

TEST(RingRouting, BadSizes) {
  expect_code(ErrorCode::BadSize, [] { gen_ring_routing(6, 0); });
  expect_code(ErrorCode::BadSize, [] { gen_ring_routing(9, 0); });
  EXPECT_TRUE(same_instance(gen_ring_routing(16, 9), gen_ring_routing(16, 9)));
}

TEST(Diagnosis, Bands) {
  EXPECT_EQ(oracle_mse_interpretation(0.03), Diagnosis::Ok);
  EXPECT_EQ(oracle_mse_interpretation(1.08), Diagnosis::Oversquashing);
  EXPECT_EQ(oracle_mse_interpretation(30), Diagnosis::Oversmoothing);
  EXPECT_EQ(oracle_mse_interpretation(0.5), Diagnosis::Oversquashing);
  EXPECT_EQ(oracle_mse_interpretation(5), Diagnosis::Oversmoothing);
}

TEST(Seeds, DerivedStreamsDiffer) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t b = 0; b < 10; ++b)
    for (std::uint64_t i = 0; i < 10; ++i) seen.insert(derive_seed(b, i));
  EXPECT_EQ(seen.size(), 100u);
  EXPECT_EQ(derive_seed(3, 4), derive_seed(3, 4));
}

TEST(Persistence, InstanceAndDatasetRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "bes_tasks_test";
  std::filesystem::remove_all(dir);
  PropertyOptions o;
  o.task = PropertyTask::Diameter;
  const std::vector<TaskInstance> data{gen_barbell(5, 2, 1), gen_ring_routing(10, 2), gen_graph_property(o, 3)};
  save_dataset(dir, "train", data);
  const auto loaded = load_dataset(dir, "train");
  ASSERT_EQ(loaded.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_TRUE(same_instance(loaded[i], data[i])) << i;
    EXPECT_EQ(loaded[i].meta.at("task"), data[i].meta.at("task"));
  }
  expect_code(ErrorCode::DatasetMissing, [&] { load_dataset(dir, "test"); });
  std::filesystem::remove_all(dir);
}
