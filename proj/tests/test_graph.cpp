#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "bes/error.hpp"
#include "bes/graph.hpp"

using namespace bes;

namespace {

Graph random_graph(std::mt19937_64& rng, std::size_t n, double p) {
  std::bernoulli_distribution coin(p);
  std::vector<std::pair<std::size_t, std::size_t>> e;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (coin(rng)) e.emplace_back(i, j);
  return Graph::from_edges(n, e);
}

Vector random_vector(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> z;
  Vector v(n);
  for (auto& x : v) x = z(rng);
  return v;
}

// Dense L built straight from the edge list.
Matrix reference_laplacian(const Graph& g) {
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  Matrix l = Matrix::Zero(n, n);
  for (const Edge& e : g.edges()) {
    const auto u = static_cast<Eigen::Index>(e.u), v = static_cast<Eigen::Index>(e.v);
    l(u, u) += 1;
    l(v, v) += 1;
    l(u, v) -= 1;
    l(v, u) -= 1;
  }
  return l;
}

}  // namespace

TEST(Graph, SmallestGraph) {
  const Graph g = Graph::from_edges(2, {{0, 1}});
  EXPECT_EQ(g.num_nodes(), 2u);
  EXPECT_EQ(g.num_edges(), 1u);
}

TEST(Graph, FourRingHasDegreeTwo) {
  const Graph g = Graph::from_edges(4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}});
  ASSERT_EQ(g.num_edges(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(g.degree(i), 2u);
  EXPECT_EQ(g, ring_graph(4));
}

TEST(Graph, DeduplicatesBothOrientations) {
  const Graph g = Graph::from_edges(3, {{0, 1}, {1, 0}, {0, 1}});
  EXPECT_EQ(g.num_edges(), 1u);
  EXPECT_EQ(g.edges()[0], (Edge{0, 1}));
}

TEST(Graph, RejectsSelfLoopAndOutOfRange) {
  try {
    Graph::from_edges(3, {{1, 1}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SelfLoop);
  }
  try {
    Graph::from_edges(3, {{0, 3}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IndexOutOfRange);
  }
}

TEST(Graph, StructuralInvariants) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 30; ++t) {
    const Graph g = random_graph(rng, 1 + t, 0.3);
    EXPECT_EQ(2 * g.num_edges(), g.adjacency_nnz());
    for (std::size_t i = 0; i < g.num_nodes(); ++i) {
      const auto nb = g.neighbors(i);
      EXPECT_TRUE(std::is_sorted(nb.begin(), nb.end()));
      for (std::size_t k = 0; k < nb.size(); ++k) {
        EXPECT_NE(nb[k], i);
        const auto back = g.neighbors(nb[k]);
        EXPECT_TRUE(std::binary_search(back.begin(), back.end(), i));
        const Edge& e = g.edges()[g.incident_edges(i)[k]];
        EXPECT_EQ(std::min(i, nb[k]), e.u);
        EXPECT_EQ(std::max(i, nb[k]), e.v);
      }
    }
    for (const Edge& e : g.edges()) EXPECT_LT(e.u, e.v);
  }
}

TEST(Graph, DegreeMatrix) {
  EXPECT_EQ(Vector(degree_matrix(ring_graph(4)).diagonal_values()), Vector::Constant(4, 2.0));
  Vector star(6);
  star << 5, 1, 1, 1, 1, 1;
  EXPECT_EQ(Vector(degree_matrix(star_graph(6)).diagonal_values()), star);
  EXPECT_EQ(Vector(degree_matrix(path_graph(2)).diagonal_values()), Vector::Constant(2, 1.0));
}

TEST(Graph, GradientExamples) {
  const Graph ring = ring_graph(4);
  EXPECT_EQ(grad(ring, Vector::Constant(4, 3.5)), Vector::Zero(4));

  Vector f(2);
  f << 0, 1;
  EXPECT_EQ(grad(path_graph(2), f), Vector::Constant(1, 1.0));

  // Canonical edges of the 4-ring in order: (0,1) (0,3) (1,2) (2,3).
  Vector g4(4);
  g4 << 0, 1, 2, 3;
  Vector expected(4);
  expected << 1, 3, 1, 1;
  ASSERT_EQ(ring.edges()[1], (Edge{0, 3}));
  EXPECT_EQ(grad(ring, g4), expected);
}

TEST(Graph, LengthMismatch) {
  const Graph g = ring_graph(4);
  EXPECT_THROW(grad(g, Vector::Zero(3)), Error);
  EXPECT_THROW(divergence(g, Vector::Zero(3)), Error);
  EXPECT_THROW(dirichlet_form(g, Vector::Zero(4), Vector::Zero(5)), Error);
}

TEST(Graph, DivergenceOfGradientIsMinusTwoL) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 20; ++t) {
    const Graph g = random_graph(rng, 2 + t, 0.4);
    const Vector f = random_vector(rng, static_cast<Eigen::Index>(g.num_nodes()));
    const Vector lf = reference_laplacian(g) * f;
    const Vector div = divergence(g, grad(g, f));
    EXPECT_LE((div + 2.0 * lf).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, lf.cwiseAbs().maxCoeff()));
  }
  EXPECT_EQ(divergence(ring_graph(5), Vector::Zero(5)), Vector::Zero(5));
}

TEST(Graph, AdjointIdentity) {
  std::mt19937_64 rng(5);
  const Graph edge = path_graph(2);
  const Vector F = Vector::Constant(1, 1.0);
  const Vector f = random_vector(rng, 2);
  EXPECT_NEAR(grad(edge, f).dot(F), f.dot(adjoint_grad(edge, F)), 1e-15);

  for (int t = 0; t < 50; ++t) {
    std::uniform_int_distribution<std::size_t> size(2, 30);
    const Graph g = random_graph(rng, size(rng), 0.3);
    const Vector x = random_vector(rng, static_cast<Eigen::Index>(g.num_nodes()));
    const Vector y = random_vector(rng, static_cast<Eigen::Index>(g.num_edges()));
    const double lhs = grad(g, x).dot(y);
    const double rhs = x.dot(adjoint_grad(g, y));
    const double ymax = y.size() ? y.cwiseAbs().maxCoeff() : 0.0;
    const double scale = std::max(1.0, x.cwiseAbs().sum() * ymax);
    EXPECT_LE(std::abs(lhs - rhs), 1e-12 * scale);
  }
}

TEST(Graph, LaplacianMatchesReferenceAndHasZeroRowSums) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 25; ++t) {
    const Graph g = random_graph(rng, 1 + t, 0.35);
    const Matrix l = laplacian(g).dense();
    EXPECT_EQ(l, reference_laplacian(g));
    EXPECT_EQ(l.rowwise().sum(), Vector::Zero(l.rows()));
    // Columnwise adjoint_grad(grad(e_i)) reproduces L.
    for (Eigen::Index i = 0; i < l.rows(); ++i) {
      const Vector e = Vector::Unit(l.rows(), i);
      EXPECT_EQ(adjoint_grad(g, grad(g, e)), l.col(i));
    }
  }
}

TEST(Graph, ComponentsAndKernel) {
  const Graph two = Graph::from_edges(5, {{0, 1}, {2, 3}, {3, 4}});
  EXPECT_EQ(two.num_components(), 2u);
  EXPECT_FALSE(two.is_connected());
  const Matrix l = laplacian(two).dense();
  Eigen::FullPivLU<Matrix> lu(l);
  EXPECT_EQ(lu.dimensionOfKernel(), 2);
}

TEST(Graph, DirichletForm) {
  const Graph g = path_graph(2);
  Vector f(2);
  f << 0, 1;
  EXPECT_EQ(dirichlet_form(g, f, f), 0.5);
  EXPECT_EQ(dirichlet_form(ring_graph(6), Vector::Constant(6, 2.0), Vector::Constant(6, 2.0)), 0.0);

  std::mt19937_64 rng(13);
  for (int t = 0; t < 20; ++t) {
    const Graph r = random_graph(rng, 3 + t, 0.4);
    const auto n = static_cast<Eigen::Index>(r.num_nodes());
    const Vector a = random_vector(rng, n), b = random_vector(rng, n);
    const double ref = 0.5 * a.dot(reference_laplacian(r) * b);
    EXPECT_NEAR(dirichlet_form(r, a, b), ref, 1e-12 * std::max(1.0, std::abs(ref)));
    EXPECT_NEAR(dirichlet_form(r, a, b), dirichlet_form(r, b, a), 1e-12 * std::max(1.0, std::abs(ref)));
    double sum = 0.0;
    for (const Edge& e : r.edges()) sum += std::pow(a[static_cast<Eigen::Index>(e.u)] - a[static_cast<Eigen::Index>(e.v)], 2);
    EXPECT_NEAR(dirichlet_form(r, a, a), 0.5 * sum, 1e-12 * std::max(1.0, sum));
    EXPECT_GE(dirichlet_form(r, a, a), 0.0);
  }
}

TEST(Graph, ShuffledInputGivesIdenticalLaplacian) {
  std::mt19937_64 rng(21);
  const Graph g = random_graph(rng, 20, 0.3);
  auto pairs = g.edge_pairs();
  for (auto& p : pairs)
    if (rng() & 1) std::swap(p.first, p.second);
  std::shuffle(pairs.begin(), pairs.end(), rng);
  const Graph h = Graph::from_edges(20, pairs);
  EXPECT_EQ(h, g);
  EXPECT_EQ(laplacian(h).dense(), laplacian(g).dense());
}

TEST(Graph, DisjointUnionAndPermute) {
  const std::vector<Graph> parts{ring_graph(4), path_graph(3)};
  const Graph u = disjoint_union(parts);
  EXPECT_EQ(u.num_nodes(), 7u);
  EXPECT_EQ(u.num_edges(), 6u);
  EXPECT_EQ(u.num_components(), 2u);

  const std::vector<std::size_t> perm{2, 0, 3, 1};
  const Graph p = permute(path_graph(4), perm);
  // path 0-1-2-3 relabeled: 2-0-3-1
  EXPECT_EQ(p, Graph::from_edges(4, {{2, 0}, {0, 3}, {3, 1}}));
}
