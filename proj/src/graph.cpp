#include "bes/graph.hpp"

#include <algorithm>
#include <numeric>
#include <queue>
#include <string>

#include "bes/error.hpp"

namespace bes {

Graph::Graph() : data_(std::make_shared<const Data>(Data{0, {}, {0}, {}, {}})) {}

Graph Graph::from_edges(std::size_t n, std::span<const std::pair<std::size_t, std::size_t>> edges) {
  std::vector<Edge> canon;
  canon.reserve(edges.size());
  for (const auto& [a, b] : edges) {
    if (a >= n || b >= n) {
      throw Error(ErrorCode::IndexOutOfRange,
                  "edge (" + std::to_string(a) + "," + std::to_string(b) + ") with n=" + std::to_string(n));
    }
    if (a == b) throw Error(ErrorCode::SelfLoop, "node " + std::to_string(a));
    canon.push_back(a < b ? Edge{a, b} : Edge{b, a});
  }
  std::sort(canon.begin(), canon.end(), [](const Edge& x, const Edge& y) {
    return x.u != y.u ? x.u < y.u : x.v < y.v;
  });
  canon.erase(std::unique(canon.begin(), canon.end()), canon.end());

  Data d;
  d.n = n;
  d.edges = std::move(canon);
  d.offsets.assign(n + 1, 0);
  for (const Edge& e : d.edges) {
    ++d.offsets[e.u + 1];
    ++d.offsets[e.v + 1];
  }
  std::partial_sum(d.offsets.begin(), d.offsets.end(), d.offsets.begin());
  d.targets.resize(2 * d.edges.size());
  d.edge_ids.resize(2 * d.edges.size());
  std::vector<std::size_t> cursor(d.offsets.begin(), d.offsets.end() - 1);
  for (std::size_t id = 0; id < d.edges.size(); ++id) {
    const Edge& e = d.edges[id];
    d.targets[cursor[e.u]] = e.v;
    d.edge_ids[cursor[e.u]++] = id;
    d.targets[cursor[e.v]] = e.u;
    d.edge_ids[cursor[e.v]++] = id;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t b = d.offsets[i], e = d.offsets[i + 1];
    std::vector<std::size_t> order(e - b);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return d.targets[b + x] < d.targets[b + y]; });
    std::vector<std::size_t> t(e - b), ids(e - b);
    for (std::size_t k = 0; k < order.size(); ++k) {
      t[k] = d.targets[b + order[k]];
      ids[k] = d.edge_ids[b + order[k]];
    }
    std::copy(t.begin(), t.end(), d.targets.begin() + static_cast<std::ptrdiff_t>(b));
    std::copy(ids.begin(), ids.end(), d.edge_ids.begin() + static_cast<std::ptrdiff_t>(b));
  }
  return Graph(std::make_shared<const Data>(std::move(d)));
}

std::span<const std::size_t> Graph::neighbors(std::size_t i) const {
  if (i >= data_->n) throw Error(ErrorCode::IndexOutOfRange, "node " + std::to_string(i));
  return std::span<const std::size_t>(data_->targets).subspan(data_->offsets[i], degree(i));
}

std::span<const std::size_t> Graph::incident_edges(std::size_t i) const {
  if (i >= data_->n) throw Error(ErrorCode::IndexOutOfRange, "node " + std::to_string(i));
  return std::span<const std::size_t>(data_->edge_ids).subspan(data_->offsets[i], degree(i));
}

std::vector<std::size_t> Graph::components() const {
  constexpr std::size_t kUnset = static_cast<std::size_t>(-1);
  std::vector<std::size_t> label(num_nodes(), kUnset);
  std::size_t next = 0;
  for (std::size_t s = 0; s < num_nodes(); ++s) {
    if (label[s] != kUnset) continue;
    std::queue<std::size_t> q;
    q.push(s);
    label[s] = next;
    while (!q.empty()) {
      const std::size_t u = q.front();
      q.pop();
      for (std::size_t v : neighbors(u)) {
        if (label[v] == kUnset) {
          label[v] = next;
          q.push(v);
        }
      }
    }
    ++next;
  }
  return label;
}

std::size_t Graph::num_components() const {
  const auto labels = components();
  return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
}

std::vector<std::pair<std::size_t, std::size_t>> Graph::edge_pairs() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  out.reserve(num_edges());
  for (const Edge& e : edges()) out.emplace_back(e.u, e.v);
  return out;
}

bool operator==(const Graph& a, const Graph& b) {
  return a.num_nodes() == b.num_nodes() && std::equal(a.edges().begin(), a.edges().end(),
                                                      b.edges().begin(), b.edges().end());
}

Graph disjoint_union(std::span<const Graph> graphs) {
  std::size_t offset = 0;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (const Graph& g : graphs) {
    for (const Edge& e : g.edges()) pairs.emplace_back(e.u + offset, e.v + offset);
    offset += g.num_nodes();
  }
  return Graph::from_edges(offset, pairs);
}

Graph permute(const Graph& g, std::span<const std::size_t> perm) {
  if (perm.size() != g.num_nodes()) throw Error(ErrorCode::LengthMismatch, "permutation size");
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (const Edge& e : g.edges()) pairs.emplace_back(perm[e.u], perm[e.v]);
  return Graph::from_edges(g.num_nodes(), pairs);
}

Graph path_graph(std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> e;
  for (std::size_t i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
  return Graph::from_edges(n, e);
}

Graph ring_graph(std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> e;
  for (std::size_t i = 0; i < n; ++i) e.emplace_back(i, (i + 1) % n);
  return Graph::from_edges(n, e);
}

Graph star_graph(std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> e;
  for (std::size_t i = 1; i < n; ++i) e.emplace_back(0, i);
  return Graph::from_edges(n, e);
}

Graph complete_graph(std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> e;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) e.emplace_back(i, j);
  return Graph::from_edges(n, e);
}

SymOperator degree_matrix(const Graph& g) {
  Vector d(static_cast<Eigen::Index>(g.num_nodes()));
  for (std::size_t i = 0; i < g.num_nodes(); ++i) d[static_cast<Eigen::Index>(i)] = static_cast<double>(g.degree(i));
  return SymOperator::diagonal(d);
}

SymOperator adjacency_matrix(const Graph& g) {
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  std::vector<Triplet> t;
  t.reserve(g.adjacency_nnz());
  for (const Edge& e : g.edges()) {
    t.emplace_back(e.u, e.v, 1.0);
    t.emplace_back(e.v, e.u, 1.0);
  }
  SparseMatrix a(n, n);
  a.setFromTriplets(t.begin(), t.end());
  return SymOperator::from_sparse(std::move(a));
}

SymOperator laplacian(const Graph& g) {
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  std::vector<Triplet> t;
  t.reserve(g.adjacency_nnz() + g.num_nodes());
  for (std::size_t i = 0; i < g.num_nodes(); ++i) {
    t.emplace_back(i, i, static_cast<double>(g.degree(i)));
    for (std::size_t j : g.neighbors(i)) t.emplace_back(i, j, -1.0);
  }
  SparseMatrix l(n, n);
  l.setFromTriplets(t.begin(), t.end());
  return SymOperator::from_sparse(std::move(l));
}

namespace {
void require_length(const Vector& v, std::size_t n, const char* what) {
  if (static_cast<std::size_t>(v.size()) != n) {
    throw Error(ErrorCode::LengthMismatch,
                std::string(what) + " has length " + std::to_string(v.size()) + ", expected " + std::to_string(n));
  }
}
}  // namespace

EdgeSignal grad(const Graph& g, const NodeSignal& f) {
  require_length(f, g.num_nodes(), "node signal");
  EdgeSignal out(static_cast<Eigen::Index>(g.num_edges()));
  Eigen::Index k = 0;
  for (const Edge& e : g.edges()) {
    out[k++] = f[static_cast<Eigen::Index>(e.v)] - f[static_cast<Eigen::Index>(e.u)];
  }
  return out;
}

NodeSignal adjoint_grad(const Graph& g, const EdgeSignal& F) {
  require_length(F, g.num_edges(), "edge signal");
  // 1/2 sum_{j~i} (F(j,i) - F(i,j)) with F(v,u) = -F(u,v): the tail loses F_e, the head gains it.
  NodeSignal out = NodeSignal::Zero(static_cast<Eigen::Index>(g.num_nodes()));
  Eigen::Index k = 0;
  for (const Edge& e : g.edges()) {
    out[static_cast<Eigen::Index>(e.u)] -= F[k];
    out[static_cast<Eigen::Index>(e.v)] += F[k];
    ++k;
  }
  return out;
}

NodeSignal divergence(const Graph& g, const EdgeSignal& F) { return -2.0 * adjoint_grad(g, F); }

double dirichlet_form(const Graph& g, const NodeSignal& f, const NodeSignal& h) {
  require_length(f, g.num_nodes(), "f");
  require_length(h, g.num_nodes(), "h");
  return 0.5 * f.dot(laplacian(g).apply(h));
}

}  // namespace bes
