#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "bes/sym_operator.hpp"
#include "bes/types.hpp"

namespace bes {

/// Undirected edge stored with its canonical orientation u < v.
struct Edge {
  std::size_t u;
  std::size_t v;

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Immutable undirected simple graph in compressed sparse adjacency form.
///
/// Copies are cheap and share the same topology. Neighbor lists are sorted
/// ascending; `incident_edges(i)[k]` is the canonical edge id joining `i` and
/// `neighbors(i)[k]`.
class Graph {
 public:
  Graph();

  /// Validates, deduplicates and canonically orients `edges`.
  /// Throws IndexOutOfRange or SelfLoop.
  static Graph from_edges(std::size_t n, std::span<const std::pair<std::size_t, std::size_t>> edges);
  static Graph from_edges(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
    return from_edges(n, std::span<const std::pair<std::size_t, std::size_t>>(edges));
  }

  std::size_t num_nodes() const noexcept { return data_->n; }
  std::size_t num_edges() const noexcept { return data_->edges.size(); }

  std::span<const Edge> edges() const noexcept { return data_->edges; }
  std::span<const std::size_t> neighbors(std::size_t i) const;
  std::span<const std::size_t> incident_edges(std::size_t i) const;
  std::size_t degree(std::size_t i) const { return data_->offsets[i + 1] - data_->offsets[i]; }

  /// Number of nonzeros of the symmetric adjacency structure (2m).
  std::size_t adjacency_nnz() const noexcept { return data_->targets.size(); }

  /// Connected component label per node (labels 0..c-1 in order of first node).
  std::vector<std::size_t> components() const;
  std::size_t num_components() const;
  bool is_connected() const { return num_components() <= 1; }

  /// Edge list as plain pairs (canonical orientation, canonical order).
  std::vector<std::pair<std::size_t, std::size_t>> edge_pairs() const;

  friend bool operator==(const Graph& a, const Graph& b);

 private:
  struct Data {
    std::size_t n = 0;
    std::vector<Edge> edges;
    std::vector<std::size_t> offsets;
    std::vector<std::size_t> targets;
    std::vector<std::size_t> edge_ids;
  };
  explicit Graph(std::shared_ptr<const Data> data) : data_(std::move(data)) {}

  std::shared_ptr<const Data> data_;
};

/// Disjoint union; nodes of `graphs[b]` are offset by the sizes of the preceding graphs.
Graph disjoint_union(std::span<const Graph> graphs);

/// Relabels node i to perm[i].
Graph permute(const Graph& g, std::span<const std::size_t> perm);

// Standard families used by tests, tasks and the theory checks.
Graph path_graph(std::size_t n);
Graph ring_graph(std::size_t n);
/// Node 0 is the center, nodes 1..n-1 are leaves.
Graph star_graph(std::size_t n);
Graph complete_graph(std::size_t n);

SymOperator degree_matrix(const Graph& g);
SymOperator adjacency_matrix(const Graph& g);
/// Combinatorial Laplacian L = D - A.
SymOperator laplacian(const Graph& g);

/// Per canonical edge (u<v): f(v) - f(u).
EdgeSignal grad(const Graph& g, const NodeSignal& f);

/// Adjoint of grad with respect to the plain node and edge inner products, using the
/// antisymmetric extension F(v,u) = -F(u,v). adjoint_grad(grad(f)) = L f.
NodeSignal adjoint_grad(const Graph& g, const EdgeSignal& F);

/// div F = -2 adjoint_grad(F); hence divergence(grad(f)) = -2 L f.
NodeSignal divergence(const Graph& g, const EdgeSignal& F);

/// 1/2 f^T L h.
double dirichlet_form(const Graph& g, const NodeSignal& f, const NodeSignal& h);

}  // namespace bes
