#pragma once

#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/SparseCore>

#include "graphood/common.hpp"

namespace graphood {

using EdgeList = std::vector<std::pair<Index, Index>>;

/// Immutable undirected graph. Adjacency is CSR, stored symmetrically, without
/// self-loops and with sorted neighbor lists.
class Graph {
 public:
  Graph() = default;

  Index num_vertices() const { return static_cast<Index>(labels_.size()); }
  /// Undirected vertex pairs.
  Index num_edges() const { return num_edge_slots() / 2; }
  /// Directed adjacency entries (2 per undirected pair).
  Index num_edge_slots() const { return static_cast<Index>(targets_.size()); }
  Index feature_dim() const { return features_.cols(); }
  int num_classes() const { return num_classes_; }

  Index degree(Index v) const { return offsets_[v + 1] - offsets_[v]; }
  std::span<const Index> neighbors(Index v) const {
    return {targets_.data() + offsets_[v], static_cast<std::size_t>(degree(v))};
  }
  bool has_edge(Index u, Index v) const;

  const std::vector<Index>& offsets() const { return offsets_; }
  const std::vector<Index>& targets() const { return targets_; }
  const Matrix& features() const { return features_; }
  const std::vector<int>& labels() const { return labels_; }
  bool has_timestamps() const { return timestamps_.has_value(); }
  const std::vector<int>& timestamps() const;

  /// Edges as (u, v) with u < v, lexicographically sorted.
  EdgeList canonical_edges() const;

  /// Eigen view of the binary adjacency.
  Eigen::SparseMatrix<double, Eigen::RowMajor> adjacency_matrix() const;

  friend Graph build_graph(const EdgeList& edges, Index num_vertices, Matrix features,
                           std::vector<int> labels, std::optional<std::vector<int>> timestamps,
                           int num_classes);

  friend bool operator==(const Graph& a, const Graph& b);

 private:
  std::vector<Index> offsets_{0};
  std::vector<Index> targets_;
  Matrix features_;
  std::vector<int> labels_;
  std::optional<std::vector<int>> timestamps_;
  int num_classes_ = 0;
};

/// Builds a graph from an arbitrary edge list: symmetrizes, drops duplicates and
/// self-loops. num_classes < 0 infers max(label) + 1. Throws DataError on
/// out-of-range endpoints, bad labels, or row-count mismatches.
Graph build_graph(const EdgeList& edges, Index num_vertices, Matrix features,
                  std::vector<int> labels, std::optional<std::vector<int>> timestamps = {},
                  int num_classes = -1);

/// CSR sparsity pattern shared between an operator and its perturbed copies.
struct SparsePattern {
  Index rows = 0;
  Index cols = 0;
  std::vector<Index> offsets{0};
  std::vector<Index> indices;

  Index nnz() const { return static_cast<Index>(indices.size()); }
  /// Position of (i, j) in indices, or -1.
  Index find(Index i, Index j) const;
  bool contains(Index i, Index j) const { return find(i, j) >= 0; }
};

/// Square sparse operator over the vertex set with per-entry weights.
/// mirror[e] is the position of the transposed entry, so ODIN can perturb (i,j)
/// and (j,i) together; self_loop[e] flags diagonal entries.
struct WeightedAdjacency {
  std::shared_ptr<const SparsePattern> pattern;
  Vector weights;
  std::vector<Index> mirror;
  std::vector<bool> self_loop;

  Index size() const { return pattern ? pattern->rows : 0; }
  Eigen::SparseMatrix<double, Eigen::RowMajor> to_eigen() const;
  double weight(Index i, Index j) const;
};

/// D^{-1/2} (A + I) D^{-1/2} with D the degree matrix of A + I.
WeightedAdjacency symmetric_normalize(const Graph& g);

/// Row-normalized adjacency without self-loops (weight 1/deg(i)). Isolated
/// vertices have empty rows, so multiplying yields a zero neighbor mean.
WeightedAdjacency mean_adjacency(const Graph& g);

/// Mean of values over N(v); isolated vertices keep their own value.
Vector neighbor_mean(const Graph& g, const Vector& values);

struct HomophilyReport {
  double graph_level = 0.0;
  double vertex_level = 0.0;
  double class_insensitive = 0.0;
  double homophily_index = 0.0;
  // Counted over directed adjacency slots, so each undirected edge counts twice.
  Index inter_class_edges = 0;
  Index intra_class_edges = 0;
};

/// All homophily measures. Throws DataError for edgeless or single-class graphs.
HomophilyReport homophily_measures(const Graph& g);

/// (i, j) present iff j != i and j is reachable from i in at most r hops.
SparsePattern r_hop_mask(const Graph& g, int r);

struct Subgraph {
  Graph graph;
  /// original_ids[new_id] = id in the parent graph.
  std::vector<Index> original_ids;
};

/// Subgraph induced by the kept vertices, preserving their relative order.
Subgraph induced_subgraph(const Graph& g, const std::vector<bool>& keep);

}  // namespace graphood
