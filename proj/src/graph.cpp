#include "graphood/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>

namespace graphood {

bool Graph::has_edge(Index u, Index v) const {
  const auto nbrs = neighbors(u);
  return std::binary_search(nbrs.begin(), nbrs.end(), v);
}

const std::vector<int>& Graph::timestamps() const {
  if (!timestamps_) throw DataError("graph has no timestamps");
  return *timestamps_;
}

EdgeList Graph::canonical_edges() const {
  EdgeList out;
  out.reserve(static_cast<std::size_t>(num_edges()));
  for (Index u = 0; u < num_vertices(); ++u) {
    for (Index v : neighbors(u)) {
      if (u < v) out.emplace_back(u, v);
    }
  }
  return out;
}

Eigen::SparseMatrix<double, Eigen::RowMajor> Graph::adjacency_matrix() const {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(targets_.size());
  for (Index u = 0; u < num_vertices(); ++u) {
    for (Index v : neighbors(u)) triplets.emplace_back(u, v, 1.0);
  }
  Eigen::SparseMatrix<double, Eigen::RowMajor> a(num_vertices(), num_vertices());
  a.setFromTriplets(triplets.begin(), triplets.end());
  return a;
}

bool operator==(const Graph& a, const Graph& b) {
  return a.offsets_ == b.offsets_ && a.targets_ == b.targets_ && a.labels_ == b.labels_ &&
         a.timestamps_ == b.timestamps_ && a.num_classes_ == b.num_classes_ &&
         a.features_.rows() == b.features_.rows() && a.features_.cols() == b.features_.cols() &&
         a.features_ == b.features_;
}

Graph build_graph(const EdgeList& edges, Index num_vertices, Matrix features,
                  std::vector<int> labels, std::optional<std::vector<int>> timestamps,
                  int num_classes) {
  if (num_vertices < 0) throw DataError("negative vertex count");
  if (static_cast<Index>(labels.size()) != num_vertices) {
    throw DataError("label count " + std::to_string(labels.size()) + " != vertex count " +
                    std::to_string(num_vertices));
  }
  if (features.rows() != num_vertices) {
    throw DataError("feature rows " + std::to_string(features.rows()) + " != vertex count " +
                    std::to_string(num_vertices));
  }
  if (timestamps && static_cast<Index>(timestamps->size()) != num_vertices) {
    throw DataError("timestamp count does not match vertex count");
  }
  int max_label = -1;
  for (int y : labels) {
    if (y < 0) throw DataError("negative class label");
    max_label = std::max(max_label, y);
  }
  if (num_classes < 0) num_classes = max_label + 1;
  if (max_label >= num_classes) throw DataError("label exceeds num_classes");

  std::vector<std::pair<Index, Index>> directed;
  directed.reserve(edges.size() * 2);
  for (const auto& [u, v] : edges) {
    if (u < 0 || v < 0 || u >= num_vertices || v >= num_vertices) {
      throw DataError("edge endpoint out of range: (" + std::to_string(u) + ", " +
                      std::to_string(v) + ")");
    }
    if (u == v) continue;
    directed.emplace_back(u, v);
    directed.emplace_back(v, u);
  }
  std::sort(directed.begin(), directed.end());
  directed.erase(std::unique(directed.begin(), directed.end()), directed.end());

  Graph g;
  g.offsets_.assign(static_cast<std::size_t>(num_vertices) + 1, 0);
  g.targets_.reserve(directed.size());
  for (const auto& [u, v] : directed) {
    ++g.offsets_[u + 1];
    g.targets_.push_back(v);
  }
  for (Index i = 0; i < num_vertices; ++i) g.offsets_[i + 1] += g.offsets_[i];
  g.features_ = std::move(features);
  g.labels_ = std::move(labels);
  g.timestamps_ = std::move(timestamps);
  g.num_classes_ = num_classes;
  return g;
}

Index SparsePattern::find(Index i, Index j) const {
  const auto begin = indices.begin() + offsets[i];
  const auto end = indices.begin() + offsets[i + 1];
  const auto it = std::lower_bound(begin, end, j);
  return (it != end && *it == j) ? static_cast<Index>(it - indices.begin()) : -1;
}

Eigen::SparseMatrix<double, Eigen::RowMajor> WeightedAdjacency::to_eigen() const {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(pattern->nnz()));
  for (Index i = 0; i < pattern->rows; ++i) {
    for (Index e = pattern->offsets[i]; e < pattern->offsets[i + 1]; ++e) {
      triplets.emplace_back(i, pattern->indices[e], weights[e]);
    }
  }
  Eigen::SparseMatrix<double, Eigen::RowMajor> m(pattern->rows, pattern->cols);
  m.setFromTriplets(triplets.begin(), triplets.end());
  return m;
}

double WeightedAdjacency::weight(Index i, Index j) const {
  const Index e = pattern->find(i, j);
  return e < 0 ? 0.0 : weights[e];
}

namespace {

void fill_mirror(WeightedAdjacency& adj) {
  const auto& p = *adj.pattern;
  adj.mirror.assign(static_cast<std::size_t>(p.nnz()), -1);
  adj.self_loop.assign(static_cast<std::size_t>(p.nnz()), false);
  for (Index i = 0; i < p.rows; ++i) {
    for (Index e = p.offsets[i]; e < p.offsets[i + 1]; ++e) {
      const Index j = p.indices[e];
      adj.mirror[e] = p.find(j, i);
      adj.self_loop[e] = (i == j);
    }
  }
}

}  // namespace

WeightedAdjacency symmetric_normalize(const Graph& g) {
  const Index n = g.num_vertices();
  auto pattern = std::make_shared<SparsePattern>();
  pattern->rows = pattern->cols = n;
  pattern->offsets.assign(static_cast<std::size_t>(n) + 1, 0);
  pattern->indices.reserve(static_cast<std::size_t>(g.num_edge_slots() + n));
  for (Index i = 0; i < n; ++i) {
    bool diag_done = false;
    for (Index j : g.neighbors(i)) {
      if (!diag_done && j > i) {
        pattern->indices.push_back(i);
        diag_done = true;
      }
      pattern->indices.push_back(j);
    }
    if (!diag_done) pattern->indices.push_back(i);
    pattern->offsets[i + 1] = static_cast<Index>(pattern->indices.size());
  }

  Vector inv_sqrt_deg(n);
  for (Index i = 0; i < n; ++i) inv_sqrt_deg[i] = 1.0 / std::sqrt(double(g.degree(i) + 1));

  WeightedAdjacency adj;
  adj.weights.resize(pattern->nnz());
  for (Index i = 0; i < n; ++i) {
    for (Index e = pattern->offsets[i]; e < pattern->offsets[i + 1]; ++e) {
      adj.weights[e] = inv_sqrt_deg[i] * inv_sqrt_deg[pattern->indices[e]];
    }
  }
  adj.pattern = std::move(pattern);
  fill_mirror(adj);
  return adj;
}

WeightedAdjacency mean_adjacency(const Graph& g) {
  const Index n = g.num_vertices();
  auto pattern = std::make_shared<SparsePattern>();
  pattern->rows = pattern->cols = n;
  pattern->offsets = g.offsets();
  pattern->indices = g.targets();

  WeightedAdjacency adj;
  adj.weights.resize(pattern->nnz());
  for (Index i = 0; i < n; ++i) {
    const double w = g.degree(i) > 0 ? 1.0 / double(g.degree(i)) : 0.0;
    for (Index e = pattern->offsets[i]; e < pattern->offsets[i + 1]; ++e) adj.weights[e] = w;
  }
  adj.pattern = std::move(pattern);
  fill_mirror(adj);
  return adj;
}

Vector neighbor_mean(const Graph& g, const Vector& values) {
  if (values.size() != g.num_vertices()) throw ShapeError("neighbor_mean: length mismatch");
  Vector out(values.size());
  for (Index v = 0; v < g.num_vertices(); ++v) {
    const auto nbrs = g.neighbors(v);
    if (nbrs.empty()) {
      out[v] = values[v];
      continue;
    }
    double sum = 0.0;
    for (Index w : nbrs) sum += values[w];
    out[v] = sum / double(nbrs.size());
  }
  return out;
}

HomophilyReport homophily_measures(const Graph& g) {
  const Index n = g.num_vertices();
  const int k = g.num_classes();
  if (g.num_edge_slots() == 0) throw DataError("homophily undefined on an edgeless graph");
  if (k < 2) throw DataError("class-insensitive homophily needs at least two classes");

  const auto& y = g.labels();
  HomophilyReport r;
  std::vector<double> same_deg(static_cast<std::size_t>(k), 0.0);
  std::vector<double> total_deg(static_cast<std::size_t>(k), 0.0);
  std::vector<Index> class_size(static_cast<std::size_t>(k), 0);
  double vertex_sum = 0.0;
  Index non_isolated = 0;

  for (Index v = 0; v < n; ++v) {
    ++class_size[y[v]];
    const auto nbrs = g.neighbors(v);
    Index same = 0;
    for (Index w : nbrs) same += (y[w] == y[v]);
    r.intra_class_edges += same;
    r.inter_class_edges += static_cast<Index>(nbrs.size()) - same;
    same_deg[y[v]] += double(same);
    total_deg[y[v]] += double(nbrs.size());
    if (!nbrs.empty()) {
      vertex_sum += double(same) / double(nbrs.size());
      ++non_isolated;
    }
  }

  const double slots = double(g.num_edge_slots());
  r.graph_level = double(r.intra_class_edges) / slots;
  r.vertex_level = vertex_sum / double(non_isolated);
  r.homophily_index = double(r.inter_class_edges - r.intra_class_edges) / slots;

  double acc = 0.0;
  for (int c = 0; c < k; ++c) {
    if (total_deg[c] == 0.0) continue;
    const double h = same_deg[c] / total_deg[c];
    acc += std::max(0.0, h - double(class_size[c]) / double(n));
  }
  r.class_insensitive = acc / double(k - 1);
  return r;
}

SparsePattern r_hop_mask(const Graph& g, int r) {
  if (r < 1 || r > 3) throw ConfigError("r_hop_mask: r must be in {1,2,3}");
  const Index n = g.num_vertices();
  SparsePattern p;
  p.rows = p.cols = n;
  p.offsets.assign(static_cast<std::size_t>(n) + 1, 0);

  std::vector<int> dist(static_cast<std::size_t>(n), -1);
  std::vector<Index> touched;
  std::deque<Index> queue;
  for (Index s = 0; s < n; ++s) {
    dist[s] = 0;
    touched.assign(1, s);
    queue.assign(1, s);
    while (!queue.empty()) {
      const Index u = queue.front();
      queue.pop_front();
      if (dist[u] == r) continue;
      for (Index w : g.neighbors(u)) {
        if (dist[w] >= 0) continue;
        dist[w] = dist[u] + 1;
        touched.push_back(w);
        queue.push_back(w);
      }
    }
    std::vector<Index> row;
    row.reserve(touched.size());
    for (Index t : touched) {
      if (t != s) row.push_back(t);
      dist[t] = -1;
    }
    std::sort(row.begin(), row.end());
    p.indices.insert(p.indices.end(), row.begin(), row.end());
    p.offsets[s + 1] = static_cast<Index>(p.indices.size());
  }
  return p;
}

Subgraph induced_subgraph(const Graph& g, const std::vector<bool>& keep) {
  if (static_cast<Index>(keep.size()) != g.num_vertices()) {
    throw ShapeError("induced_subgraph: mask length mismatch");
  }
  std::vector<Index> new_id(keep.size(), -1);
  Subgraph sub;
  for (Index v = 0; v < g.num_vertices(); ++v) {
    if (keep[v]) {
      new_id[v] = static_cast<Index>(sub.original_ids.size());
      sub.original_ids.push_back(v);
    }
  }
  if (sub.original_ids.empty()) throw DataError("induced_subgraph: empty vertex mask");

  const Index m = static_cast<Index>(sub.original_ids.size());
  EdgeList edges;
  for (Index u : sub.original_ids) {
    for (Index w : g.neighbors(u)) {
      if (u < w && new_id[w] >= 0) edges.emplace_back(new_id[u], new_id[w]);
    }
  }
  Matrix features(m, g.feature_dim());
  std::vector<int> labels(static_cast<std::size_t>(m));
  std::optional<std::vector<int>> years;
  if (g.has_timestamps()) years.emplace(static_cast<std::size_t>(m));
  for (Index i = 0; i < m; ++i) {
    const Index v = sub.original_ids[i];
    features.row(i) = g.features().row(v);
    labels[i] = g.labels()[v];
    if (years) (*years)[i] = g.timestamps()[v];
  }
  sub.graph = build_graph(edges, m, std::move(features), std::move(labels), std::move(years),
                          g.num_classes());
  return sub;
}

}  // namespace graphood
