#pragma once

#include <random>
#include <vector>

#include "graphood/graph.hpp"

namespace graphood::testing {

inline Matrix zero_features(Index n, Index d = 1) { return Matrix::Zero(n, d); }

inline Graph make_graph(const EdgeList& edges, std::vector<int> labels, Index d = 1) {
  const Index n = static_cast<Index>(labels.size());
  return build_graph(edges, n, zero_features(n, d), std::move(labels));
}

inline Graph path_graph(Index n, std::vector<int> labels = {}) {
  EdgeList e;
  for (Index i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
  if (labels.empty()) labels.assign(static_cast<std::size_t>(n), 0);
  return make_graph(e, std::move(labels));
}

inline Graph triangle(std::vector<int> labels = {0, 0, 0}) {
  return make_graph({{0, 1}, {1, 2}, {0, 2}}, std::move(labels));
}

inline Graph cycle4(std::vector<int> labels = {0, 0, 1, 1}) {
  return make_graph({{0, 1}, {1, 2}, {2, 3}, {3, 0}}, std::move(labels));
}

inline Matrix random_matrix(Index rows, Index cols, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, scale);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = gauss(rng);
  return m;
}

/// Random graph with a given edge probability and features.
inline Graph random_graph(Index n, double p, int classes, Index d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  EdgeList e;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      if (u(rng) < p) e.emplace_back(i, j);
    }
  }
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) labels[i] = static_cast<int>(i % classes);
  return build_graph(e, n, random_matrix(n, d, seed + 1), labels, std::nullopt, classes);
}

}  // namespace graphood::testing

#include <functional>

#include "graphood/autodiff.hpp"

namespace graphood::testing {

using TapeFn = std::function<Var(Tape&, const std::vector<Var>&)>;

/// Independent central-difference gradient check. Returns the largest
/// |analytic - numeric| / max(|analytic|, |numeric|, floor) over all entries.
inline double max_gradient_error(const TapeFn& f, const std::vector<Matrix>& inputs,
                                 double h = 1e-5, double floor = 1e-6) {
  Tape tape;
  std::vector<Var> vars;
  for (const auto& x : inputs) vars.push_back(tape.variable(x));
  tape.backward(f(tape, vars));
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (Index i = 0; i < inputs[k].size(); ++i) {
      auto eval_at = [&](double delta) {
        std::vector<Matrix> probe = inputs;
        probe[k].data()[i] += delta;
        Tape t;
        std::vector<Var> vs;
        for (const auto& x : probe) vs.push_back(t.constant(x));
        return f(t, vs).value()(0, 0);
      };
      const double numeric = (eval_at(h) - eval_at(-h)) / (2.0 * h);
      const double analytic = vars[k].grad().data()[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
      worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
  }
  return worst;
}

/// a^T x b with fixed random a, b: a scalar whose upstream gradient a_i b_j
/// differs for every entry of x.
inline Var random_projection(Var x, std::uint64_t seed) {
  Tape& t = *x.tape;
  const Var a = t.constant(random_matrix(1, x.rows(), seed));
  const Var b = t.constant(random_matrix(x.cols(), 1, seed + 1));
  return matmul(matmul(a, x), b);
}

}  // namespace graphood::testing
