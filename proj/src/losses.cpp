#include "graphood/losses.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace graphood {
namespace {

void require_rows(std::span<const Index> rows, Index limit, const char* op) {
  if (rows.empty()) throw ConfigError(std::string(op) + ": empty row mask");
  for (Index r : rows) {
    if (r < 0 || r >= limit) throw ShapeError(std::string(op) + ": row index out of range");
  }
}

double log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

double sigmoid_value(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace

Var loss_softmax_ce(Var logits, std::span<const int> targets, std::span<const Index> rows) {
  const Matrix& x = logits.value();
  require_rows(rows, x.rows(), "loss_softmax_ce");
  if (static_cast<Index>(targets.size()) != x.rows()) {
    throw ShapeError("loss_softmax_ce: one target per logits row required");
  }
  const double inv_n = 1.0 / double(rows.size());
  Matrix grad = Matrix::Zero(x.rows(), x.cols());
  double total = 0.0;
  for (Index r : rows) {
    const int y = targets[r];
    if (y < 0 || y >= x.cols()) throw ShapeError("loss_softmax_ce: target out of range");
    const double m = x.row(r).maxCoeff();
    const auto shifted = (x.row(r).array() - m).exp();
    const double z = shifted.sum();
    total += -(x(r, y) - m - std::log(z));
    grad.row(r) += (shifted / z).matrix() * inv_n;
    grad(r, y) -= inv_n;
  }
  Matrix out(1, 1);
  out(0, 0) = total * inv_n;
  return logits.tape->record("loss_softmax_ce", std::move(out), {logits},
                             [logits, grad](Tape& t, const Matrix& g) {
                               t.accumulate(logits, grad * g(0, 0));
                             });
}

BceWeights class_balance_weights(std::span<const int> targets, std::span<const Index> rows,
                                 Index num_classes, bool class_weighting) {
  if (rows.empty()) throw ConfigError("class_balance_weights: empty row mask");
  BceWeights w;
  w.positive = Vector::Ones(num_classes);
  w.negative = Vector::Ones(num_classes);
  Vector counts = Vector::Zero(num_classes);
  for (Index r : rows) {
    const int y = targets[r];
    if (y < 0 || y >= num_classes) throw ShapeError("class_balance_weights: target out of range");
    counts[y] += 1.0;
  }
  const double n = double(rows.size());
  for (Index k = 0; k < num_classes; ++k) {
    if (counts[k] == n) w.degenerate = true;
    if (class_weighting) w.positive[k] = (n - counts[k]) / n;
  }
  return w;
}

Var loss_bce_weighted(Var logits, const Matrix& targets_onehot, std::span<const Index> rows,
                      const BceWeights& weights) {
  const Matrix& x = logits.value();
  require_rows(rows, x.rows(), "loss_bce_weighted");
  if (targets_onehot.rows() != x.rows() || targets_onehot.cols() != x.cols()) {
    throw ShapeError("loss_bce_weighted: target matrix shape differs from logits");
  }
  if (weights.positive.size() != x.cols() || weights.negative.size() != x.cols()) {
    throw ShapeError("loss_bce_weighted: one weight per class required");
  }
  const double inv_n = 1.0 / double(rows.size());
  Matrix grad = Matrix::Zero(x.rows(), x.cols());
  double total = 0.0;
  for (Index r : rows) {
    for (Index k = 0; k < x.cols(); ++k) {
      const double y = targets_onehot(r, k);
      const double wp = weights.positive[k] * y;
      const double wn = weights.negative[k] * (1.0 - y);
      const double z = x(r, k);
      total += -(wp * log_sigmoid(z) + wn * log_sigmoid(-z));
      const double s = sigmoid_value(z);
      grad(r, k) = inv_n * (wn * s - wp * (1.0 - s));
    }
  }
  Matrix out(1, 1);
  out(0, 0) = total * inv_n;
  return logits.tape->record("loss_bce_weighted", std::move(out), {logits},
                             [logits, grad](Tape& t, const Matrix& g) {
                               t.accumulate(logits, grad * g(0, 0));
                             });
}

Var isomax_logits(Var embeddings, Var prototypes, Var distance_scale, double entropic_scale) {
  if (entropic_scale < 1.0) throw ConfigError("isomax: entropic scale must be >= 1");
  if (prototypes.rows() == 0) throw ConfigError("isomax: empty prototype set");
  const Var dist =
      pairwise_distance(row_l2_normalize(embeddings), row_l2_normalize(prototypes));
  return scale(scale_by(dist, distance_scale), -entropic_scale);
}

Var loss_isomax(Var embeddings, Var prototypes, Var distance_scale, double entropic_scale,
                std::span<const int> targets, std::span<const Index> rows) {
  return loss_softmax_ce(isomax_logits(embeddings, prototypes, distance_scale, entropic_scale),
                         targets, rows);
}

Var loss_ncontrast(Var z, const SparsePattern& hop_mask, double tau,
                   std::span<const Index> batch) {
  if (batch.size() < 2) throw ConfigError("loss_ncontrast: batch size must be >= 2");
  if (tau <= 0.0) throw ConfigError("loss_ncontrast: tau must be positive");
  const Var zb = gather_rows(z, batch);
  const Var logits = scale(cosine_similarity(zb, zb), 1.0 / tau);
  const Matrix& s = logits.value();
  const Index b = s.rows();

  Matrix gamma = Matrix::Zero(b, b);
  for (Index i = 0; i < b; ++i) {
    for (Index j = 0; j < b; ++j) {
      if (i != j && hop_mask.contains(batch[i], batch[j])) gamma(i, j) = 1.0;
    }
  }

  // l_i = -log(sum_j gamma_ij e^{s_ij} / sum_{k != i} e^{s_ik}); empty numerator -> 0.
  const double inv_b = 1.0 / double(b);
  Matrix grad = Matrix::Zero(b, b);
  double total = 0.0;
  for (Index i = 0; i < b; ++i) {
    if (gamma.row(i).sum() == 0.0) continue;
    double m = -std::numeric_limits<double>::infinity();
    for (Index j = 0; j < b; ++j) {
      if (j != i) m = std::max(m, s(i, j));
    }
    double num = 0.0, den = 0.0;
    for (Index j = 0; j < b; ++j) {
      if (j == i) continue;
      const double e = std::exp(s(i, j) - m);
      den += e;
      num += gamma(i, j) * e;
    }
    total += -(std::log(num) - std::log(den));
    for (Index j = 0; j < b; ++j) {
      if (j == i) continue;
      const double e = std::exp(s(i, j) - m);
      grad(i, j) = inv_b * (e / den - gamma(i, j) * e / num);
    }
  }
  Matrix out(1, 1);
  out(0, 0) = total * inv_b;
  return z.tape->record("loss_ncontrast", std::move(out), {logits},
                        [logits, grad](Tape& t, const Matrix& g) {
                          t.accumulate(logits, grad * g(0, 0));
                        });
}

}  // namespace graphood
