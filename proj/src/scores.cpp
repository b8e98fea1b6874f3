#include "graphood/scores.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "graphood/losses.hpp"

namespace graphood {

void check_unit_interval(const ScoreVector& s) {
  for (Index i = 0; i < s.size(); ++i) {
    const double v = s[i];
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw NumericalError(fmt::format("score {} at vertex {} outside [0,1]", v, i));
    }
  }
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    p.row(i) = (logits.row(i).array() - m).exp().matrix();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

Matrix sigmoid_matrix(const Matrix& logits) {
  return logits.unaryExpr([](double x) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  });
}

ScoreVector score_msp(const Matrix& logits) {
  if (logits.cols() == 0) throw ShapeError("score_msp: logits have no columns");
  const Matrix p = softmax_rows(logits);
  return ScoreVector{(1.0 - p.rowwise().maxCoeff().array()).matrix()};
}

ScoreVector score_gdoc(const Matrix& logits) {
  if (logits.cols() == 0) throw ShapeError("score_gdoc: logits have no columns");
  const Matrix s = sigmoid_matrix(logits);
  return ScoreVector{(1.0 - s.rowwise().maxCoeff().array()).matrix()};
}

void OdinConfig::validate() const {
  if (!(temperature > 0.0)) throw ConfigError("odin: temperature must be > 0");
  if (!(epsilon >= 0.0)) throw ConfigError("odin: epsilon must be >= 0");
}

namespace {

double sign(double x) { return (x > 0.0) - (x < 0.0); }

Matrix model_logits(const ModelState& model, const WeightedAdjacency* adjacency,
                    const Matrix& features) {
  Tape tape;
  const ModelVars params = bind_parameters(tape, model, false);
  std::optional<Var> adj_w;
  if (adjacency) adj_w = tape.constant(Matrix(adjacency->weights));
  const TapeForward fw =
      backbone_on_tape(model, params, adjacency, adj_w, tape.constant(features), false, 0);
  return head_logits(model, params, fw.output, 1.0).value();
}

}  // namespace

ScoreVector score_odin(const ModelState& model, const Graph& g, const OdinConfig& cfg) {
  return score_odin(model, g, g.features(), cfg);
}

ScoreVector score_odin(const ModelState& model, const Graph& g, const Matrix& features,
                       const OdinConfig& cfg) {
  cfg.validate();
  if (model.head.kind != HeadKind::softmax_ce) {
    throw ConfigError("odin: requires the softmax_ce head, got " +
                      std::string(to_string(model.head.kind)));
  }
  if (features.rows() != g.num_vertices()) throw ShapeError("odin: feature rows != vertices");
  const auto adjacency = propagation_operator(model.backbone.kind, g);
  const WeightedAdjacency* adj = adjacency ? &*adjacency : nullptr;
  const double inv_t = 1.0 / cfg.temperature;

  if (cfg.epsilon == 0.0) {
    return score_msp(model_logits(model, adj, features) * inv_t);
  }

  Tape tape;
  const ModelVars params = bind_parameters(tape, model, false);
  const Var x = tape.variable(features);
  std::optional<Var> adj_w;
  if (adj) adj_w = tape.variable(Matrix(adj->weights));
  const TapeForward fw = backbone_on_tape(model, params, adj, adj_w, x, false, 0);
  const Var scaled = scale(head_logits(model, params, fw.output, 1.0), inv_t);

  const Matrix& z = scaled.value();
  std::vector<int> predicted(static_cast<std::size_t>(z.rows()));
  std::vector<Index> rows(static_cast<std::size_t>(z.rows()));
  for (Index i = 0; i < z.rows(); ++i) {
    Index best = 0;
    z.row(i).maxCoeff(&best);
    predicted[i] = static_cast<int>(best);
    rows[i] = i;
  }
  tape.backward(loss_softmax_ce(scaled, predicted, rows));

  // Descending the cross-entropy raises the predicted-class softmax.
  const Matrix perturbed_x = features - cfg.epsilon * x.grad().unaryExpr(&sign);
  std::optional<WeightedAdjacency> perturbed_adj;
  if (adj) {
    perturbed_adj = *adj;
    const Matrix& ga = adj_w->grad();
    for (Index e = 0; e < adj->weights.size(); ++e) {
      if (adj->self_loop[e]) continue;
      const double sym = 0.5 * (ga(e, 0) + ga(adj->mirror[e], 0));
      perturbed_adj->weights[e] -= cfg.epsilon * sign(sym);
    }
  }
  const Matrix logits =
      model_logits(model, perturbed_adj ? &*perturbed_adj : nullptr, perturbed_x);
  return score_msp(logits * inv_t);
}

Vector isomax_raw_scores(const Matrix& embeddings, const Matrix& prototypes) {
  if (prototypes.rows() == 0) throw ConfigError("isomax: empty prototype set");
  if (embeddings.cols() != prototypes.cols()) {
    throw ShapeError("isomax: embedding and prototype dims differ");
  }
  constexpr double kNormEps = 1e-12;
  Matrix h = embeddings;
  for (Index i = 0; i < h.rows(); ++i) h.row(i) /= std::max(h.row(i).norm(), kNormEps);
  Matrix p = prototypes;
  for (Index k = 0; k < p.rows(); ++k) p.row(k) /= std::max(p.row(k).norm(), kNormEps);
  Vector out(h.rows());
  for (Index i = 0; i < h.rows(); ++i) {
    out[i] = (p.rowwise() - h.row(i)).rowwise().norm().minCoeff();
  }
  return out;
}

IsoMaxNormalizer IsoMaxNormalizer::fit(const Vector& train_raw) {
  if (train_raw.size() == 0) throw ConfigError("isomax: no training scores to fit normalization");
  return IsoMaxNormalizer{train_raw.minCoeff(), train_raw.maxCoeff()};
}

Vector IsoMaxNormalizer::apply(const Vector& raw) const {
  const double span = high - low;
  if (span <= 0.0) {
    // Degenerate fit: everything at or below the training value counts as ID.
    return raw.unaryExpr([this](double r) { return r > low ? 1.0 : 0.0; });
  }
  return raw.unaryExpr([&](double r) { return std::clamp((r - low) / span, 0.0, 1.0); });
}

ScoreVector score_isomax(const Matrix& embeddings, const Matrix& prototypes,
                         const IsoMaxNormalizer& normalizer) {
  return ScoreVector{normalizer.apply(isomax_raw_scores(embeddings, prototypes))};
}

void write_scores_tsv(std::ostream& out, const ScoreVector& scores,
                      std::span<const Index> vertices) {
  for (Index v : vertices) {
    if (v < 0 || v >= scores.size()) throw ShapeError("write_scores_tsv: vertex out of range");
    out << fmt::format("{}\t{:.6f}\n", v, scores[v]);
  }
}

}  // namespace graphood
