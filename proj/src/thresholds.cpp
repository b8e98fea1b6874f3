#include "graphood/thresholds.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "graphood/models.hpp"

namespace graphood {

ThresholdDecision naive_threshold(const ScoreVector& scores, std::span<const Index> vertices,
                                  double delta) {
  if (!(delta >= 0.0 && delta <= 1.0)) throw ConfigError("naive threshold: delta must be in [0,1]");
  ThresholdDecision d;
  d.method = "naive";
  d.thresholds = Vector::Constant(1, delta);
  d.ood_mask.reserve(vertices.size());
  for (Index v : vertices) d.ood_mask.push_back(scores[v] > delta);
  return d;
}

GdocThresholds gdoc_thresholds(const Matrix& sigmoid_outputs, std::span<const int> class_index,
                               double alpha_doc, double delta_min) {
  if (static_cast<Index>(class_index.size()) != sigmoid_outputs.rows()) {
    throw ShapeError("gdoc_thresholds: one class index per output row required");
  }
  if (alpha_doc < 0.0) throw ConfigError("gdoc: alpha_doc must be >= 0");
  if (!(delta_min >= 0.0 && delta_min <= 1.0)) throw ConfigError("gdoc: delta_min must be in [0,1]");
  const Index k = sigmoid_outputs.cols();
  GdocThresholds out;
  out.thresholds = Vector::Constant(k, delta_min);
  // Mirrored sample {y} u {2 - y} has mean exactly 1, so its population
  // variance is the mean of (1 - y)^2 over the original outputs.
  Vector sq = Vector::Zero(k);
  Vector count = Vector::Zero(k);
  for (Index i = 0; i < sigmoid_outputs.rows(); ++i) {
    const int c = class_index[i];
    if (c < 0 || c >= k) throw ShapeError("gdoc_thresholds: class index out of range");
    const double dev = 1.0 - sigmoid_outputs(i, c);
    sq[c] += dev * dev;
    count[c] += 1.0;
  }
  for (Index c = 0; c < k; ++c) {
    if (count[c] == 0.0) {
      out.empty_classes.push_back(static_cast<int>(c));
      continue;
    }
    const double sigma = std::sqrt(sq[c] / count[c]);
    out.thresholds[c] = std::max(delta_min, 1.0 - alpha_doc * sigma);
  }
  return out;
}

GdocDecision gdoc_decide(const Matrix& sigmoid_outputs, const Vector& thresholds) {
  if (thresholds.size() != sigmoid_outputs.cols()) {
    throw ShapeError("gdoc_decide: one threshold per class required");
  }
  GdocDecision out;
  out.decision.method = "gdoc";
  out.decision.thresholds = thresholds;
  for (Index i = 0; i < sigmoid_outputs.rows(); ++i) {
    bool all_below = true;
    for (Index c = 0; c < thresholds.size(); ++c) {
      if (sigmoid_outputs(i, c) >= thresholds[c]) all_below = false;
    }
    Index best = 0;
    sigmoid_outputs.row(i).maxCoeff(&best);
    out.decision.ood_mask.push_back(all_below);
    out.predicted.push_back(static_cast<int>(best));
  }
  return out;
}

double openwgl_threshold(const Matrix& probabilities) {
  const Index n = probabilities.rows();
  if (n < 10) throw ConfigError("openwgl: needs at least 10 samples");
  const Vector max_prob = probabilities.rowwise().maxCoeff();
  std::vector<double> entropy(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    double h = 0.0;
    for (Index c = 0; c < probabilities.cols(); ++c) {
      const double p = probabilities(i, c);
      if (p > 0.0) h -= p * std::log(p);
    }
    entropy[i] = h;
  }
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return entropy[a] > entropy[b]; });
  const auto top = static_cast<std::size_t>(std::ceil(0.1 * double(n)));
  double top_mean = 0.0;
  for (std::size_t i = 0; i < top; ++i) top_mean += max_prob[order[i]];
  top_mean /= double(top);
  return 0.5 * (max_prob.mean() + top_mean);
}

ThresholdDecision openwgl_decide(const Matrix& probabilities, double delta) {
  ThresholdDecision d;
  d.method = "openwgl";
  d.thresholds = Vector::Constant(1, delta);
  const Vector max_prob = probabilities.rowwise().maxCoeff();
  for (Index i = 0; i < max_prob.size(); ++i) d.ood_mask.push_back(max_prob[i] < delta);
  return d;
}

std::string_view to_string(DetectorInput input) {
  switch (input) {
    case DetectorInput::features_and_score: return "features_and_score";
    case DetectorInput::features_only: return "features_only";
    case DetectorInput::score_only: return "score_only";
  }
  return "?";
}

DetectorInput parse_detector_input(std::string_view name) {
  if (name == "features_and_score") return DetectorInput::features_and_score;
  if (name == "features_only") return DetectorInput::features_only;
  if (name == "score_only") return DetectorInput::score_only;
  throw ConfigError("unknown detector input '" + std::string(name) + "'");
}

void OpenWrfConfig::validate() const {
  if (!(q > 0.0 && q < 1.0)) throw ConfigError("open_wrf: q must lie in (0,1)");
  if (hidden_dim < 1) throw ConfigError("open_wrf: hidden_dim must be >= 1");
  if (epochs < 1) throw ConfigError("open_wrf: epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("open_wrf: learning_rate must be > 0");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw ConfigError("open_wrf: dropout in [0,1)");
}

std::vector<int> open_wrf_pseudo_labels(const ScoreVector& scores,
                                        std::span<const Index> vertices, double q) {
  if (!(q > 0.0 && q < 1.0)) throw ConfigError("open_wrf: q must lie in (0,1)");
  const auto n = vertices.size();
  const auto id_count = static_cast<std::size_t>(std::floor(double(n) * (1.0 - q)));
  // The floor alone always leaves one OOD vertex; an expected count below one is refused.
  if (id_count >= n || double(n) * q < 1.0 - 1e-9) {
    throw ConfigError(fmt::format(
        "open_wrf: q = {} marks no vertex as pseudo-OOD among {}; raise q or score more vertices",
        q, n));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[vertices[a]] < scores[vertices[b]];
  });
  std::vector<int> labels(n, 0);
  for (std::size_t rank = id_count; rank < n; ++rank) labels[order[rank]] = 1;
  return labels;
}

ThresholdDecision open_wrf(const Graph& g, const ScoreVector& scores,
                           std::span<const Index> vertices, const OpenWrfConfig& cfg) {
  cfg.validate();
  if (scores.size() != g.num_vertices()) {
    throw ShapeError("open_wrf: scores must cover every vertex of the graph");
  }
  const std::vector<int> pseudo = open_wrf_pseudo_labels(scores, vertices, cfg.q);

  Matrix input;
  switch (cfg.input) {
    case DetectorInput::features_and_score:
      input.resize(g.num_vertices(), g.feature_dim() + 1);
      input << g.features(), scores.values;
      break;
    case DetectorInput::features_only: input = g.features(); break;
    case DetectorInput::score_only: input = scores.values; break;
  }

  std::vector<int> targets(static_cast<std::size_t>(g.num_vertices()), 0);
  for (std::size_t i = 0; i < vertices.size(); ++i) targets[vertices[i]] = pseudo[i];

  BackboneConfig detector;
  detector.kind = BackboneKind::gcn;
  detector.layers = 2;
  detector.hidden_dim = cfg.hidden_dim;
  detector.dropout_rate = cfg.dropout_rate;
  TrainConfig train_cfg;
  train_cfg.epochs = cfg.epochs;
  train_cfg.learning_rate = cfg.learning_rate;
  train_cfg.seed = cfg.seed;
  const TrainResult trained =
      train_binary_detector(g, input, targets, detector, train_cfg, vertices);
  const ForwardResult out = forward(g, input, trained.state);

  ThresholdDecision d;
  d.method = "open_wrf";
  for (Index v : vertices) d.ood_mask.push_back(out.logits(v, 0) > 0.0);  // sigmoid > 0.5
  return d;
}

void write_decisions_tsv(std::ostream& out, const ScoreVector& scores,
                         std::span<const Index> vertices, const ThresholdDecision& decision) {
  if (decision.ood_mask.size() != vertices.size()) {
    throw ShapeError("write_decisions_tsv: mask length differs from vertex list");
  }
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    out << fmt::format("{}\t{:.6f}\t{}\n", vertices[i], scores[vertices[i]],
                       decision.ood_mask[i] ? 1 : 0);
  }
}

}  // namespace graphood
