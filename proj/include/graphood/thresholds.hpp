#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "graphood/graph.hpp"
#include "graphood/scores.hpp"

namespace graphood {

/// Crisp OOD decisions for a list of vertices.
struct ThresholdDecision {
  std::vector<bool> ood_mask;
  /// One entry for a global threshold, one per class for gDOC, empty for Open-WRF.
  Vector thresholds;
  std::string method;
};

/// OOD iff score > delta, for the listed vertices.
ThresholdDecision naive_threshold(const ScoreVector& scores, std::span<const Index> vertices,
                                  double delta);

struct GdocThresholds {
  Vector thresholds;
  /// Classes without training rows; their threshold is delta_min.
  std::vector<int> empty_classes;
};

/// Per-class risk-reduction thresholds. sigmoid_outputs has one row per
/// training vertex and one column per known class; class_index[i] is the
/// column of row i's true class. Each class's true-class outputs are mirrored
/// around 1 and the population std sigma gives max(delta_min, 1 - alpha * sigma).
GdocThresholds gdoc_thresholds(const Matrix& sigmoid_outputs, std::span<const int> class_index,
                               double alpha_doc, double delta_min);

struct GdocDecision {
  ThresholdDecision decision;
  /// argmax column per row (meaningful only for rows decided ID).
  std::vector<int> predicted;
};

/// OOD iff every class output is strictly below its threshold.
GdocDecision gdoc_decide(const Matrix& sigmoid_outputs, const Vector& thresholds);

/// Mean max-probability over all rows averaged with the mean over the ceil(10%)
/// highest-entropy rows (ties broken by row order). Needs at least 10 rows.
double openwgl_threshold(const Matrix& probabilities);

/// OOD iff max-probability < delta.
ThresholdDecision openwgl_decide(const Matrix& probabilities, double delta);

enum class DetectorInput { features_and_score, features_only, score_only };

std::string_view to_string(DetectorInput input);
DetectorInput parse_detector_input(std::string_view name);

struct OpenWrfConfig {
  double q = 0.1;
  int hidden_dim = 16;
  int epochs = 200;
  double learning_rate = 0.01;
  double dropout_rate = 0.5;
  std::uint64_t seed = 0;
  DetectorInput input = DetectorInput::features_and_score;

  void validate() const;
};

/// 0/1 pseudo-labels over scores[vertices]: after a stable ascending sort
/// (ties by position), the last n - floor(n (1 - q)) are labeled OOD.
/// Throws ConfigError when n * q < 1.
std::vector<int> open_wrf_pseudo_labels(const ScoreVector& scores,
                                        std::span<const Index> vertices, double q);

/// Trains a 2-layer GCN detector on the pseudo-labels over g and returns its
/// decisions (sigmoid > 0.5) for the listed vertices. scores covers all of g.
ThresholdDecision open_wrf(const Graph& g, const ScoreVector& scores,
                           std::span<const Index> vertices, const OpenWrfConfig& cfg);

/// "vertex_id\tscore\tis_ood" lines for the decision's vertices.
void write_decisions_tsv(std::ostream& out, const ScoreVector& scores,
                         std::span<const Index> vertices, const ThresholdDecision& decision);

}  // namespace graphood
