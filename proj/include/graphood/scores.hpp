#pragma once

#include <ostream>
#include <span>

#include "graphood/graph.hpp"
#include "graphood/models.hpp"

namespace graphood {

/// Per-vertex OOD scores in [0, 1]; larger means more likely OOD.
struct ScoreVector {
  Vector values;

  Index size() const { return values.size(); }
  double operator[](Index i) const { return values[i]; }
};

/// Throws NumericalError unless every entry is finite and inside [0, 1].
void check_unit_interval(const ScoreVector& s);

/// 1 - max_k softmax(logits)_k per row.
ScoreVector score_msp(const Matrix& logits);

struct OdinConfig {
  double temperature = 1.0;
  double epsilon = 0.0;

  void validate() const;
};

/// ODIN on a trained softmax model. Features and the off-diagonal entries of
/// the propagation operator are both moved by -epsilon * sign of the gradient
/// of the temperature-scaled cross-entropy at the predicted class; mirrored
/// entries share the mean of their two gradients so the operator stays
/// symmetric. Scores every vertex of g.
ScoreVector score_odin(const ModelState& model, const Graph& g, const Matrix& features,
                       const OdinConfig& cfg);
ScoreVector score_odin(const ModelState& model, const Graph& g, const OdinConfig& cfg);

/// min_k || h/|h| - p_k/|p_k| ||, in [0, 2].
Vector isomax_raw_scores(const Matrix& embeddings, const Matrix& prototypes);

/// Affine map from raw distances to [0, 1], fitted on training-set scores.
struct IsoMaxNormalizer {
  double low = 0.0;
  double high = 2.0;

  static IsoMaxNormalizer fit(const Vector& train_raw);
  /// (raw - low) / (high - low), clamped to [0, 1].
  Vector apply(const Vector& raw) const;
};

ScoreVector score_isomax(const Matrix& embeddings, const Matrix& prototypes,
                         const IsoMaxNormalizer& normalizer);

/// 1 - max_k sigmoid(logits)_k per row.
ScoreVector score_gdoc(const Matrix& logits);

/// Row-wise softmax and sigmoid of logit matrices.
Matrix softmax_rows(const Matrix& logits);
Matrix sigmoid_matrix(const Matrix& logits);

/// "vertex_id\tscore" lines with 6 decimals, one per listed vertex.
void write_scores_tsv(std::ostream& out, const ScoreVector& scores,
                      std::span<const Index> vertices);

}  // namespace graphood
