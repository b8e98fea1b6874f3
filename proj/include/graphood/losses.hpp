#pragma once

#include <span>

#include "graphood/autodiff.hpp"

namespace graphood {

/// Mean of -log softmax(logits)[row, target] over the selected rows.
Var loss_softmax_ce(Var logits, std::span<const int> targets, std::span<const Index> rows);

/// Per-class weights for the sigmoid head. The positive term of class k is
/// scaled by positive[k], the negative term by negative[k].
struct BceWeights {
  Vector positive;
  Vector negative;
  /// Some class covers every selected row, so its positive weight is zero.
  bool degenerate = false;
};

/// (n - n_k) / n on positives, 1 on negatives, counted over the selected rows.
/// Unweighted (all ones) when class_weighting is false.
BceWeights class_balance_weights(std::span<const int> targets, std::span<const Index> rows,
                                 Index num_classes, bool class_weighting = true);

/// Sum over classes of weighted sigmoid binary cross-entropy, mean over rows.
/// targets_onehot is rows(logits) x classes with entries in {0, 1}.
Var loss_bce_weighted(Var logits, const Matrix& targets_onehot, std::span<const Index> rows,
                      const BceWeights& weights);

/// Prototype logits -E * d * ||h/|h| - p/|p||.
Var isomax_logits(Var embeddings, Var prototypes, Var distance_scale, double entropic_scale);

/// Softmax cross-entropy over isomax_logits.
Var loss_isomax(Var embeddings, Var prototypes, Var distance_scale, double entropic_scale,
                std::span<const int> targets, std::span<const Index> rows);

/// Neighborhood contrastive loss over a batch of rows of z. Pairs (i, j) with
/// j in the r-hop mask of i are positives (binary weight). A sample without an
/// in-batch positive contributes 0; the sum is divided by the batch size.
Var loss_ncontrast(Var z, const SparsePattern& hop_mask, double tau,
                   std::span<const Index> batch);

}  // namespace graphood
