#pragma once

#include "graphood/graph.hpp"
#include "graphood/scores.hpp"

namespace graphood {

struct GoodConfig {
  /// Weight of the neighborhood mean, in [0, 1].
  double alpha = 0.0;

  void validate() const;
};

/// (1 - alpha) * s_v + alpha * mean_{w in N(v)} s_w for every vertex of g.
/// Isolated vertices keep their own score.
ScoreVector good_aggregate(const Graph& g, const ScoreVector& base, const GoodConfig& cfg);

}  // namespace graphood
