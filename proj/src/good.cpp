#include "graphood/good.hpp"

#include <algorithm>

namespace graphood {

void GoodConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("good: alpha must lie in [0,1]");
}

ScoreVector good_aggregate(const Graph& g, const ScoreVector& base, const GoodConfig& cfg) {
  cfg.validate();
  if (base.size() != g.num_vertices()) {
    throw ShapeError("good_aggregate: base scores must cover every vertex");
  }
  if (cfg.alpha == 0.0) return base;
  // s_v + alpha * mean(s_w - s_v): equal to the convex combination, and exact
  // wherever all neighbors share the vertex's score, so ties survive aggregation.
  const Vector& s = base.values;
  Vector out = s;
  for (Index v = 0; v < g.num_vertices(); ++v) {
    const auto nbrs = g.neighbors(v);
    if (nbrs.empty()) continue;
    double diff = 0.0;
    for (Index w : nbrs) diff += s[w] - s[v];
    out[v] = std::clamp(s[v] + cfg.alpha * (diff / double(nbrs.size())), 0.0, 1.0);
  }
  return ScoreVector{std::move(out)};
}

}  // namespace graphood
