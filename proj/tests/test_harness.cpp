#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "graphood/harness.hpp"
#include "graphood/io.hpp"
#include "support.hpp"

using namespace graphood;
using namespace graphood::testing;

namespace {

/// Fraction of (OOD, ID) pairs ranked correctly, ties counted half.
double brute_force_auroc(const std::vector<double>& s, const std::vector<bool>& truth) {
  double hits = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!truth[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (truth[j]) continue;
      pairs += 1.0;
      hits += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return hits / pairs;
}

Graph small_synth(std::uint64_t seed, int years = 0) {
  SynthConfig cfg;
  cfg.num_vertices = 160;
  cfg.num_classes = 3;
  cfg.p_in = 0.08;
  cfg.p_out = 0.005;
  cfg.feature_dim = 6;
  cfg.separation = 3.0;
  cfg.num_years = years;
  if (years > 0) {
    cfg.ood_class_id = 2;
    cfg.ood_fraction = 0.2;
  }
  cfg.seed = seed;
  return synth_generate(cfg);
}

PipelineConfig quick_pipeline() {
  PipelineConfig p;
  p.backbone.hidden_dim = 16;
  p.train.epochs = 40;
  return p;
}

std::vector<TaskStream> static_streams(const Graph& g, std::uint64_t seed) {
  std::vector<TaskStream> out;
  for (int k = 0; k < g.num_classes(); ++k) {
    out.push_back(make_static_tasks(g, k, SplitFractions{}, seed));
  }
  return out;
}

}  // namespace

TEST_CASE("AUROC examples") {
  const std::vector<double> s = {0.1, 0.4, 0.35, 0.8};
  const std::vector<bool> truth = {false, false, true, true};
  CHECK(metric_auroc(s, truth) == doctest::Approx(0.75).epsilon(1e-15));

  const std::vector<double> perfect = {0.1, 0.2, 0.9};
  CHECK(metric_auroc(perfect, {false, false, true}) == 1.0);
  const std::vector<double> flat = {0.5, 0.5, 0.5, 0.5};
  CHECK(metric_auroc(flat, {false, true, false, true}) == 0.5);

  CHECK_THROWS_AS(metric_auroc(flat, {true, true, true, true}), DataError);
  CHECK_THROWS_AS(metric_auroc(flat, {false, false, false, false}), DataError);
}

TEST_CASE("AUROC agrees with pair enumeration and ignores monotone maps") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> level(0, 9);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 5 + trial % 30;
    std::vector<double> s(n);
    std::vector<bool> truth(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = level(rng) / 10.0;  // coarse levels force ties
      truth[i] = (i % 3 == 0);
    }
    const double a = metric_auroc(s, truth);
    CHECK(std::abs(a - brute_force_auroc(s, truth)) < 1e-12);

    std::vector<double> mapped(n), affine(n);
    for (std::size_t i = 0; i < n; ++i) {
      mapped[i] = std::exp(s[i]);
      affine[i] = 0.25 * s[i] + 0.1;
    }
    CHECK(std::abs(metric_auroc(mapped, truth) - a) < 1e-12);
    CHECK(std::abs(metric_auroc(affine, truth) - a) < 1e-12);
  }
}

TEST_CASE("micro-F1 and ID accuracy examples") {
  CHECK(metric_micro_f1({true, false, true, false}, {true, false, false, false}) == 0.75);
  CHECK(metric_micro_f1({false, false}, {false, false}) == 1.0);

  const std::vector<int> predicted = {1, 2, 0, 1};
  const std::vector<int> labels = {1, 0, 0, 3};
  // The last vertex is OOD and ignored; two of three ID vertices are right.
  CHECK(metric_id_accuracy(predicted, labels, {false, false, false, true}) ==
        doctest::Approx(2.0 / 3.0));
  CHECK_THROWS_AS(metric_id_accuracy(predicted, labels, {true, true, true, true}), DataError);
}

TEST_CASE("stratified split respects the fractions per class") {
  std::vector<int> labels;
  for (int c = 0; c < 3; ++c) labels.insert(labels.end(), 10 + 7 * c, c);
  const auto split = stratified_split(labels, SplitFractions{0.6, 0.2, 0.2}, 3);
  for (int c = 0; c < 3; ++c) {
    int counts[3] = {0, 0, 0};
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == c) ++counts[static_cast<int>(split[i])];
    }
    const int n = 10 + 7 * c;
    CHECK(counts[0] + counts[1] + counts[2] == n);
    CHECK(std::abs(counts[0] - 0.6 * n) < 1.0);
    CHECK(std::abs(counts[1] - 0.2 * n) < 1.0);
  }
  CHECK(split == stratified_split(labels, SplitFractions{0.6, 0.2, 0.2}, 3));
  CHECK_THROWS_AS(stratified_split(labels, SplitFractions{0.6, 0.3, 0.2}, 3), ConfigError);
}

TEST_CASE("static tasks never train on held-out, validation-only or test vertices") {
  const Graph g = small_synth(1);
  const auto split = stratified_split(g.labels(), SplitFractions{}, 7);
  for (int k = 0; k < g.num_classes(); ++k) {
    const TaskStream s = make_static_tasks(g, k, split);
    REQUIRE(s.tasks.size() == 3);
    CHECK(s.tuning.has_value());
    const Task& t0 = s.tasks[0];
    const Task& t1 = s.tasks[1];
    const Task& t2 = s.tasks[2];
    CHECK_FALSE(t0.evaluated);
    CHECK_FALSE(t1.evaluated);
    CHECK(t2.evaluated);

    for (Index id : t0.train.original_ids) {
      CHECK(g.labels()[id] != k);
      CHECK(split[id] == SplitRole::train);
    }
    for (Index id : t2.train.original_ids) {
      CHECK(g.labels()[id] != k);
      CHECK(split[id] != SplitRole::test);
    }
    CHECK(t2.eval.graph.num_vertices() == g.num_vertices());
    for (std::size_t j = 0; j < t2.eval_vertices.size(); ++j) {
      const Index id = t2.eval.original_ids[t2.eval_vertices[j]];
      CHECK(split[id] == SplitRole::test);
      CHECK(t2.ood_truth[j] == (g.labels()[id] == k));
    }
    const std::set<int> known(t2.known_classes.begin(), t2.known_classes.end());
    CHECK(known.count(k) == 0);
    CHECK(known.size() == static_cast<std::size_t>(g.num_classes() - 1));

    // The tuning view keeps the held-out class so OOD vertices are present.
    const auto& tune = *s.tuning;
    CHECK(std::count(tune.ood_truth.begin(), tune.ood_truth.end(), true) > 0);
    for (Index v : tune.eval_vertices) CHECK(split[tune.eval.original_ids[v]] == SplitRole::val);
  }
  CHECK_THROWS_AS(make_static_tasks(g, 5, split), ConfigError);
}

TEST_CASE("two-class static stream on a toy graph") {
  const Graph g = make_graph({{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}}, {0, 0, 1, 1, 2, 2});
  const std::vector<SplitRole> split = {SplitRole::train, SplitRole::test, SplitRole::train,
                                        SplitRole::test,  SplitRole::train, SplitRole::test};
  const TaskStream s = make_static_tasks(g, 2, split);
  // No validation vertices: T1 and the tuning view are absent.
  REQUIRE(s.tasks.size() == 2);
  CHECK_FALSE(s.tuning.has_value());
  const Task& t2 = s.tasks[1];
  CHECK(t2.eval_vertices == std::vector<Index>{1, 3, 5});
  CHECK(t2.ood_truth == std::vector<bool>{false, false, true});
  CHECK(t2.train.original_ids == std::vector<Index>{0, 2});
}

TEST_CASE("temporal stream with a class that appears in the last year") {
  Matrix x = Matrix::Zero(9, 1);
  const std::vector<int> labels = {0, 1, 0, 1, 0, 1, 2, 2, 0};
  const std::vector<int> years = {1, 1, 1, 2, 2, 2, 3, 3, 3};
  const Graph g = build_graph({{0, 3}, {1, 4}, {6, 7}, {2, 8}}, 9, x, labels, years);
  const TaskStream s = make_temporal_tasks(g, 1);
  REQUIRE(s.tasks.size() == 2);
  CHECK(s.tuning.has_value());
  CHECK(s.tasks[0].name == "t=2");
  CHECK(s.tasks[0].train.graph.num_vertices() == 3);
  CHECK(s.tasks[0].eval_vertices.size() == 3);
  CHECK(std::none_of(s.tasks[0].ood_truth.begin(), s.tasks[0].ood_truth.end(), [](bool b) { return b; }));
  CHECK(s.tasks[1].ood_truth == std::vector<bool>{true, true, false});
  CHECK(s.tasks[1].known_classes == std::vector<int>{0, 1});
  for (const Task& t : s.tasks) CHECK(t.evaluated);

  CHECK_THROWS_AS(make_temporal_tasks(g, 3), ConfigError);
  const Graph no_years = make_graph({{0, 1}}, {0, 1});
  CHECK_THROWS_AS(make_temporal_tasks(no_years, 1), DataError);
}

TEST_CASE("known classes only grow along a temporal stream") {
  const Graph g = small_synth(2, 5);
  const TaskStream s = make_temporal_tasks(g, 1);
  CHECK(s.tasks.size() == 4);
  std::set<int> previous;
  for (const Task& t : s.tasks) {
    const std::set<int> known(t.known_classes.begin(), t.known_classes.end());
    CHECK(std::includes(known.begin(), known.end(), previous.begin(), previous.end()));
    previous = known;
  }
  // The planted class only exists in the last year, so only the last task has OOD vertices.
  const auto& last = s.tasks.back().ood_truth;
  CHECK(std::count(last.begin(), last.end(), true) > 0);
}

TEST_CASE("incompatible pipelines are rejected") {
  PipelineConfig p;
  p.scorer.kind = ScorerKind::isomax;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = PipelineConfig{};
  p.scorer.kind = ScorerKind::gdoc;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p.head.kind = HeadKind::sigmoid_bce_weighted;
  CHECK_NOTHROW(p.validate());
  p.threshold.kind = ThresholdKind::openwgl;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = PipelineConfig{};
  p.threshold.kind = ThresholdKind::gdoc;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = PipelineConfig{};
  p.head.kind = HeadKind::isomax_plus;
  CHECK_THROWS_AS(p.validate(), ConfigError);  // msp needs softmax
  p.good.enabled = true;
  p.good.alpha = 2.0;
  p.scorer.kind = ScorerKind::isomax;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  CHECK_THROWS_AS(parse_scorer_kind("energy"), ConfigError);
  CHECK_THROWS_AS(parse_threshold_kind("otsu"), ConfigError);
}

TEST_CASE("GOOD with alpha zero matches a run without GOOD") {
  const Graph g = small_synth(3);
  const auto streams = static_streams(g, 4);
  PipelineConfig off = quick_pipeline();
  PipelineConfig zero = off;
  zero.good.enabled = true;
  zero.good.alpha = 0.0;
  const EvalReport a = run_lifelong(streams, off, 11);
  const EvalReport b = run_lifelong(streams, zero, 11);
  REQUIRE(a.tasks.size() == b.tasks.size());
  for (std::size_t i = 0; i < a.tasks.size(); ++i) {
    CHECK(a.tasks[i].auroc == b.tasks[i].auroc);
    CHECK(a.tasks[i].micro_f1 == b.tasks[i].micro_f1);
  }
}

TEST_CASE("runs are reproducible and thread count does not change results") {
  const Graph g = small_synth(4);
  const auto streams = static_streams(g, 5);
  PipelineConfig p = quick_pipeline();
  p.scorer.kind = ScorerKind::odin;
  p.scorer.odin = OdinConfig{10.0, 0.01};
  p.good.enabled = true;
  p.good.tune = true;
  p.threshold.kind = ThresholdKind::open_wrf;
  p.threshold.open_wrf.q = 0.3;
  p.threshold.open_wrf.epochs = 30;
  const EvalReport a = run_lifelong(streams, p, 21, 1);
  const EvalReport b = run_lifelong(streams, p, 21, 3);
  REQUIRE(a.tasks.size() == 3);
  for (std::size_t i = 0; i < a.tasks.size(); ++i) {
    CHECK(a.tasks[i].name == b.tasks[i].name);
    CHECK(a.tasks[i].auroc == b.tasks[i].auroc);
    CHECK(a.tasks[i].micro_f1 == b.tasks[i].micro_f1);
    CHECK(a.tasks[i].id_accuracy == b.tasks[i].id_accuracy);
    CHECK(a.tasks[i].alpha == b.tasks[i].alpha);
  }
  CHECK(a.mean_auroc == b.mean_auroc);
}

TEST_CASE("report means are unweighted task means") {
  EvalReport r;
  TaskResult t1, t2, t3;
  t1.auroc = 0.8;
  t1.id_accuracy = 0.9;
  t1.micro_f1 = 0.5;
  t2.auroc = 0.6;
  t2.micro_f1 = 0.7;
  t3.id_accuracy = 0.7;
  t3.micro_f1 = 0.9;
  r.tasks = {t1, t2, t3};
  finalize_means(r);
  CHECK(r.mean_auroc == doctest::Approx(0.7));
  CHECK(r.mean_id_accuracy == doctest::Approx(0.8));
  CHECK(r.mean_micro_f1 == doctest::Approx(0.7));
  CHECK(r.auroc_excluded == 1);
  CHECK(r.id_accuracy_excluded == 1);

  const Graph g = small_synth(5);
  const auto streams = static_streams(g, 6);
  const EvalReport real = run_lifelong(streams, quick_pipeline(), 3);
  double sum = 0.0;
  for (const auto& t : real.tasks) sum += *t.auroc;
  CHECK(real.mean_auroc == doctest::Approx(sum / double(real.tasks.size())).epsilon(1e-15));
}

TEST_CASE("alpha sweep and tuning") {
  const Graph g = small_synth(6);
  const auto streams = static_streams(g, 7);
  const PipelineConfig p = quick_pipeline();
  const auto grid = alpha_grid();
  CHECK(grid.size() == 11);
  const auto curve = sweep_alpha(streams, p, 5, grid);
  REQUIRE(curve.size() == 11);
  for (const auto& pt : curve) {
    CHECK(pt.value >= 0.0);
    CHECK(pt.value <= 1.0);
  }
  // The alpha = 0 point is the plain run.
  const EvalReport plain = run_lifelong(streams, p, 5);
  CHECK(curve[0].value == doctest::Approx(plain.mean_auroc).epsilon(1e-12));

  // Constant scores give a flat 0.5 curve, and tuning keeps the smallest alpha.
  const Task& tune = *streams[0].tuning;
  const ScoreVector constant{Vector::Constant(tune.eval.graph.num_vertices(), 0.3)};
  CHECK(tune_alpha(tune, constant) == 0.0);
  for (double a : grid) {
    const ScoreVector s = good_aggregate(tune.eval.graph, constant, GoodConfig{a});
    CHECK(metric_auroc(eval_scores(tune, s), tune.ood_truth) == 0.5);
  }
}

TEST_CASE("tuning picks the grid alpha with the best AUROC") {
  const Graph g = small_synth(7);
  const auto streams = static_streams(g, 8);
  const Task& tune = *streams[1].tuning;
  const ScoreVector base{random_matrix(tune.eval.graph.num_vertices(), 1, 3).col(0).cwiseAbs().cwiseMin(1.0)};
  const double chosen = tune_alpha(tune, base);
  double best = -1.0;
  for (double a : alpha_grid()) {
    const double auc = metric_auroc(
        eval_scores(tune, good_aggregate(tune.eval.graph, base, GoodConfig{a})), tune.ood_truth);
    best = std::max(best, auc);
  }
  const double at_chosen = metric_auroc(
      eval_scores(tune, good_aggregate(tune.eval.graph, base, GoodConfig{chosen})), tune.ood_truth);
  CHECK(at_chosen == best);
}

TEST_CASE("q sweep: naive threshold at one calls everything ID") {
  const Graph g = small_synth(8);
  const auto streams = static_streams(g, 9);
  PipelineConfig p = quick_pipeline();
  p.threshold.open_wrf.epochs = 20;
  const std::vector<double> qs = {0.1, 0.3};
  const std::vector<double> deltas = {0.5, 1.0};
  const QSweep sweep = sweep_q(streams, p, 2, qs, deltas);
  REQUIRE(sweep.open_wrf.size() == 2);
  REQUIRE(sweep.naive.size() == 2);
  double all_id = 0.0;
  for (const auto& s : streams) {
    const Task& t = s.tasks.back();
    all_id += double(std::count(t.ood_truth.begin(), t.ood_truth.end(), false)) / double(t.ood_truth.size());
  }
  CHECK(sweep.naive[1].value == doctest::Approx(all_id / double(streams.size())).epsilon(1e-12));
}

TEST_CASE("trapezoid area") {
  const std::vector<CurvePoint> c = {{0.0, 0.0}, {0.5, 1.0}, {1.0, 1.0}};
  CHECK(trapezoid_area(c) == doctest::Approx(0.75));
  CHECK(trapezoid_area(std::vector<CurvePoint>{{0.2, 0.4}}) == 0.0);
}

TEST_CASE("every scorer and threshold combination runs end to end") {
  const Graph g = small_synth(9);
  const auto streams = static_streams(g, 10);
  struct Combo {
    HeadKind head;
    ScorerKind scorer;
    ThresholdKind threshold;
  };
  const std::vector<Combo> combos = {
      {HeadKind::softmax_ce, ScorerKind::msp, ThresholdKind::naive},
      {HeadKind::softmax_ce, ScorerKind::odin, ThresholdKind::openwgl},
      {HeadKind::isomax_plus, ScorerKind::isomax, ThresholdKind::openwgl},
      {HeadKind::sigmoid_bce_weighted, ScorerKind::gdoc, ThresholdKind::gdoc},
      {HeadKind::sigmoid_bce_weighted, ScorerKind::gdoc, ThresholdKind::open_wrf},
  };
  for (BackboneKind kind : {BackboneKind::gcn, BackboneKind::sage_mean, BackboneKind::graph_mlp}) {
    for (const Combo& c : combos) {
      PipelineConfig p = quick_pipeline();
      p.train.epochs = 15;
      p.backbone.kind = kind;
      p.backbone.batch_size = 32;
      p.head.kind = c.head;
      p.scorer.kind = c.scorer;
      p.scorer.odin = OdinConfig{5.0, 0.005};
      p.threshold.kind = c.threshold;
      p.threshold.open_wrf.epochs = 10;
      p.threshold.open_wrf.q = 0.3;
      p.good.enabled = true;
      p.good.alpha = 0.5;
      const EvalReport r = run_lifelong(streams, p, 1);
      CAPTURE(to_string(kind));
      CAPTURE(to_string(c.scorer));
      CHECK(r.tasks.size() == 3);
      CHECK(r.mean_auroc >= 0.0);
      CHECK(r.mean_auroc <= 1.0);
    }
  }
}
