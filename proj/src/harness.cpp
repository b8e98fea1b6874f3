#include "graphood/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace graphood {

// ---------------------------------------------------------------------------
// Metrics

double metric_auroc(std::span<const double> scores, const std::vector<bool>& ood_truth) {
  const std::size_t n = scores.size();
  if (ood_truth.size() != n) throw ShapeError("auroc: scores and truth differ in length");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double positive_rank_sum = 0.0;
  double positives = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * double(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) {
      if (ood_truth[order[t]]) {
        positive_rank_sum += midrank;
        positives += 1.0;
      }
    }
    i = j + 1;
  }
  const double negatives = double(n) - positives;
  if (positives == 0.0 || negatives == 0.0) {
    throw DataError("auroc: needs both ID and OOD vertices");
  }
  const double u = positive_rank_sum - positives * (positives + 1.0) / 2.0;
  return u / (positives * negatives);
}

double metric_micro_f1(const std::vector<bool>& ood_mask, const std::vector<bool>& ood_truth) {
  if (ood_mask.size() != ood_truth.size()) throw ShapeError("micro_f1: length mismatch");
  if (ood_mask.empty()) throw DataError("micro_f1: no decisions");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ood_mask.size(); ++i) correct += ood_mask[i] == ood_truth[i];
  return double(correct) / double(ood_mask.size());
}

double metric_id_accuracy(std::span<const int> predictions, std::span<const int> labels,
                          const std::vector<bool>& ood_truth) {
  if (predictions.size() != labels.size() || labels.size() != ood_truth.size()) {
    throw ShapeError("id_accuracy: length mismatch");
  }
  std::size_t id = 0, correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (ood_truth[i]) continue;
    ++id;
    correct += predictions[i] == labels[i];
  }
  if (id == 0) throw DataError("id_accuracy: no ID vertices");
  return double(correct) / double(id);
}

// ---------------------------------------------------------------------------
// Task streams

void SplitFractions::validate() const {
  if (train <= 0.0 || val < 0.0 || test <= 0.0) {
    throw ConfigError("split fractions must be positive");
  }
  if (std::abs(train + val + test - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
}

std::vector<SplitRole> stratified_split(std::span<const int> labels, const SplitFractions& f,
                                        std::uint64_t seed) {
  f.validate();
  std::map<int, std::vector<Index>> members;
  for (std::size_t v = 0; v < labels.size(); ++v) members[labels[v]].push_back(static_cast<Index>(v));

  std::vector<SplitRole> roles(labels.size(), SplitRole::test);
  const std::array<double, 3> fractions{f.train, f.val, f.test};
  for (auto& [cls, ids] : members) {
    const double m = double(ids.size());
    std::array<std::size_t, 3> counts{};
    std::array<double, 3> remainder{};
    std::size_t assigned = 0;
    for (std::size_t r = 0; r < 3; ++r) {
      const double exact = m * fractions[r];
      counts[r] = static_cast<std::size_t>(std::floor(exact + 1e-9));
      remainder[r] = exact - double(counts[r]);
      assigned += counts[r];
    }
    std::array<std::size_t, 3> by_remainder{0, 1, 2};
    std::stable_sort(by_remainder.begin(), by_remainder.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t i = 0; assigned < ids.size(); ++i, ++assigned) ++counts[by_remainder[i % 3]];

    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(cls)));
    std::shuffle(ids.begin(), ids.end(), rng);
    std::size_t pos = 0;
    for (std::size_t r = 0; r < 3; ++r) {
      for (std::size_t c = 0; c < counts[r]; ++c) roles[ids[pos++]] = static_cast<SplitRole>(r);
    }
  }
  return roles;
}

std::string_view to_string(StreamKind kind) {
  return kind == StreamKind::static_loco ? "static_loco" : "temporal";
}

StreamKind parse_stream_kind(std::string_view name) {
  if (name == "static_loco") return StreamKind::static_loco;
  if (name == "temporal") return StreamKind::temporal;
  throw ConfigError("unknown protocol kind '" + std::string(name) + "'");
}

namespace {

std::vector<int> distinct_labels(const Graph& g) {
  std::set<int> s(g.labels().begin(), g.labels().end());
  return {s.begin(), s.end()};
}

// Eval vertices of `eval` selected by a predicate on the original vertex id.
template <typename Pred>
std::vector<Index> select_vertices(const Subgraph& eval, Pred pred) {
  std::vector<Index> out;
  for (std::size_t i = 0; i < eval.original_ids.size(); ++i) {
    if (pred(eval.original_ids[i])) out.push_back(static_cast<Index>(i));
  }
  return out;
}

void fill_truth(Task& t) {
  t.ood_truth.clear();
  const auto& labels = t.eval.graph.labels();
  for (Index v : t.eval_vertices) {
    t.ood_truth.push_back(!std::binary_search(t.known_classes.begin(), t.known_classes.end(),
                                              labels[v]));
  }
}

}  // namespace

TaskStream make_static_tasks(const Graph& g, int holdout_class, const SplitFractions& fractions,
                             std::uint64_t seed) {
  return make_static_tasks(g, holdout_class, stratified_split(g.labels(), fractions, seed));
}

TaskStream make_static_tasks(const Graph& g, int holdout_class,
                             const std::vector<SplitRole>& split) {
  const Index n = g.num_vertices();
  if (static_cast<Index>(split.size()) != n) throw ShapeError("static tasks: split length mismatch");
  if (holdout_class < 0 || holdout_class >= g.num_classes()) {
    throw ConfigError(fmt::format("static tasks: holdout class {} out of range", holdout_class));
  }
  const auto& labels = g.labels();
  auto mask = [&](auto pred) {
    std::vector<bool> m(static_cast<std::size_t>(n));
    for (Index v = 0; v < n; ++v) m[v] = pred(v);
    return m;
  };
  auto role = [&](Index v) { return split[v]; };
  auto known = [&](Index v) { return labels[v] != holdout_class; };

  const auto t0_mask = mask([&](Index v) { return role(v) == SplitRole::train && known(v); });
  const auto t1_mask = mask([&](Index v) { return role(v) != SplitRole::test && known(v); });
  const auto view_mask = mask([&](Index v) { return role(v) != SplitRole::test; });
  if (std::count(t0_mask.begin(), t0_mask.end(), true) == 0) {
    throw DataError("static tasks: no training vertex left outside the held-out class");
  }

  TaskStream stream;
  stream.origin = StreamKind::static_loco;
  stream.holdout_class = holdout_class;
  const Subgraph t0 = induced_subgraph(g, t0_mask);
  const Subgraph t1 = induced_subgraph(g, t1_mask);
  std::vector<bool> all(static_cast<std::size_t>(n), true);
  const Subgraph full = induced_subgraph(g, all);
  const std::vector<int> known_classes = distinct_labels(t0.graph);
  if (known_classes.size() < 2) throw DataError("static tasks: fewer than two known classes");

  auto make = [&](std::string name, const Subgraph& train, const Subgraph& eval,
                  SplitRole scored, bool evaluated) {
    Task t;
    t.name = fmt::format("{}/holdout={}", name, holdout_class);
    t.train = train;
    t.eval = eval;
    t.eval_vertices = select_vertices(eval, [&](Index v) { return role(v) == scored; });
    if (t.eval_vertices.empty()) throw DataError("static tasks: empty evaluation set in " + name);
    t.known_classes = distinct_labels(train.graph);
    t.evaluated = evaluated;
    fill_truth(t);
    return t;
  };
  stream.tasks.push_back(make("T0", t0, t0, SplitRole::train, false));
  if (std::count(t1_mask.begin(), t1_mask.end(), true) > std::count(t0_mask.begin(), t0_mask.end(), true)) {
    stream.tasks.push_back(make("T1", t0, t1, SplitRole::val, false));
    stream.tuning = make("tune", t0, induced_subgraph(g, view_mask), SplitRole::val, false);
  }
  stream.tasks.push_back(make("T2", t1, full, SplitRole::test, true));
  return stream;
}

TaskStream make_temporal_tasks(const Graph& g, int t0) {
  if (!g.has_timestamps()) throw DataError("temporal tasks: graph has no timestamps");
  const auto& years = g.timestamps();
  const std::set<int> observed(years.begin(), years.end());
  std::vector<int> steps;
  for (int y : observed) {
    if (y >= t0) steps.push_back(y);
  }
  if (!observed.empty() && *observed.begin() > t0) {
    spdlog::warn("temporal tasks: no vertex at or before t0 = {}; first slice is {}", t0,
                 *observed.begin());
  }
  if (steps.size() < 2) {
    throw ConfigError(fmt::format("temporal tasks: t0 = {} leaves no later year to evaluate", t0));
  }
  if (steps.front() != t0) {
    spdlog::warn("temporal tasks: year {} has no vertices; starting at {}", t0, steps.front());
  }
  TaskStream stream;
  stream.origin = StreamKind::temporal;
  const Index n = g.num_vertices();
  for (std::size_t i = 0; i + 1 < steps.size(); ++i) {
    const int now = steps[i];
    const int next = steps[i + 1];
    std::vector<bool> train_mask(static_cast<std::size_t>(n)), eval_mask(static_cast<std::size_t>(n));
    for (Index v = 0; v < n; ++v) {
      train_mask[v] = years[v] <= now;
      eval_mask[v] = years[v] <= next;
    }
    Task t;
    t.name = fmt::format("t={}", next);
    t.train = induced_subgraph(g, train_mask);
    t.eval = induced_subgraph(g, eval_mask);
    t.eval_vertices = select_vertices(t.eval, [&](Index v) { return years[v] == next; });
    t.known_classes = distinct_labels(t.train.graph);
    fill_truth(t);
    stream.tasks.push_back(std::move(t));
  }
  stream.tuning = stream.tasks.front();
  return stream;
}

// ---------------------------------------------------------------------------
// Pipeline

std::string_view to_string(ScorerKind kind) {
  switch (kind) {
    case ScorerKind::msp: return "msp";
    case ScorerKind::odin: return "odin";
    case ScorerKind::isomax: return "isomax";
    case ScorerKind::gdoc: return "gdoc";
  }
  return "?";
}

std::string_view to_string(ThresholdKind kind) {
  switch (kind) {
    case ThresholdKind::naive: return "naive";
    case ThresholdKind::gdoc: return "gdoc";
    case ThresholdKind::openwgl: return "openwgl";
    case ThresholdKind::open_wrf: return "open_wrf";
  }
  return "?";
}

ScorerKind parse_scorer_kind(std::string_view name) {
  if (name == "msp") return ScorerKind::msp;
  if (name == "odin") return ScorerKind::odin;
  if (name == "isomax") return ScorerKind::isomax;
  if (name == "gdoc") return ScorerKind::gdoc;
  throw ConfigError("unknown scorer kind '" + std::string(name) + "'");
}

ThresholdKind parse_threshold_kind(std::string_view name) {
  if (name == "naive") return ThresholdKind::naive;
  if (name == "gdoc") return ThresholdKind::gdoc;
  if (name == "openwgl") return ThresholdKind::openwgl;
  if (name == "open_wrf") return ThresholdKind::open_wrf;
  throw ConfigError("unknown threshold kind '" + std::string(name) + "'");
}

void PipelineConfig::validate() const {
  backbone.validate();
  head.validate();
  train.validate();
  scorer.odin.validate();
  if (good.enabled && !good.tune) GoodConfig{good.alpha}.validate();
  auto require_head = [&](HeadKind needed, std::string_view what) {
    if (head.kind != needed) {
      throw ConfigError(fmt::format("{} requires the {} head, got {}", what, to_string(needed),
                                    to_string(head.kind)));
    }
  };
  switch (scorer.kind) {
    case ScorerKind::msp:
    case ScorerKind::odin: require_head(HeadKind::softmax_ce, to_string(scorer.kind)); break;
    case ScorerKind::isomax: require_head(HeadKind::isomax_plus, "isomax scorer"); break;
    case ScorerKind::gdoc: require_head(HeadKind::sigmoid_bce_weighted, "gdoc scorer"); break;
  }
  switch (threshold.kind) {
    case ThresholdKind::naive:
      if (!(threshold.delta >= 0.0 && threshold.delta <= 1.0)) {
        throw ConfigError("naive threshold: delta must be in [0,1]");
      }
      break;
    case ThresholdKind::gdoc: require_head(HeadKind::sigmoid_bce_weighted, "gdoc threshold"); break;
    case ThresholdKind::openwgl:
      if (head.kind == HeadKind::sigmoid_bce_weighted) {
        throw ConfigError("openwgl threshold needs softmax probabilities, not the sigmoid head");
      }
      break;
    case ThresholdKind::open_wrf: threshold.open_wrf.validate(); break;
  }
}

std::vector<double> alpha_grid() {
  std::vector<double> out;
  for (int i = 0; i <= 10; ++i) out.push_back(i / 10.0);
  return out;
}

std::vector<double> q_grid() {
  std::vector<double> out;
  for (int i = 1; i <= 10; ++i) out.push_back(i * 0.05);
  return out;
}

TaskScores score_task(const Task& task, const PipelineConfig& cfg, std::uint64_t seed) {
  const Graph& train_graph = task.train.graph;
  const Graph& eval_graph = task.eval.graph;
  std::vector<Index> rows(static_cast<std::size_t>(train_graph.num_vertices()));
  std::iota(rows.begin(), rows.end(), Index{0});

  TrainConfig train_cfg = cfg.train;
  train_cfg.seed = seed;
  TrainResult trained = train(train_graph, cfg.backbone, cfg.head, train_cfg, rows);

  TaskScores out;
  out.degenerate_class_weight = trained.degenerate_class_weight;
  out.model = std::move(trained.state);
  const ForwardResult eval_fw = forward(eval_graph, eval_graph.features(), out.model);
  out.logits = eval_fw.logits;

  std::optional<ForwardResult> train_fw;
  auto train_forward = [&]() -> const ForwardResult& {
    if (!train_fw) train_fw = forward(train_graph, train_graph.features(), out.model);
    return *train_fw;
  };

  switch (cfg.scorer.kind) {
    case ScorerKind::msp: out.base = score_msp(eval_fw.logits); break;
    case ScorerKind::odin: out.base = score_odin(out.model, eval_graph, cfg.scorer.odin); break;
    case ScorerKind::isomax: {
      const auto normalizer = IsoMaxNormalizer::fit(
          isomax_raw_scores(train_forward().embeddings, out.model.prototypes));
      out.base = score_isomax(eval_fw.embeddings, out.model.prototypes, normalizer);
      break;
    }
    case ScorerKind::gdoc: out.base = score_gdoc(eval_fw.logits); break;
  }
  check_unit_interval(out.base);

  if (cfg.threshold.kind == ThresholdKind::gdoc) {
    out.train_sigmoid = sigmoid_matrix(train_forward().logits);
    for (int label : train_graph.labels()) out.train_class_index.push_back(out.model.class_index(label));
  }
  return out;
}

std::vector<double> eval_scores(const Task& task, const ScoreVector& scores) {
  std::vector<double> out;
  out.reserve(task.eval_vertices.size());
  for (Index v : task.eval_vertices) out.push_back(scores[v]);
  return out;
}

namespace {

bool has_both_classes(const std::vector<bool>& truth) {
  const auto ood = std::count(truth.begin(), truth.end(), true);
  return ood > 0 && ood < static_cast<std::ptrdiff_t>(truth.size());
}

Matrix gather(const Matrix& m, std::span<const Index> rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(rows[i]);
  return out;
}

ThresholdDecision decide(const Task& task, const TaskScores& ts, const ScoreVector& scores,
                         const ThresholdConfig& cfg, std::uint64_t seed) {
  switch (cfg.kind) {
    case ThresholdKind::naive: return naive_threshold(scores, task.eval_vertices, cfg.delta);
    case ThresholdKind::gdoc: {
      const GdocThresholds th =
          gdoc_thresholds(ts.train_sigmoid, ts.train_class_index, cfg.alpha_doc, cfg.delta_min);
      if (!th.empty_classes.empty()) {
        spdlog::warn("{}: {} classes without training rows use delta_min", task.name,
                     th.empty_classes.size());
      }
      return gdoc_decide(gather(sigmoid_matrix(ts.logits), task.eval_vertices), th.thresholds)
          .decision;
    }
    case ThresholdKind::openwgl: {
      const Matrix probs = gather(softmax_rows(ts.logits), task.eval_vertices);
      return openwgl_decide(probs, openwgl_threshold(probs));
    }
    case ThresholdKind::open_wrf: {
      OpenWrfConfig wrf = cfg.open_wrf;
      wrf.seed = derive_seed(seed, 2);
      return open_wrf(task.eval.graph, scores, task.eval_vertices, wrf);
    }
  }
  throw ConfigError("unsupported threshold kind");
}

TaskEvaluation evaluate_task(const Task& task, const TaskScores& ts, double alpha,
                             const PipelineConfig& cfg, std::uint64_t seed) {
  TaskEvaluation out;
  out.task = &task;
  out.scores = good_aggregate(task.eval.graph, ts.base, GoodConfig{alpha});
  const ScoreVector& scores = out.scores;
  check_unit_interval(scores);

  TaskResult& r = out.result;
  r.name = task.name;
  r.alpha = alpha;
  r.num_eval = static_cast<Index>(task.eval_vertices.size());
  r.num_ood = std::count(task.ood_truth.begin(), task.ood_truth.end(), true);
  r.degenerate_class_weight = ts.degenerate_class_weight;

  if (has_both_classes(task.ood_truth)) r.auroc = metric_auroc(eval_scores(task, scores), task.ood_truth);

  out.decision = decide(task, ts, scores, cfg.threshold, seed);
  r.micro_f1 = metric_micro_f1(out.decision.ood_mask, task.ood_truth);

  if (r.num_ood < r.num_eval) {
    const std::vector<int> predicted =
        predict_classes(ts.model, gather(ts.logits, task.eval_vertices));
    std::vector<int> labels;
    for (Index v : task.eval_vertices) labels.push_back(task.eval.graph.labels()[v]);
    r.id_accuracy = metric_id_accuracy(predicted, labels, task.ood_truth);
  }
  return out;
}

// Runs fn(i) for i in [0, count) on up to `threads` workers, rethrowing the
// first failure after all workers stop.
template <typename Fn>
void parallel_for(std::size_t count, int threads, Fn fn) {
  const std::size_t workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), 1, std::max<std::size_t>(count, 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::uint64_t task_seed(std::uint64_t fold_seed, std::size_t task) {
  return derive_seed(fold_seed, 10 + task);
}

double choose_alpha(const TaskStream& stream, const PipelineConfig& cfg, std::uint64_t fold_seed) {
  if (!cfg.good.enabled) return 0.0;
  if (!cfg.good.tune) return cfg.good.alpha;
  if (!stream.tuning) throw ConfigError("good: alpha tuning requested but the stream has no tuning task");
  const TaskScores ts = score_task(*stream.tuning, cfg, derive_seed(fold_seed, 1));
  return tune_alpha(*stream.tuning, ts.base);
}

std::vector<TaskEvaluation> run_stream(const TaskStream& stream, const PipelineConfig& cfg,
                                       std::uint64_t fold_seed) {
  const double alpha = choose_alpha(stream, cfg, fold_seed);
  std::vector<TaskEvaluation> out;
  for (std::size_t i = 0; i < stream.tasks.size(); ++i) {
    const Task& task = stream.tasks[i];
    if (!task.evaluated) continue;
    const std::uint64_t seed = task_seed(fold_seed, i);
    spdlog::info("task {}: {} eval vertices", task.name, task.eval_vertices.size());
    TaskEvaluation e = evaluate_task(task, score_task(task, cfg, seed), alpha, cfg, seed);
    e.result.holdout_class = stream.holdout_class;
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace

double tune_alpha(const Task& task, const ScoreVector& base) {
  if (!has_both_classes(task.ood_truth)) {
    spdlog::warn("{}: tuning task lacks ID or OOD vertices; alpha stays 0", task.name);
    return 0.0;
  }
  double best_alpha = 0.0;
  double best = -1.0;
  for (double a : alpha_grid()) {
    const ScoreVector s = good_aggregate(task.eval.graph, base, GoodConfig{a});
    const double auc = metric_auroc(eval_scores(task, s), task.ood_truth);
    if (auc > best) {
      best = auc;
      best_alpha = a;
    }
  }
  return best_alpha;
}

void finalize_means(EvalReport& report) {
  double acc = 0.0, auc = 0.0, f1 = 0.0;
  int n_acc = 0, n_auc = 0;
  report.auroc_excluded = 0;
  report.id_accuracy_excluded = 0;
  for (const auto& t : report.tasks) {
    f1 += t.micro_f1;
    if (t.auroc) {
      auc += *t.auroc;
      ++n_auc;
    } else {
      ++report.auroc_excluded;
    }
    if (t.id_accuracy) {
      acc += *t.id_accuracy;
      ++n_acc;
    } else {
      ++report.id_accuracy_excluded;
    }
  }
  const double n = double(report.tasks.size());
  report.mean_micro_f1 = n > 0 ? f1 / n : 0.0;
  report.mean_auroc = n_auc > 0 ? auc / n_auc : 0.0;
  report.mean_id_accuracy = n_acc > 0 ? acc / n_acc : 0.0;
}

std::vector<TaskEvaluation> evaluate_streams(std::span<const TaskStream> streams,
                                             const PipelineConfig& cfg, std::uint64_t seed,
                                             int threads) {
  cfg.validate();
  if (streams.empty()) throw ConfigError("no task streams to evaluate");
  std::vector<std::vector<TaskEvaluation>> per_stream(streams.size());
  parallel_for(streams.size(), threads, [&](std::size_t f) {
    per_stream[f] = run_stream(streams[f], cfg, derive_seed(seed, f));
  });
  std::vector<TaskEvaluation> out;
  for (auto& rows : per_stream) {
    for (auto& r : rows) out.push_back(std::move(r));
  }
  return out;
}

EvalReport run_lifelong(std::span<const TaskStream> streams, const PipelineConfig& cfg,
                        std::uint64_t seed, int threads) {
  const auto start = std::chrono::steady_clock::now();
  EvalReport report;
  for (auto& e : evaluate_streams(streams, cfg, seed, threads)) {
    report.tasks.push_back(std::move(e.result));
  }
  report.origin = streams.front().origin;
  finalize_means(report);
  report.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

namespace {

struct ScoredTask {
  const Task* task;
  TaskScores scores;
  std::uint64_t seed;
  double alpha;
};

std::vector<ScoredTask> score_streams(std::span<const TaskStream> streams, const PipelineConfig& cfg,
                                      std::uint64_t seed, int threads, bool with_alpha) {
  std::vector<std::vector<ScoredTask>> per_stream(streams.size());
  parallel_for(streams.size(), threads, [&](std::size_t f) {
    const std::uint64_t fold_seed = derive_seed(seed, f);
    const double alpha = with_alpha ? choose_alpha(streams[f], cfg, fold_seed) : 0.0;
    for (std::size_t i = 0; i < streams[f].tasks.size(); ++i) {
      const Task& task = streams[f].tasks[i];
      if (!task.evaluated) continue;
      const std::uint64_t s = task_seed(fold_seed, i);
      per_stream[f].push_back(ScoredTask{&task, score_task(task, cfg, s), s, alpha});
    }
  });
  std::vector<ScoredTask> out;
  for (auto& v : per_stream) {
    for (auto& t : v) out.push_back(std::move(t));
  }
  return out;
}

}  // namespace

std::vector<CurvePoint> sweep_alpha(std::span<const TaskStream> streams, const PipelineConfig& cfg,
                                    std::uint64_t seed, std::span<const double> alphas,
                                    int threads) {
  cfg.validate();
  const auto scored = score_streams(streams, cfg, seed, threads, false);
  std::vector<CurvePoint> curve;
  for (double a : alphas) {
    double total = 0.0;
    int count = 0;
    for (const auto& st : scored) {
      if (!has_both_classes(st.task->ood_truth)) continue;
      const ScoreVector s = good_aggregate(st.task->eval.graph, st.scores.base, GoodConfig{a});
      total += metric_auroc(eval_scores(*st.task, s), st.task->ood_truth);
      ++count;
    }
    if (count == 0) throw DataError("sweep_alpha: no task has both ID and OOD vertices");
    curve.push_back({a, total / count});
  }
  return curve;
}

QSweep sweep_q(std::span<const TaskStream> streams, const PipelineConfig& cfg, std::uint64_t seed,
               std::span<const double> qs, std::span<const double> deltas, int threads) {
  cfg.validate();
  const auto scored = score_streams(streams, cfg, seed, threads, true);
  std::vector<ScoreVector> final_scores;
  for (const auto& st : scored) {
    final_scores.push_back(good_aggregate(st.task->eval.graph, st.scores.base, GoodConfig{st.alpha}));
  }
  QSweep out;
  for (double q : qs) {
    std::vector<double> f1(scored.size());
    parallel_for(scored.size(), threads, [&](std::size_t i) {
      const auto& st = scored[i];
      OpenWrfConfig wrf = cfg.threshold.open_wrf;
      wrf.q = q;
      wrf.seed = derive_seed(st.seed, 2);
      const ThresholdDecision d =
          open_wrf(st.task->eval.graph, final_scores[i], st.task->eval_vertices, wrf);
      f1[i] = metric_micro_f1(d.ood_mask, st.task->ood_truth);
    });
    out.open_wrf.push_back({q, std::accumulate(f1.begin(), f1.end(), 0.0) / double(f1.size())});
  }
  for (double delta : deltas) {
    double total = 0.0;
    for (std::size_t i = 0; i < scored.size(); ++i) {
      const ThresholdDecision d = naive_threshold(final_scores[i], scored[i].task->eval_vertices, delta);
      total += metric_micro_f1(d.ood_mask, scored[i].task->ood_truth);
    }
    out.naive.push_back({delta, total / double(scored.size())});
  }
  return out;
}

double trapezoid_area(std::span<const CurvePoint> curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    area += 0.5 * (curve[i].value + curve[i - 1].value) * (curve[i].param - curve[i - 1].param);
  }
  return area;
}

}  // namespace graphood
