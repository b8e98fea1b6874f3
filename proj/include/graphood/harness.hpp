#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "graphood/good.hpp"
#include "graphood/graph.hpp"
#include "graphood/models.hpp"
#include "graphood/scores.hpp"
#include "graphood/thresholds.hpp"

namespace graphood {

// ---------------------------------------------------------------------------
// Metrics

/// Mann-Whitney AUROC with midranks; OOD (truth = true) is the positive class.
/// Throws DataError unless both classes are present.
double metric_auroc(std::span<const double> scores, const std::vector<bool>& ood_truth);

/// Fraction of matching ID/OOD decisions (micro-F1 of the binary task).
double metric_micro_f1(const std::vector<bool>& ood_mask, const std::vector<bool>& ood_truth);

/// Classification accuracy over the ID vertices only. Throws DataError when
/// there are none.
double metric_id_accuracy(std::span<const int> predictions, std::span<const int> labels,
                          const std::vector<bool>& ood_truth);

// ---------------------------------------------------------------------------
// Task streams

struct SplitFractions {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;

  void validate() const;
};

enum class SplitRole : std::uint8_t { train, val, test };

/// Per-class largest-remainder counts; members of each class are shuffled with
/// a seeded generator before the counts are cut off in train/val/test order.
std::vector<SplitRole> stratified_split(std::span<const int> labels, const SplitFractions& f,
                                        std::uint64_t seed);

struct Task {
  std::string name;
  Subgraph train;
  Subgraph eval;
  /// Vertex ids inside eval.graph that are scored and decided.
  std::vector<Index> eval_vertices;
  std::vector<int> known_classes;
  /// One entry per eval vertex.
  std::vector<bool> ood_truth;
  /// Counted in the report; otherwise the task only exists for tuning or bookkeeping.
  bool evaluated = true;
};

enum class StreamKind { static_loco, temporal };

std::string_view to_string(StreamKind kind);
StreamKind parse_stream_kind(std::string_view name);

struct TaskStream {
  StreamKind origin = StreamKind::static_loco;
  std::vector<Task> tasks;
  /// Task used to pick the GOOD mixing weight.
  std::optional<Task> tuning;
  /// Held-out class for static streams, -1 otherwise.
  int holdout_class = -1;
};

/// Leave-one-class-out stream: T0 trains on train vertices outside the held-out
/// class, T1 scores validation vertices on train+val without that class, T2
/// trains on train+val without it and scores test vertices on the full graph.
/// The tuning task trains like T0 and scores validation vertices on train+val
/// with the held-out class kept, so OOD vertices are present.
TaskStream make_static_tasks(const Graph& g, int holdout_class, const SplitFractions& fractions,
                             std::uint64_t seed);
/// Same, with a precomputed split.
TaskStream make_static_tasks(const Graph& g, int holdout_class,
                             const std::vector<SplitRole>& split);

/// Cumulative yearly stream: task i trains on years <= t_i and scores the
/// vertices of the next observed year. The first task doubles as tuning task.
TaskStream make_temporal_tasks(const Graph& g, int t0);

// ---------------------------------------------------------------------------
// Pipeline

enum class ScorerKind { msp, odin, isomax, gdoc };
enum class ThresholdKind { naive, gdoc, openwgl, open_wrf };

std::string_view to_string(ScorerKind kind);
std::string_view to_string(ThresholdKind kind);
ScorerKind parse_scorer_kind(std::string_view name);
ThresholdKind parse_threshold_kind(std::string_view name);

struct ScorerConfig {
  ScorerKind kind = ScorerKind::msp;
  OdinConfig odin;
};

struct GoodSetting {
  bool enabled = false;
  /// Pick alpha from alpha_grid() on the tuning task instead of using alpha.
  bool tune = false;
  double alpha = 0.0;
};

struct ThresholdConfig {
  ThresholdKind kind = ThresholdKind::naive;
  double delta = 0.1;
  double alpha_doc = 3.0;
  double delta_min = 0.1;
  OpenWrfConfig open_wrf;
};

struct PipelineConfig {
  BackboneConfig backbone;
  HeadConfig head;
  TrainConfig train;
  ScorerConfig scorer;
  GoodSetting good;
  ThresholdConfig threshold;

  /// Rejects scorer/head/threshold combinations that do not fit together.
  void validate() const;
};

/// {0.0, 0.1, ..., 1.0}
std::vector<double> alpha_grid();
/// {0.05, 0.10, ..., 0.50}
std::vector<double> q_grid();

/// Trained model and its base scores on one task.
struct TaskScores {
  ModelState model;
  /// Base scores for every vertex of task.eval.graph.
  ScoreVector base;
  /// Logits for every vertex of task.eval.graph.
  Matrix logits;
  /// Sigmoid outputs of the training vertices (gDOC thresholds).
  Matrix train_sigmoid;
  std::vector<int> train_class_index;
  bool degenerate_class_weight = false;
};

TaskScores score_task(const Task& task, const PipelineConfig& cfg, std::uint64_t seed);

/// Base (or aggregated) scores restricted to the task's eval vertices.
std::vector<double> eval_scores(const Task& task, const ScoreVector& scores);

/// alpha in the grid with the largest AUROC on the task (smallest alpha on ties).
double tune_alpha(const Task& task, const ScoreVector& base);

struct TaskResult {
  std::string name;
  int holdout_class = -1;
  Index num_eval = 0;
  Index num_ood = 0;
  double alpha = 0.0;
  std::optional<double> id_accuracy;
  std::optional<double> auroc;
  double micro_f1 = 0.0;
  bool degenerate_class_weight = false;
};

struct EvalReport {
  StreamKind origin = StreamKind::static_loco;
  std::vector<TaskResult> tasks;
  double mean_id_accuracy = 0.0;
  double mean_auroc = 0.0;
  double mean_micro_f1 = 0.0;
  /// Tasks without both ID and OOD vertices, left out of the AUROC mean.
  int auroc_excluded = 0;
  int id_accuracy_excluded = 0;
  double runtime_seconds = 0.0;
};

/// Metrics plus the final scores and decisions behind them.
struct TaskEvaluation {
  const Task* task = nullptr;
  TaskResult result;
  /// Final (possibly aggregated) scores over every vertex of task->eval.graph.
  ScoreVector scores;
  /// Decisions for task->eval_vertices.
  ThresholdDecision decision;
};

/// Trains, scores, aggregates, thresholds and evaluates every evaluated task.
/// Static folds run on up to `threads` workers; fold f seeds from
/// derive_seed(seed, f). The returned pointers refer into `streams`.
std::vector<TaskEvaluation> evaluate_streams(std::span<const TaskStream> streams,
                                             const PipelineConfig& cfg, std::uint64_t seed,
                                             int threads = 1);

/// Unweighted means over the task rows.
void finalize_means(EvalReport& report);

/// Runs every stream (one per static fold, or a single temporal stream) through
/// evaluate_streams and collects the report.
EvalReport run_lifelong(std::span<const TaskStream> streams, const PipelineConfig& cfg,
                        std::uint64_t seed, int threads = 1);

struct CurvePoint {
  double param = 0.0;
  double value = 0.0;
};

/// Mean AUROC over evaluated tasks for each alpha; base scores are computed once.
std::vector<CurvePoint> sweep_alpha(std::span<const TaskStream> streams, const PipelineConfig& cfg,
                                    std::uint64_t seed, std::span<const double> alphas,
                                    int threads = 1);

struct QSweep {
  std::vector<CurvePoint> open_wrf;  // micro-F1 against q
  std::vector<CurvePoint> naive;     // micro-F1 against delta
};

/// Mean micro-F1 of Open-WRF over qs and of the naive threshold over deltas,
/// both on the same scores (GOOD applied when enabled).
QSweep sweep_q(std::span<const TaskStream> streams, const PipelineConfig& cfg, std::uint64_t seed,
               std::span<const double> qs, std::span<const double> deltas, int threads = 1);

/// Trapezoidal area under a curve ordered by param.
double trapezoid_area(std::span<const CurvePoint> curve);

}  // namespace graphood
