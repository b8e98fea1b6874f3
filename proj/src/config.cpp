#include "graphood/config.hpp"

#include <fstream>
#include <set>

#include <fmt/format.h>

namespace graphood {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

inline constexpr int kReportSchemaVersion = 1;

// Reads typed fields from one JSON object and rejects keys nobody asked for.
class Fields {
 public:
  Fields(const json& obj, std::string where) : obj_(obj), where_(std::move(where)) {
    if (!obj_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    used_.insert(key);
    if (!obj_.contains(key)) return;
    try {
      out = obj_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(fmt::format("{}.{}: wrong type ({})", where_, key, obj_.at(key).dump()));
    }
  }

  bool has(const char* key) const { return obj_.contains(key); }

  const json* child(const char* key) {
    used_.insert(key);
    return obj_.contains(key) ? &obj_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [key, value] : obj_.items()) {
      if (!used_.contains(key)) throw ConfigError(fmt::format("{}: unknown key '{}'", where_, key));
    }
  }

 private:
  const json& obj_;
  std::string where_;
  std::set<std::string> used_;
};

}  // namespace

void RunConfig::validate() const {
  if (dataset.empty()) throw ConfigError("config: dataset path is required");
  if (protocol.kind == StreamKind::static_loco) protocol.fractions.validate();
  pipeline.validate();
}

RunConfig parse_run_config(const json& doc) {
  RunConfig cfg;
  Fields root(doc, "config");
  root.get("dataset", cfg.dataset);
  root.get("seed", cfg.seed);

  if (const json* p = root.child("protocol")) {
    Fields f(*p, "protocol");
    std::string kind = "static_loco";
    f.get("kind", kind);
    cfg.protocol.kind = parse_stream_kind(kind);
    std::vector<double> fr;
    f.get("fractions", fr);
    if (f.has("fractions")) {
      if (fr.size() != 3) throw ConfigError("protocol.fractions: expected 3 numbers");
      cfg.protocol.fractions = {fr[0], fr[1], fr[2]};
    }
    f.get("holdout_classes", cfg.protocol.holdout_classes);
    f.get("t0", cfg.protocol.t0);
    f.finish();
  }
  if (const json* p = root.child("backbone")) {
    Fields f(*p, "backbone");
    std::string kind = "gcn";
    f.get("kind", kind);
    auto& b = cfg.pipeline.backbone;
    b.kind = parse_backbone_kind(kind);
    f.get("layers", b.layers);
    f.get("hidden_dim", b.hidden_dim);
    f.get("dropout", b.dropout_rate);
    f.get("r", b.r);
    f.get("tau", b.tau);
    f.get("beta", b.beta);
    f.get("batch_size", b.batch_size);
    f.finish();
  }
  if (const json* p = root.child("head")) {
    Fields f(*p, "head");
    std::string kind = "softmax_ce";
    f.get("kind", kind);
    cfg.pipeline.head.kind = parse_head_kind(kind);
    f.get("entropic_scale", cfg.pipeline.head.entropic_scale);
    f.finish();
  }
  if (const json* p = root.child("train")) {
    Fields f(*p, "train");
    f.get("epochs", cfg.pipeline.train.epochs);
    f.get("learning_rate", cfg.pipeline.train.learning_rate);
    f.get("class_weighting", cfg.pipeline.train.class_weighting);
    f.finish();
  }
  if (const json* p = root.child("scorer")) {
    Fields f(*p, "scorer");
    std::string kind = "msp";
    f.get("kind", kind);
    cfg.pipeline.scorer.kind = parse_scorer_kind(kind);
    f.get("temperature", cfg.pipeline.scorer.odin.temperature);
    f.get("epsilon", cfg.pipeline.scorer.odin.epsilon);
    f.finish();
  }
  if (const json* p = root.child("good"); p && !p->is_null()) {
    Fields f(*p, "good");
    auto& g = cfg.pipeline.good;
    g.enabled = true;
    f.get("tune", g.tune);
    f.get("alpha", g.alpha);
    if (g.tune && f.has("alpha")) throw ConfigError("good: give either alpha or tune, not both");
    if (!g.tune && !f.has("alpha")) throw ConfigError("good: alpha or tune is required");
    f.finish();
  }
  if (const json* p = root.child("threshold")) {
    Fields f(*p, "threshold");
    auto& t = cfg.pipeline.threshold;
    std::string kind = "naive";
    f.get("kind", kind);
    t.kind = parse_threshold_kind(kind);
    f.get("delta", t.delta);
    f.get("alpha_doc", t.alpha_doc);
    f.get("delta_min", t.delta_min);
    f.get("q", t.open_wrf.q);
    f.get("hidden_dim", t.open_wrf.hidden_dim);
    f.get("epochs", t.open_wrf.epochs);
    f.get("learning_rate", t.open_wrf.learning_rate);
    f.get("dropout", t.open_wrf.dropout_rate);
    std::string input = std::string(to_string(t.open_wrf.input));
    f.get("input", input);
    t.open_wrf.input = parse_detector_input(input);
    f.finish();
  }
  root.finish();
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
  RunConfig cfg = parse_run_config(doc);
  if (!cfg.dataset.empty() && fs::path(cfg.dataset).is_relative()) {
    cfg.dataset = (path.parent_path() / cfg.dataset).lexically_normal().string();
  }
  return cfg;
}

json to_json(const RunConfig& cfg) {
  const auto& p = cfg.pipeline;
  json protocol = {{"kind", to_string(cfg.protocol.kind)}};
  if (cfg.protocol.kind == StreamKind::static_loco) {
    protocol["fractions"] = {cfg.protocol.fractions.train, cfg.protocol.fractions.val,
                             cfg.protocol.fractions.test};
    protocol["holdout_classes"] = cfg.protocol.holdout_classes;
  } else {
    protocol["t0"] = cfg.protocol.t0;
  }
  json good = nullptr;
  if (p.good.enabled) good = p.good.tune ? json{{"tune", true}} : json{{"alpha", p.good.alpha}};
  return {
      {"dataset", cfg.dataset},
      {"seed", cfg.seed},
      {"protocol", protocol},
      {"backbone",
       {{"kind", to_string(p.backbone.kind)},
        {"layers", p.backbone.layers},
        {"hidden_dim", p.backbone.hidden_dim},
        {"dropout", p.backbone.dropout_rate},
        {"r", p.backbone.r},
        {"tau", p.backbone.tau},
        {"beta", p.backbone.beta},
        {"batch_size", p.backbone.batch_size}}},
      {"head", {{"kind", to_string(p.head.kind)}, {"entropic_scale", p.head.entropic_scale}}},
      {"train",
       {{"epochs", p.train.epochs},
        {"learning_rate", p.train.learning_rate},
        {"class_weighting", p.train.class_weighting}}},
      {"scorer",
       {{"kind", to_string(p.scorer.kind)},
        {"temperature", p.scorer.odin.temperature},
        {"epsilon", p.scorer.odin.epsilon}}},
      {"good", good},
      {"threshold",
       {{"kind", to_string(p.threshold.kind)},
        {"delta", p.threshold.delta},
        {"alpha_doc", p.threshold.alpha_doc},
        {"delta_min", p.threshold.delta_min},
        {"q", p.threshold.open_wrf.q},
        {"hidden_dim", p.threshold.open_wrf.hidden_dim},
        {"epochs", p.threshold.open_wrf.epochs},
        {"learning_rate", p.threshold.open_wrf.learning_rate},
        {"dropout", p.threshold.open_wrf.dropout_rate},
        {"input", to_string(p.threshold.open_wrf.input)}}},
  };
}

SynthConfig parse_synth_config(const json& doc) {
  SynthConfig cfg;
  Fields f(doc, "synth");
  f.get("num_vertices", cfg.num_vertices);
  f.get("num_classes", cfg.num_classes);
  f.get("p_in", cfg.p_in);
  f.get("p_out", cfg.p_out);
  f.get("feature_dim", cfg.feature_dim);
  f.get("separation", cfg.separation);
  f.get("noise_std", cfg.noise_std);
  f.get("ood_class_id", cfg.ood_class_id);
  f.get("ood_fraction", cfg.ood_fraction);
  f.get("num_years", cfg.num_years);
  f.get("seed", cfg.seed);
  f.finish();
  cfg.validate();
  return cfg;
}

json to_json(const SynthConfig& cfg) {
  return {{"num_vertices", cfg.num_vertices}, {"num_classes", cfg.num_classes},
          {"p_in", cfg.p_in},                 {"p_out", cfg.p_out},
          {"feature_dim", cfg.feature_dim},   {"separation", cfg.separation},
          {"noise_std", cfg.noise_std},       {"ood_class_id", cfg.ood_class_id},
          {"ood_fraction", cfg.ood_fraction}, {"num_years", cfg.num_years},
          {"seed", cfg.seed}};
}

std::vector<TaskStream> build_streams(const Graph& g, const RunConfig& cfg,
                                      const std::optional<std::vector<SplitRole>>& split) {
  std::vector<TaskStream> streams;
  if (cfg.protocol.kind == StreamKind::temporal) {
    streams.push_back(make_temporal_tasks(g, cfg.protocol.t0));
    return streams;
  }
  const std::vector<SplitRole> roles =
      split ? *split
            : stratified_split(g.labels(), cfg.protocol.fractions, derive_seed(cfg.seed, 0x5917));
  std::vector<int> holdouts = cfg.protocol.holdout_classes;
  if (holdouts.empty()) {
    for (int c = 0; c < g.num_classes(); ++c) holdouts.push_back(c);
  }
  for (int k : holdouts) streams.push_back(make_static_tasks(g, k, roles));
  return streams;
}

namespace {

json optional_metric(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

json report_to_json(const EvalReport& report, const json& config_echo) {
  json tasks = json::array();
  for (const auto& t : report.tasks) {
    tasks.push_back({{"name", t.name},
                     {"holdout_class", t.holdout_class},
                     {"num_eval", t.num_eval},
                     {"num_ood", t.num_ood},
                     {"alpha", t.alpha},
                     {"id_accuracy", optional_metric(t.id_accuracy)},
                     {"auroc", optional_metric(t.auroc)},
                     {"micro_f1", t.micro_f1},
                     {"degenerate_class_weight", t.degenerate_class_weight}});
  }
  return {{"schema_version", kReportSchemaVersion},
          {"protocol", to_string(report.origin)},
          {"config", config_echo},
          {"tasks", tasks},
          {"aggregate",
           {{"id_accuracy", report.mean_id_accuracy},
            {"auroc", report.mean_auroc},
            {"micro_f1", report.mean_micro_f1},
            {"auroc_excluded_tasks", report.auroc_excluded},
            {"id_accuracy_excluded_tasks", report.id_accuracy_excluded}}}};
}

void write_report_tsv(std::ostream& out, const EvalReport& report) {
  auto cell = [](const std::optional<double>& v) { return v ? fmt::format("{:.6f}", *v) : std::string(); };
  out << "task\tholdout_class\tnum_eval\tnum_ood\talpha\tid_accuracy\tauroc\tmicro_f1\n";
  for (const auto& t : report.tasks) {
    out << fmt::format("{}\t{}\t{}\t{}\t{:.6f}\t{}\t{}\t{:.6f}\n", t.name, t.holdout_class,
                       t.num_eval, t.num_ood, t.alpha, cell(t.id_accuracy), cell(t.auroc),
                       t.micro_f1);
  }
}

}  // namespace graphood
