#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "graphood/config.hpp"
#include "support.hpp"

using namespace graphood;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json minimal() { return {{"dataset", "data/bundle"}}; }

}  // namespace

TEST_CASE("minimal config takes the defaults") {
  const RunConfig cfg = parse_run_config(minimal());
  CHECK(cfg.dataset == "data/bundle");
  CHECK(cfg.seed == 0);
  CHECK(cfg.protocol.kind == StreamKind::static_loco);
  CHECK(cfg.protocol.fractions.train == 0.6);
  CHECK(cfg.pipeline.backbone.kind == BackboneKind::gcn);
  CHECK(cfg.pipeline.head.kind == HeadKind::softmax_ce);
  CHECK(cfg.pipeline.scorer.kind == ScorerKind::msp);
  CHECK_FALSE(cfg.pipeline.good.enabled);
  CHECK(cfg.pipeline.threshold.kind == ThresholdKind::naive);
}

TEST_CASE("full config round-trips through the echo") {
  json doc = minimal();
  doc["seed"] = 42;
  doc["protocol"] = {{"kind", "static_loco"}, {"fractions", {0.5, 0.25, 0.25}}, {"holdout_classes", {1, 2}}};
  doc["backbone"] = {{"kind", "graph_mlp"}, {"layers", 3}, {"hidden_dim", 32}, {"dropout", 0.1},
                     {"r", 3}, {"tau", 0.5}, {"beta", 2.0}, {"batch_size", 64}};
  doc["head"] = {{"kind", "softmax_ce"}};
  doc["train"] = {{"epochs", 50}, {"learning_rate", 0.005}, {"class_weighting", false}};
  doc["scorer"] = {{"kind", "odin"}, {"temperature", 1000.0}, {"epsilon", 0.001}};
  doc["good"] = {{"tune", true}};
  doc["threshold"] = {{"kind", "open_wrf"}, {"q", 0.2}, {"hidden_dim", 8}, {"epochs", 100},
                      {"learning_rate", 0.02}, {"dropout", 0.3}, {"input", "score_only"}};
  const RunConfig cfg = parse_run_config(doc);
  CHECK(cfg.seed == 42);
  CHECK(cfg.protocol.holdout_classes == std::vector<int>{1, 2});
  CHECK(cfg.pipeline.backbone.kind == BackboneKind::graph_mlp);
  CHECK(cfg.pipeline.backbone.batch_size == 64);
  CHECK(cfg.pipeline.scorer.odin.temperature == 1000.0);
  CHECK(cfg.pipeline.good.tune);
  CHECK(cfg.pipeline.threshold.open_wrf.input == DetectorInput::score_only);

  const json echo = to_json(cfg);
  const RunConfig again = parse_run_config(echo);
  CHECK(to_json(again) == echo);
  CHECK(echo["good"] == json{{"tune", true}});
}

TEST_CASE("unknown keys and bad values are rejected") {
  json doc = minimal();
  doc["learning_rate"] = 0.1;
  CHECK_THROWS_AS(parse_run_config(doc), ConfigError);

  doc = minimal();
  doc["backbone"] = {{"kind", "gcn"}, {"hiden_dim", 8}};
  CHECK_THROWS_WITH_AS(parse_run_config(doc), doctest::Contains("hiden_dim"), ConfigError);

  doc = minimal();
  doc["scorer"] = {{"kind", "odin"}, {"temperature", "hot"}};
  CHECK_THROWS_AS(parse_run_config(doc), ConfigError);

  doc = minimal();
  doc["good"] = {{"tune", true}, {"alpha", 0.3}};
  CHECK_THROWS_AS(parse_run_config(doc), ConfigError);

  doc = minimal();
  doc["good"] = json::object();
  CHECK_THROWS_AS(parse_run_config(doc), ConfigError);

  doc = minimal();
  doc["protocol"] = {{"fractions", {0.6, 0.3, 0.3}}};
  CHECK_THROWS_AS(parse_run_config(doc), ConfigError);

  doc = minimal();
  doc["scorer"] = {{"kind", "isomax"}};
  CHECK_THROWS_AS(parse_run_config(doc), ConfigError);

  CHECK_THROWS_AS(parse_run_config(json::object()), ConfigError);
  CHECK_THROWS_AS(parse_run_config(json::array()), ConfigError);
}

TEST_CASE("null GOOD section disables aggregation") {
  json doc = minimal();
  doc["good"] = nullptr;
  CHECK_FALSE(parse_run_config(doc).pipeline.good.enabled);
  doc["good"] = {{"alpha", 0.4}};
  const RunConfig cfg = parse_run_config(doc);
  CHECK(cfg.pipeline.good.enabled);
  CHECK(cfg.pipeline.good.alpha == 0.4);
}

TEST_CASE("relative dataset paths resolve against the config file") {
  const fs::path dir = fs::temp_directory_path() / "graphood_test_config";
  fs::create_directories(dir);
  std::ofstream(dir / "run.json") << minimal().dump();
  CHECK(load_run_config(dir / "run.json").dataset == (dir / "data/bundle").string());
  std::ofstream(dir / "broken.json") << "{ \"dataset\": ";
  CHECK_THROWS_AS(load_run_config(dir / "broken.json"), ConfigError);
  CHECK_THROWS_AS(load_run_config(dir / "missing.json"), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("synthetic config parsing is strict") {
  const SynthConfig cfg = parse_synth_config({{"num_vertices", 100}, {"p_in", 0.2}});
  CHECK(cfg.num_vertices == 100);
  CHECK(cfg.p_in == 0.2);
  CHECK(parse_synth_config(to_json(cfg)).num_vertices == 100);
  CHECK_THROWS_AS(parse_synth_config({{"vertices", 100}}), ConfigError);
}

TEST_CASE("report serialization") {
  EvalReport r;
  TaskResult t;
  t.name = "T2/holdout=0";
  t.holdout_class = 0;
  t.num_eval = 10;
  t.num_ood = 3;
  t.alpha = 0.25;
  t.id_accuracy = 0.9;
  t.micro_f1 = 0.8;
  r.tasks = {t};
  finalize_means(r);
  r.runtime_seconds = 12.0;
  const json j = report_to_json(r, json{{"seed", 1}});
  CHECK(j["schema_version"] == 1);
  CHECK(j["protocol"] == "static_loco");
  CHECK(j["tasks"][0]["auroc"].is_null());
  CHECK(j["aggregate"]["auroc_excluded_tasks"] == 1);
  CHECK_FALSE(j.dump().find("runtime") != std::string::npos);

  std::ostringstream tsv;
  write_report_tsv(tsv, r);
  CHECK(tsv.str() ==
        "task\tholdout_class\tnum_eval\tnum_ood\talpha\tid_accuracy\tauroc\tmicro_f1\n"
        "T2/holdout=0\t0\t10\t3\t0.250000\t0.900000\t\t0.800000\n");
}
