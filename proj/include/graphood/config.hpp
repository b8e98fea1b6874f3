#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "graphood/harness.hpp"
#include "graphood/io.hpp"

namespace graphood {

struct ProtocolConfig {
  StreamKind kind = StreamKind::static_loco;
  SplitFractions fractions;
  /// Static protocol only; empty means every class.
  std::vector<int> holdout_classes;
  /// Temporal protocol only.
  int t0 = 0;
};

/// Everything one `run` needs. Parsed strictly: unknown keys are rejected.
struct RunConfig {
  std::string dataset;
  std::uint64_t seed = 0;
  ProtocolConfig protocol;
  PipelineConfig pipeline;

  void validate() const;
};

RunConfig parse_run_config(const nlohmann::json& doc);
/// Reads and parses a config file; a relative dataset path is resolved
/// against the config file's directory.
RunConfig load_run_config(const std::filesystem::path& path);
/// Full config with defaults filled in, used as the report's config echo.
nlohmann::json to_json(const RunConfig& cfg);

SynthConfig parse_synth_config(const nlohmann::json& doc);
nlohmann::json to_json(const SynthConfig& cfg);

/// One stream per held-out class (static) or a single temporal stream. A
/// bundle split, when given, replaces the seeded stratified split.
std::vector<TaskStream> build_streams(const Graph& g, const RunConfig& cfg,
                                      const std::optional<std::vector<SplitRole>>& split);

/// Report JSON without runtime, so equal inputs give byte-identical files.
nlohmann::json report_to_json(const EvalReport& report, const nlohmann::json& config_echo);

/// Header plus one row per task: name, holdout, n_eval, n_ood, alpha,
/// id_accuracy, auroc, micro_f1 (empty cell when undefined).
void write_report_tsv(std::ostream& out, const EvalReport& report);

}  // namespace graphood
