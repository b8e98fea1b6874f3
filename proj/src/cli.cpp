#include "graphood/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "graphood/config.hpp"
#include "graphood/io.hpp"

namespace graphood {

namespace fs = std::filesystem;
using nlohmann::json;

void configure_logging() {
  auto logger = spdlog::get("graphood");
  if (!logger) logger = spdlog::stderr_color_mt("graphood");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("GRAPH_OOD_LOG")) {
    const std::string level = env;
    if (level == "error") spdlog::set_level(spdlog::level::err);
    else if (level == "info") spdlog::set_level(spdlog::level::info);
    else if (level == "debug") spdlog::set_level(spdlog::level::debug);
    else spdlog::warn("GRAPH_OOD_LOG='{}' not one of error|info|debug; using warn", level);
  }
}

namespace {

struct CommonOptions {
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  int threads = 1;
};

fs::path prepare_out(const std::string& dir) {
  if (dir.empty()) throw ConfigError("--out DIR is required");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir + ": " + ec.message());
  return fs::path(dir);
}

void write_text(const fs::path& path, const std::string& text, std::ostream& echo) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
  echo << path.string() << '\n';
}

json homophily_json(const Graph& g) {
  const HomophilyReport h = homophily_measures(g);
  return {{"num_vertices", g.num_vertices()},
          {"num_edges", g.num_edges()},
          {"graph_level", h.graph_level},
          {"vertex_level", h.vertex_level},
          {"class_insensitive", h.class_insensitive},
          {"homophily_index", h.homophily_index},
          {"inter_class_edges", h.inter_class_edges},
          {"intra_class_edges", h.intra_class_edges}};
}

struct LoadedRun {
  RunConfig cfg;
  Graph graph;
  std::vector<TaskStream> streams;
};

LoadedRun load_run(const std::string& config_path, const CommonOptions& opts) {
  LoadedRun run;
  run.cfg = load_run_config(config_path);
  if (opts.seed) run.cfg.seed = *opts.seed;
  if (opts.threads < 1) throw ConfigError("--threads must be >= 1");
  run.graph = load_bundle(run.cfg.dataset);
  run.streams = build_streams(run.graph, run.cfg, load_splits(run.cfg.dataset, run.graph.num_vertices()));
  return run;
}

std::string curve_tsv(std::string_view header, const std::vector<CurvePoint>& curve) {
  std::string s(header);
  s += '\n';
  for (const auto& p : curve) s += fmt::format("{:.2f}\t{:.6f}\n", p.param, p.value);
  return s;
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Graph OOD detection toolkit: homophily, scoring, GOOD aggregation, thresholds"};
  app.require_subcommand(1);
  CommonOptions opts;
  auto add_common = [&](CLI::App* cmd, bool with_run_flags) {
    cmd->add_option("--out", opts.out_dir, "Output directory");
    if (with_run_flags) {
      cmd->add_option("--seed", opts.seed, "Override the config seed");
      cmd->add_option("--threads", opts.threads, "Maximum concurrent folds")->check(CLI::PositiveNumber);
    }
  };

  std::string bundle_path;
  auto* homophily = app.add_subcommand("homophily", "Print homophily measures of a bundle as JSON");
  homophily->add_option("bundle", bundle_path, "Bundle directory")->required();
  add_common(homophily, false);

  std::string synth_cfg, synth_out;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic bundle from a JSON config");
  synth->add_option("config", synth_cfg, "Synthetic generator config (JSON)")->required();
  synth->add_option("bundle_dir", synth_out, "Output bundle directory (or --out)");
  add_common(synth, true);

  std::string content, cites, edges, features, labels, years;
  bool drop_dangling = false;
  auto* convert = app.add_subcommand("convert", "Convert raw citation files into a bundle");
  convert->add_option("--content", content, "LINQS content file (id, features, class)");
  convert->add_option("--cites", cites, "LINQS cites file");
  convert->add_option("--edges", edges, "Edge list (id id)");
  convert->add_option("--features", features, "Features (id x_1 .. x_d)");
  convert->add_option("--labels", labels, "Labels (id class)");
  convert->add_option("--years", years, "Years (id year)");
  convert->add_flag("--drop-dangling", drop_dangling, "Skip edges to unknown vertices");
  add_common(convert, false);

  std::string run_cfg;
  auto add_run_command = [&](const char* name, const char* help) {
    auto* cmd = app.add_subcommand(name, help);
    cmd->add_option("config", run_cfg, "Run config (JSON)")->required();
    add_common(cmd, true);
    return cmd;
  };
  auto* run = add_run_command("run", "Run the lifelong protocol and write report.json/report.tsv");
  auto* sweep_a = add_run_command("sweep-alpha", "AUROC for alpha in 0.0..1.0");
  auto* sweep_qc = add_run_command("sweep-q", "Micro-F1 of Open-WRF over q and naive over delta");
  auto* scores = add_run_command("scores", "Per-vertex score and decision TSVs for every task");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfigError;
  }

  try {
    if (homophily->parsed()) {
      const json report = homophily_json(load_bundle(bundle_path));
      if (!opts.out_dir.empty()) {
        write_text(prepare_out(opts.out_dir) / "homophily.json", report.dump(2) + "\n", out);
      } else {
        out << report.dump(2) << '\n';
      }
    } else if (synth->parsed()) {
      std::ifstream in(synth_cfg);
      if (!in) throw ConfigError("cannot read " + synth_cfg);
      json doc;
      try {
        doc = json::parse(in);
      } catch (const json::exception& e) {
        throw ConfigError(synth_cfg + ": " + e.what());
      }
      SynthConfig cfg = parse_synth_config(doc);
      if (opts.seed) cfg.seed = *opts.seed;
      const std::string dir = synth_out.empty() ? opts.out_dir : synth_out;
      const fs::path path = prepare_out(dir);
      save_bundle(synth_generate(cfg), path);
      out << path.string() << '\n';
    } else if (convert->parsed()) {
      const fs::path path = prepare_out(opts.out_dir);
      ConvertedGraph converted;
      if (!content.empty() || !cites.empty()) {
        if (content.empty() || cites.empty()) throw ConfigError("convert: --content needs --cites");
        converted = convert_linqs(content, cites, drop_dangling);
      } else {
        if (edges.empty() || features.empty() || labels.empty()) {
          throw ConfigError("convert: give --content/--cites or --edges/--features/--labels");
        }
        RawCitationFiles files{edges, features, labels, std::nullopt, drop_dangling};
        if (!years.empty()) files.years = years;
        converted = convert_citation_raw(files);
      }
      save_converted(converted, path);
      out << path.string() << '\n';
    } else if (run->parsed()) {
      const fs::path dir = prepare_out(opts.out_dir);
      const LoadedRun r = load_run(run_cfg, opts);
      const EvalReport report = run_lifelong(r.streams, r.cfg.pipeline, r.cfg.seed, opts.threads);
      write_text(dir / "report.json", report_to_json(report, to_json(r.cfg)).dump(2) + "\n", out);
      std::ostringstream tsv;
      write_report_tsv(tsv, report);
      write_text(dir / "report.tsv", tsv.str(), out);
      const json timing = {{"runtime_seconds", report.runtime_seconds}, {"threads", opts.threads}};
      write_text(dir / "timing.json", timing.dump(2) + "\n", out);
    } else if (sweep_a->parsed()) {
      const fs::path dir = prepare_out(opts.out_dir);
      const LoadedRun r = load_run(run_cfg, opts);
      const auto grid = alpha_grid();
      const auto curve = sweep_alpha(r.streams, r.cfg.pipeline, r.cfg.seed, grid, opts.threads);
      write_text(dir / "alpha_curve.tsv", curve_tsv("alpha\tauroc", curve), out);
    } else if (sweep_qc->parsed()) {
      const fs::path dir = prepare_out(opts.out_dir);
      const LoadedRun r = load_run(run_cfg, opts);
      const auto grid = q_grid();
      const QSweep sweep = sweep_q(r.streams, r.cfg.pipeline, r.cfg.seed, grid, grid, opts.threads);
      std::string tsv = "method\tparam\tf1\n";
      for (const auto& p : sweep.open_wrf) tsv += fmt::format("open_wrf\t{:.2f}\t{:.6f}\n", p.param, p.value);
      for (const auto& p : sweep.naive) tsv += fmt::format("naive\t{:.2f}\t{:.6f}\n", p.param, p.value);
      write_text(dir / "q_curve.tsv", tsv, out);
    } else if (scores->parsed()) {
      const fs::path dir = prepare_out(opts.out_dir);
      const LoadedRun r = load_run(run_cfg, opts);
      const auto evals = evaluate_streams(r.streams, r.cfg.pipeline, r.cfg.seed, opts.threads);
      for (std::size_t i = 0; i < evals.size(); ++i) {
        const Task& task = *evals[i].task;
        // Report vertices by their id in the dataset bundle.
        std::string s, d;
        for (std::size_t j = 0; j < task.eval_vertices.size(); ++j) {
          const Index v = task.eval_vertices[j];
          const Index original = task.eval.original_ids[v];
          s += fmt::format("{}\t{:.6f}\n", original, evals[i].scores[v]);
          d += fmt::format("{}\t{:.6f}\t{}\n", original, evals[i].scores[v],
                           evals[i].decision.ood_mask[j] ? 1 : 0);
        }
        write_text(dir / fmt::format("scores_{}.tsv", i), s, out);
        write_text(dir / fmt::format("decisions_{}.tsv", i), d, out);
      }
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitDataError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitDataError;
  }
}

}  // namespace graphood
