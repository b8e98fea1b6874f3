#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "graphood/io.hpp"
#include "support.hpp"

using namespace graphood;
using namespace graphood::testing;
namespace fs = std::filesystem;

namespace {

/// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / ("graphood_test_io_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

/// Features representable in float32 so a round trip is exact.
Graph float_graph(std::uint64_t seed, bool years) {
  const Graph g = random_graph(12, 0.3, 3, 4, seed);
  Matrix x = g.features().cast<float>().cast<double>();
  std::optional<std::vector<int>> ys;
  if (years) {
    ys.emplace();
    for (Index v = 0; v < 12; ++v) ys->push_back(2000 + static_cast<int>(v % 4));
  }
  return build_graph(g.canonical_edges(), 12, x, g.labels(), ys, 3);
}

std::string expect_data_error(const fs::path& dir) {
  try {
    load_bundle(dir);
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("bundle round trip preserves the graph and splits") {
  TempDir tmp("roundtrip");
  for (bool years : {false, true}) {
    const Graph g = float_graph(3, years);
    std::vector<SplitRole> split(12, SplitRole::train);
    split[2] = SplitRole::val;
    split[7] = SplitRole::test;
    const fs::path dir = tmp.path / (years ? "y" : "n");
    save_bundle(g, dir, split);
    const Graph back = load_bundle(dir);
    CHECK(back == g);
    CHECK(back.has_timestamps() == years);
    CHECK(load_splits(dir, 12) == split);
  }
}

TEST_CASE("saving is byte-for-byte reproducible with canonical edges") {
  TempDir tmp("bytes");
  const Graph g = float_graph(4, false);
  save_bundle(g, tmp.path / "a");
  save_bundle(g, tmp.path / "b");
  for (const char* f : {"meta.json", "edges.tsv", "features.bin", "labels.tsv"}) {
    CHECK(slurp(tmp.path / "a" / f) == slurp(tmp.path / "b" / f));
  }
  // Every line is u < v and the lines are sorted.
  std::istringstream edges(slurp(tmp.path / "a" / "edges.tsv"));
  std::pair<Index, Index> prev{-1, -1};
  for (Index u, v; edges >> u >> v;) {
    CHECK(u < v);
    CHECK(prev < std::pair{u, v});
    prev = {u, v};
  }
  CHECK(load_splits(tmp.path / "a", 12) == std::nullopt);
}

TEST_CASE("features.tsv is read when the binary file is missing") {
  TempDir tmp("tsv");
  const Graph g = float_graph(5, false);
  save_bundle(g, tmp.path);
  std::ostringstream rows;
  rows.precision(17);
  for (Index v = 0; v < 12; ++v) {
    for (Index j = 0; j < 4; ++j) rows << (j ? "\t" : "") << g.features()(v, j);
    rows << '\n';
  }
  fs::remove(tmp.path / "features.bin");
  write_file(tmp.path / "features.tsv", rows.str());
  CHECK(load_bundle(tmp.path) == g);
}

TEST_CASE("corrupt bundles raise data errors") {
  TempDir tmp("corrupt");
  const Graph g = float_graph(6, false);
  save_bundle(g, tmp.path);

  SUBCASE("truncated features.bin") {
    fs::resize_file(tmp.path / "features.bin", 12 * 4 * 4 - 3);
    CHECK(expect_data_error(tmp.path).find("features.bin") != std::string::npos);
  }
  SUBCASE("malformed edge line reports its line number") {
    std::string edges = slurp(tmp.path / "edges.tsv");
    const auto second = edges.find('\n') + 1;
    edges.insert(second, "3\tx\n");
    write_file(tmp.path / "edges.tsv", edges);
    CHECK(expect_data_error(tmp.path).find("edges.tsv:2:") != std::string::npos);
  }
  SUBCASE("edge count disagrees with meta.json") {
    write_file(tmp.path / "edges.tsv", slurp(tmp.path / "edges.tsv") + "0\t11\n");
    CHECK_FALSE(expect_data_error(tmp.path).empty());
  }
  SUBCASE("label outside the class range") {
    std::string labels = slurp(tmp.path / "labels.tsv");
    labels.replace(labels.find('\t') + 1, 1, "9");
    write_file(tmp.path / "labels.tsv", labels);
    CHECK(expect_data_error(tmp.path).find("labels.tsv") != std::string::npos);
  }
  SUBCASE("missing label row") {
    std::string labels = slurp(tmp.path / "labels.tsv");
    labels.erase(labels.rfind('\n', labels.size() - 2) + 1);
    write_file(tmp.path / "labels.tsv", labels);
    CHECK(expect_data_error(tmp.path).find("covers 11 of 12") != std::string::npos);
  }
  SUBCASE("unsupported format version") {
    std::string meta = slurp(tmp.path / "meta.json");
    meta.replace(meta.find("\"format_version\": 1"), 19, "\"format_version\": 7");
    write_file(tmp.path / "meta.json", meta);
    CHECK(expect_data_error(tmp.path).find("version") != std::string::npos);
  }
  SUBCASE("missing directory") {
    CHECK_FALSE(expect_data_error(tmp.path / "nope").empty());
  }
}

TEST_CASE("unwritable destinations raise data errors") {
  TempDir tmp("unwritable");
  write_file(tmp.path / "file", "x");
  CHECK_THROWS_AS(save_bundle(float_graph(1, false), tmp.path / "file" / "bundle"), DataError);
}

TEST_CASE("synthetic generator is deterministic and follows its config") {
  SynthConfig cfg;
  cfg.num_vertices = 300;
  cfg.seed = 5;
  const Graph a = synth_generate(cfg);
  const Graph b = synth_generate(cfg);
  CHECK(a == b);
  cfg.seed = 6;
  CHECK_FALSE(synth_generate(cfg) == a);

  CHECK(a.num_vertices() == 300);
  CHECK(a.num_classes() == 4);
  CHECK(a.feature_dim() == 8);
  std::vector<int> counts(4, 0);
  for (int l : a.labels()) ++counts[l];
  for (int c : counts) CHECK(c == 75);

  cfg.ood_class_id = 1;
  cfg.ood_fraction = 0.1;
  cfg.num_years = 4;
  const Graph t = synth_generate(cfg);
  std::vector<int> ood_count(1, 0);
  for (Index v = 0; v < 300; ++v) {
    if (t.labels()[v] == 1) {
      ++ood_count[0];
      CHECK(t.timestamps()[v] == 4);
    } else {
      CHECK(t.timestamps()[v] >= 1);
      CHECK(t.timestamps()[v] <= 4);
    }
  }
  CHECK(ood_count[0] == 30);
}

TEST_CASE("no cross-class edges yields homophily one") {
  SynthConfig cfg;
  cfg.num_vertices = 200;
  cfg.p_out = 0.0;
  cfg.p_in = 0.1;
  const HomophilyReport h = homophily_measures(synth_generate(cfg));
  CHECK(h.graph_level == 1.0);
  CHECK(h.class_insensitive == doctest::Approx(1.0));
}

TEST_CASE("intra-class edge frequency matches p_in") {
  SynthConfig cfg;
  cfg.num_vertices = 2000;
  cfg.num_classes = 4;
  cfg.p_in = 0.01;
  cfg.p_out = 0.001;
  double intra_edges = 0.0, intra_pairs = 0.0, inter_edges = 0.0, inter_pairs = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    cfg.seed = seed;
    const Graph g = synth_generate(cfg);
    std::vector<double> sizes(4, 0.0);
    for (int l : g.labels()) sizes[l] += 1.0;
    for (double s : sizes) intra_pairs += s * (s - 1) / 2;
    inter_pairs += 2000.0 * 1999.0 / 2;
    for (const auto& [u, v] : g.canonical_edges()) {
      (g.labels()[u] == g.labels()[v] ? intra_edges : inter_edges) += 1.0;
    }
  }
  inter_pairs -= intra_pairs;
  const double p_hat = intra_edges / intra_pairs;
  CHECK(std::abs(p_hat - cfg.p_in) < 3.0 * std::sqrt(cfg.p_in * (1 - cfg.p_in) / intra_pairs));
  const double q_hat = inter_edges / inter_pairs;
  CHECK(std::abs(q_hat - cfg.p_out) < 3.0 * std::sqrt(cfg.p_out * (1 - cfg.p_out) / inter_pairs));
}

TEST_CASE("synthetic config validation") {
  SynthConfig cfg;
  cfg.feature_dim = 2;
  CHECK_THROWS_AS(synth_generate(cfg), ConfigError);
  cfg = SynthConfig{};
  cfg.ood_fraction = 0.2;
  CHECK_THROWS_AS(synth_generate(cfg), ConfigError);
  cfg.ood_class_id = 9;
  CHECK_THROWS_AS(synth_generate(cfg), ConfigError);
  cfg = SynthConfig{};
  cfg.p_in = 1.5;
  CHECK_THROWS_AS(synth_generate(cfg), ConfigError);
}

TEST_CASE("raw citation converter") {
  TempDir tmp("convert");
  write_file(tmp.path / "features.txt", "p10 1 0\np7 0 1\np3 0.5 0.5\n");
  write_file(tmp.path / "labels.txt", "p10 theory\np7 ai\np3 theory\n");
  write_file(tmp.path / "years.txt", "p10 1999\np7 2001\np3 2000\n");
  write_file(tmp.path / "edges.txt", "p10 p7\np7 p10\np3 p7\n\np3 p3\n");
  RawCitationFiles files{tmp.path / "edges.txt", tmp.path / "features.txt",
                         tmp.path / "labels.txt", tmp.path / "years.txt", false};
  const ConvertedGraph c = convert_citation_raw(files);
  CHECK(c.vertex_names == std::vector<std::string>{"p10", "p7", "p3"});
  CHECK(c.class_names == std::vector<std::string>{"ai", "theory"});
  CHECK(c.graph.labels() == std::vector<int>{1, 0, 1});
  CHECK(c.graph.timestamps() == std::vector<int>{1999, 2001, 2000});
  // Duplicate and reversed edges collapse; the self-loop is dropped.
  CHECK(c.graph.canonical_edges() == EdgeList{{0, 1}, {1, 2}});
  CHECK(c.graph.features()(2, 0) == 0.5);

  save_converted(c, tmp.path / "bundle");
  CHECK(load_bundle(tmp.path / "bundle") == c.graph);
  CHECK(slurp(tmp.path / "bundle" / "mapping.tsv") == "0\tp10\n1\tp7\n2\tp3\n");
  CHECK(slurp(tmp.path / "bundle" / "classes.tsv") == "0\tai\n1\ttheory\n");

  write_file(tmp.path / "dangling.txt", "p10 p7\np7 p99\n");
  files.edges = tmp.path / "dangling.txt";
  CHECK_THROWS_WITH_AS(convert_citation_raw(files), doctest::Contains("dangling.txt:2:"), DataError);
  files.drop_dangling = true;
  CHECK(convert_citation_raw(files).graph.num_edges() == 1);
}

TEST_CASE("LINQS converter") {
  TempDir tmp("linqs");
  write_file(tmp.path / "cora.content", "31336\t0\t1\t0\tNeural_Networks\n"
                                        "1061127\t1\t0\t0\tRule_Learning\n"
                                        "1106406\t0\t0\t1\tNeural_Networks\n");
  write_file(tmp.path / "cora.cites", "31336\t1061127\n1106406\t31336\n1106406\t999\n");
  CHECK_THROWS_AS(convert_linqs(tmp.path / "cora.content", tmp.path / "cora.cites"), DataError);
  const ConvertedGraph c = convert_linqs(tmp.path / "cora.content", tmp.path / "cora.cites", true);
  CHECK(c.graph.num_vertices() == 3);
  CHECK(c.graph.feature_dim() == 3);
  CHECK(c.class_names == std::vector<std::string>{"Neural_Networks", "Rule_Learning"});
  CHECK(c.graph.labels() == std::vector<int>{0, 1, 0});
  CHECK(c.graph.canonical_edges() == EdgeList{{0, 1}, {0, 2}});
  CHECK_FALSE(c.graph.has_timestamps());

  write_file(tmp.path / "bad.content", "1\t0\t1\tA\n2\t0\tB\n");
  CHECK_THROWS_WITH_AS(convert_linqs(tmp.path / "bad.content", tmp.path / "cora.cites"),
                       doctest::Contains("bad.content:2:"), DataError);
}
