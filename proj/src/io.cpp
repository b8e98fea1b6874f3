#include "graphood/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

namespace graphood {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ofstream open_out(const fs::path& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw DataError("cannot read " + path.string());
  return in;
}

[[noreturn]] void malformed(const fs::path& path, std::size_t line, const std::string& what) {
  throw DataError(fmt::format("{}:{}: {}", path.string(), line, what));
}

// Splits on whitespace; tabs and spaces are both accepted.
std::vector<std::string> tokens(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  for (std::string t; in >> t;) out.push_back(std::move(t));
  return out;
}

long long parse_int(const std::string& s, const fs::path& path, std::size_t line) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    malformed(path, line, "expected an integer, got '" + s + "'");
  }
  if (used != s.size()) malformed(path, line, "expected an integer, got '" + s + "'");
  return v;
}

double parse_real(const std::string& s, const fs::path& path, std::size_t line) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    malformed(path, line, "expected a number, got '" + s + "'");
  }
  if (used != s.size()) malformed(path, line, "expected a number, got '" + s + "'");
  return v;
}

// Reads "vertex \t value" rows covering every vertex exactly once.
std::vector<long long> read_vertex_table(const fs::path& path, Index n) {
  auto in = open_in(path);
  std::vector<long long> values(static_cast<std::size_t>(n));
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto t = tokens(line);
    if (t.size() != 2) malformed(path, lineno, "expected 2 columns");
    const long long v = parse_int(t[0], path, lineno);
    if (v < 0 || v >= n) malformed(path, lineno, "vertex id out of range");
    if (seen[v]) malformed(path, lineno, "duplicate vertex id");
    seen[v] = true;
    values[v] = parse_int(t[1], path, lineno);
  }
  if (std::count(seen.begin(), seen.end(), false) != 0) {
    throw DataError(fmt::format("{}: covers {} of {} vertices", path.string(),
                                std::count(seen.begin(), seen.end(), true), n));
  }
  return values;
}

std::uint32_t to_little_endian(std::uint32_t x) {
  if constexpr (std::endian::native == std::endian::big) {
    return ((x & 0xffu) << 24) | ((x & 0xff00u) << 8) | ((x >> 8) & 0xff00u) | (x >> 24);
  }
  return x;
}

}  // namespace

void save_bundle(const Graph& g, const fs::path& dir,
                 const std::optional<std::vector<SplitRole>>& splits) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
  const Index n = g.num_vertices();

  json meta = {{"format_version", kBundleFormatVersion},
               {"num_vertices", n},
               {"num_edges", g.num_edges()},
               {"feature_dim", g.feature_dim()},
               {"num_classes", g.num_classes()},
               {"has_timestamps", g.has_timestamps()},
               {"has_splits", splits.has_value()}};
  open_out(dir / "meta.json") << meta.dump(2) << '\n';

  {
    auto out = open_out(dir / "edges.tsv");
    for (const auto& [u, v] : g.canonical_edges()) out << u << '\t' << v << '\n';
  }
  {
    auto out = open_out(dir / "features.bin", true);
    const Matrix& x = g.features();
    std::vector<char> buf(static_cast<std::size_t>(x.size()) * 4);
    for (Index i = 0; i < x.size(); ++i) {
      const auto bits = to_little_endian(std::bit_cast<std::uint32_t>(static_cast<float>(x.data()[i])));
      std::memcpy(buf.data() + 4 * i, &bits, 4);
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
  {
    auto out = open_out(dir / "labels.tsv");
    for (Index v = 0; v < n; ++v) out << v << '\t' << g.labels()[v] << '\n';
  }
  if (g.has_timestamps()) {
    auto out = open_out(dir / "years.tsv");
    for (Index v = 0; v < n; ++v) out << v << '\t' << g.timestamps()[v] << '\n';
  }
  if (splits) {
    if (static_cast<Index>(splits->size()) != n) throw ShapeError("save_bundle: split length mismatch");
    static constexpr const char* kNames[] = {"train", "val", "test"};
    auto out = open_out(dir / "splits.tsv");
    for (Index v = 0; v < n; ++v) out << v << '\t' << kNames[static_cast<int>((*splits)[v])] << '\n';
  }
}

Graph load_bundle(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("bundle directory not found: " + dir.string());
  json meta;
  try {
    meta = json::parse(open_in(dir / "meta.json"));
  } catch (const json::exception& e) {
    throw DataError(fmt::format("{}: {}", (dir / "meta.json").string(), e.what()));
  }
  int version = 0;
  Index n = 0, d = 0;
  int k = 0;
  bool has_years = false;
  try {
    version = meta.at("format_version").get<int>();
    n = meta.at("num_vertices").get<Index>();
    d = meta.at("feature_dim").get<Index>();
    k = meta.at("num_classes").get<int>();
    has_years = meta.value("has_timestamps", false);
  } catch (const json::exception& e) {
    throw DataError(fmt::format("{}: {}", (dir / "meta.json").string(), e.what()));
  }
  if (version != kBundleFormatVersion) {
    throw DataError(fmt::format("bundle format version {} unsupported (expected {})", version,
                                kBundleFormatVersion));
  }
  if (n <= 0 || d < 0 || k <= 0) throw DataError("meta.json: non-positive counts");

  EdgeList edges;
  {
    const fs::path path = dir / "edges.tsv";
    auto in = open_in(path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto t = tokens(line);
      if (t.size() != 2) malformed(path, lineno, "expected 2 columns");
      const long long u = parse_int(t[0], path, lineno);
      const long long v = parse_int(t[1], path, lineno);
      if (u < 0 || v < 0 || u >= n || v >= n) malformed(path, lineno, "vertex id out of range");
      edges.emplace_back(u, v);
    }
  }
  if (meta.contains("num_edges")) {
    const auto expected = meta["num_edges"].get<Index>();
    if (static_cast<Index>(edges.size()) != expected) {
      throw DataError(fmt::format("edges.tsv: {} edges, meta.json says {}", edges.size(), expected));
    }
  }

  Matrix features(n, d);
  if (fs::exists(dir / "features.bin")) {
    const fs::path path = dir / "features.bin";
    const auto expected = static_cast<std::uintmax_t>(n * d * 4);
    if (fs::file_size(path) != expected) {
      throw DataError(fmt::format("features.bin: {} bytes, expected {} for {} x {} float32",
                                  fs::file_size(path), expected, n, d));
    }
    auto in = open_in(path, true);
    std::vector<char> buf(static_cast<std::size_t>(expected));
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    for (Index i = 0; i < n * d; ++i) {
      std::uint32_t bits = 0;
      std::memcpy(&bits, buf.data() + 4 * i, 4);
      features.data()[i] = std::bit_cast<float>(to_little_endian(bits));
    }
  } else {
    const fs::path path = dir / "features.tsv";
    auto in = open_in(path);
    std::string line;
    std::size_t lineno = 0;
    Index row = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto t = tokens(line);
      if (static_cast<Index>(t.size()) != d) malformed(path, lineno, fmt::format("expected {} columns", d));
      if (row >= n) malformed(path, lineno, "more rows than vertices");
      for (Index j = 0; j < d; ++j) features(row, j) = parse_real(t[j], path, lineno);
      ++row;
    }
    if (row != n) throw DataError(fmt::format("features.tsv: {} rows, expected {}", row, n));
  }

  const auto raw_labels = read_vertex_table(dir / "labels.tsv", n);
  std::vector<int> labels(raw_labels.begin(), raw_labels.end());
  for (Index v = 0; v < n; ++v) {
    if (labels[v] < 0 || labels[v] >= k) {
      throw DataError(fmt::format("labels.tsv: vertex {} has class {} outside [0,{})", v, labels[v], k));
    }
  }
  std::optional<std::vector<int>> years;
  if (has_years) {
    const auto raw = read_vertex_table(dir / "years.tsv", n);
    years.emplace(raw.begin(), raw.end());
  }
  return build_graph(edges, n, std::move(features), std::move(labels), std::move(years), k);
}

std::optional<std::vector<SplitRole>> load_splits(const fs::path& dir, Index n) {
  const fs::path path = dir / "splits.tsv";
  if (!fs::exists(path)) return std::nullopt;
  auto in = open_in(path);
  std::vector<SplitRole> roles(static_cast<std::size_t>(n), SplitRole::test);
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto t = tokens(line);
    if (t.size() != 2) malformed(path, lineno, "expected 2 columns");
    const long long v = parse_int(t[0], path, lineno);
    if (v < 0 || v >= n) malformed(path, lineno, "vertex id out of range");
    if (t[1] == "train") roles[v] = SplitRole::train;
    else if (t[1] == "val") roles[v] = SplitRole::val;
    else if (t[1] == "test") roles[v] = SplitRole::test;
    else malformed(path, lineno, "split must be train, val or test");
    seen[v] = true;
  }
  if (std::count(seen.begin(), seen.end(), false) != 0) throw DataError("splits.tsv: missing vertices");
  return roles;
}

void SynthConfig::validate() const {
  if (num_vertices < 2) throw ConfigError("synth: num_vertices must be >= 2");
  if (num_classes < 2) throw ConfigError("synth: num_classes must be >= 2");
  if (!(p_in >= 0.0 && p_in <= 1.0 && p_out >= 0.0 && p_out <= 1.0)) {
    throw ConfigError("synth: p_in and p_out must lie in [0,1]");
  }
  if (p_in == 0.0 && p_out == 0.0) throw ConfigError("synth: p_in = p_out = 0 yields no edges");
  if (feature_dim < num_classes) throw ConfigError("synth: feature_dim must be >= num_classes");
  if (!(separation > 0.0)) throw ConfigError("synth: separation must be > 0");
  if (noise_std < 0.0) throw ConfigError("synth: noise_std must be >= 0");
  if (ood_class_id >= num_classes) throw ConfigError("synth: ood_class_id out of range");
  if (ood_fraction >= 1.0) throw ConfigError("synth: ood_fraction must be < 1");
  if (ood_fraction > 0.0 && ood_class_id < 0) throw ConfigError("synth: ood_fraction needs ood_class_id");
  if (num_years < 0) throw ConfigError("synth: num_years must be >= 0");
}

Graph synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  const Index n = cfg.num_vertices;
  const int k = cfg.num_classes;
  std::mt19937_64 rng(derive_seed(cfg.seed, 0));

  // Class sizes: the OOD class takes its share, the rest split evenly.
  std::vector<Index> sizes(static_cast<std::size_t>(k), 0);
  Index remaining = n;
  int even_classes = k;
  if (cfg.ood_fraction > 0.0) {
    sizes[cfg.ood_class_id] = std::max<Index>(1, std::llround(cfg.ood_fraction * double(n)));
    remaining -= sizes[cfg.ood_class_id];
    --even_classes;
  }
  Index filled = 0;
  for (int c = 0; c < k; ++c) {
    if (cfg.ood_fraction > 0.0 && c == cfg.ood_class_id) continue;
    sizes[c] = remaining / even_classes + (filled < remaining % even_classes ? 1 : 0);
    ++filled;
  }
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(n));
  for (int c = 0; c < k; ++c) labels.insert(labels.end(), static_cast<std::size_t>(sizes[c]), c);
  std::shuffle(labels.begin(), labels.end(), rng);

  // Means separation/sqrt(2) * e_c are pairwise `separation` apart.
  std::normal_distribution<double> noise(0.0, 1.0);
  Matrix features(n, cfg.feature_dim);
  const double scale = cfg.separation / std::sqrt(2.0);
  for (Index v = 0; v < n; ++v) {
    for (Index j = 0; j < cfg.feature_dim; ++j) features(v, j) = cfg.noise_std * noise(rng);
    features(v, labels[v]) += scale;
  }

  EdgeList edges;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (Index u = 0; u < n; ++u) {
    for (Index v = u + 1; v < n; ++v) {
      const double p = labels[u] == labels[v] ? cfg.p_in : cfg.p_out;
      if (unit(rng) < p) edges.emplace_back(u, v);
    }
  }

  std::optional<std::vector<int>> years;
  if (cfg.num_years > 0) {
    std::uniform_int_distribution<int> year(1, cfg.num_years);
    years.emplace(static_cast<std::size_t>(n));
    for (Index v = 0; v < n; ++v) {
      (*years)[v] = labels[v] == cfg.ood_class_id ? cfg.num_years : year(rng);
    }
  }
  return build_graph(edges, n, std::move(features), std::move(labels), std::move(years), k);
}

namespace {

struct RawVertexTable {
  std::vector<std::string> names;
  std::unordered_map<std::string, Index> index;
};

Index lookup(const RawVertexTable& table, const std::string& name) {
  const auto it = table.index.find(name);
  return it == table.index.end() ? -1 : it->second;
}

std::vector<int> encode_classes(const std::vector<std::string>& raw, std::vector<std::string>& names) {
  std::map<std::string, int> ids;
  for (const auto& s : raw) ids.emplace(s, 0);
  int next = 0;
  for (auto& [name, id] : ids) {
    id = next++;
    names.push_back(name);
  }
  std::vector<int> out;
  out.reserve(raw.size());
  for (const auto& s : raw) out.push_back(ids.at(s));
  return out;
}

EdgeList read_raw_edges(const fs::path& path, const RawVertexTable& table, bool drop_dangling) {
  auto in = open_in(path);
  EdgeList edges;
  std::string line;
  std::size_t lineno = 0, dropped = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = tokens(line);
    if (t.empty()) continue;
    if (t.size() != 2) malformed(path, lineno, "expected 2 columns");
    const Index u = lookup(table, t[0]);
    const Index v = lookup(table, t[1]);
    if (u < 0 || v < 0) {
      if (!drop_dangling) {
        malformed(path, lineno, "edge references unknown vertex '" + (u < 0 ? t[0] : t[1]) + "'");
      }
      ++dropped;
      continue;
    }
    edges.emplace_back(u, v);
  }
  if (dropped > 0) spdlog::warn("{}: dropped {} dangling edges", path.string(), dropped);
  return edges;
}

}  // namespace

ConvertedGraph convert_citation_raw(const RawCitationFiles& files) {
  RawVertexTable table;
  std::vector<std::vector<double>> rows;
  {
    auto in = open_in(files.features);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto t = tokens(line);
      if (t.empty()) continue;
      if (t.size() < 2) malformed(files.features, lineno, "expected an id and features");
      if (!rows.empty() && t.size() - 1 != rows.front().size()) {
        malformed(files.features, lineno, "feature count differs from the first row");
      }
      if (!table.index.emplace(t[0], static_cast<Index>(table.names.size())).second) {
        malformed(files.features, lineno, "duplicate vertex '" + t[0] + "'");
      }
      table.names.push_back(t[0]);
      std::vector<double> row;
      for (std::size_t j = 1; j < t.size(); ++j) row.push_back(parse_real(t[j], files.features, lineno));
      rows.push_back(std::move(row));
    }
  }
  const Index n = static_cast<Index>(rows.size());
  if (n == 0) throw DataError(files.features.string() + ": no vertices");

  auto read_keyed = [&](const fs::path& path) {
    std::vector<std::string> values(static_cast<std::size_t>(n));
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    auto in = open_in(path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto t = tokens(line);
      if (t.empty()) continue;
      if (t.size() != 2) malformed(path, lineno, "expected 2 columns");
      const Index v = lookup(table, t[0]);
      if (v < 0) malformed(path, lineno, "unknown vertex '" + t[0] + "'");
      values[v] = t[1];
      seen[v] = true;
    }
    if (std::count(seen.begin(), seen.end(), false) != 0) {
      throw DataError(path.string() + ": some vertices have no entry");
    }
    return values;
  };

  ConvertedGraph out;
  const std::vector<int> labels = encode_classes(read_keyed(files.labels), out.class_names);
  std::optional<std::vector<int>> years;
  if (files.years) {
    years.emplace();
    std::size_t i = 0;
    for (const auto& s : read_keyed(*files.years)) years->push_back(static_cast<int>(parse_int(s, *files.years, ++i)));
  }
  Matrix features(n, static_cast<Index>(rows.front().size()));
  for (Index v = 0; v < n; ++v) {
    features.row(v) = Eigen::Map<const Eigen::RowVectorXd>(rows[v].data(), features.cols());
  }
  const EdgeList edges = read_raw_edges(files.edges, table, files.drop_dangling);
  out.graph = build_graph(edges, n, std::move(features), labels, std::move(years),
                          static_cast<int>(out.class_names.size()));
  out.vertex_names = std::move(table.names);
  return out;
}

ConvertedGraph convert_linqs(const fs::path& content, const fs::path& cites, bool drop_dangling) {
  RawVertexTable table;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> raw_labels;
  auto in = open_in(content);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = tokens(line);
    if (t.empty()) continue;
    if (t.size() < 3) malformed(content, lineno, "expected id, features and class");
    if (!rows.empty() && t.size() - 2 != rows.front().size()) {
      malformed(content, lineno, "feature count differs from the first row");
    }
    if (!table.index.emplace(t[0], static_cast<Index>(table.names.size())).second) {
      malformed(content, lineno, "duplicate vertex '" + t[0] + "'");
    }
    table.names.push_back(t[0]);
    std::vector<double> row;
    for (std::size_t j = 1; j + 1 < t.size(); ++j) row.push_back(parse_real(t[j], content, lineno));
    rows.push_back(std::move(row));
    raw_labels.push_back(t.back());
  }
  const Index n = static_cast<Index>(rows.size());
  if (n == 0) throw DataError(content.string() + ": no vertices");

  ConvertedGraph out;
  const std::vector<int> labels = encode_classes(raw_labels, out.class_names);
  Matrix features(n, static_cast<Index>(rows.front().size()));
  for (Index v = 0; v < n; ++v) {
    features.row(v) = Eigen::Map<const Eigen::RowVectorXd>(rows[v].data(), features.cols());
  }
  const EdgeList edges = read_raw_edges(cites, table, drop_dangling);
  out.graph = build_graph(edges, n, std::move(features), labels, std::nullopt,
                          static_cast<int>(out.class_names.size()));
  out.vertex_names = std::move(table.names);
  return out;
}

void save_converted(const ConvertedGraph& converted, const fs::path& dir) {
  save_bundle(converted.graph, dir);
  {
    auto out = open_out(dir / "mapping.tsv");
    for (std::size_t v = 0; v < converted.vertex_names.size(); ++v) {
      out << v << '\t' << converted.vertex_names[v] << '\n';
    }
  }
  auto out = open_out(dir / "classes.tsv");
  for (std::size_t c = 0; c < converted.class_names.size(); ++c) {
    out << c << '\t' << converted.class_names[c] << '\n';
  }
}

}  // namespace graphood
