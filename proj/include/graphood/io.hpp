#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "graphood/graph.hpp"
#include "graphood/harness.hpp"

namespace graphood {

inline constexpr int kBundleFormatVersion = 1;

/// Writes meta.json, edges.tsv, features.bin, labels.tsv and, when present,
/// years.tsv and splits.tsv. Output is byte-for-byte reproducible.
void save_bundle(const Graph& g, const std::filesystem::path& dir,
                 const std::optional<std::vector<SplitRole>>& splits = std::nullopt);

/// Loads a bundle directory. Features come from features.bin, or features.tsv
/// when the binary file is absent. Throws DataError with the file and line on
/// malformed or inconsistent content.
Graph load_bundle(const std::filesystem::path& dir);

/// splits.tsv of a bundle, if the file exists.
std::optional<std::vector<SplitRole>> load_splits(const std::filesystem::path& dir,
                                                  Index num_vertices);

struct SynthConfig {
  Index num_vertices = 600;
  int num_classes = 4;
  double p_in = 0.05;
  double p_out = 0.005;
  Index feature_dim = 8;
  /// Distance between any two class means.
  double separation = 2.0;
  double noise_std = 1.0;
  /// Class that plays the unseen class; -1 for none.
  int ood_class_id = -1;
  /// Share of vertices in ood_class_id; <= 0 splits all classes evenly.
  double ood_fraction = 0.0;
  /// Years 1..num_years are assigned when > 0; the OOD class appears only in the last year.
  int num_years = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Stochastic block model with Gaussian class features. Deterministic per seed.
Graph synth_generate(const SynthConfig& cfg);

struct ConvertedGraph {
  Graph graph;
  /// Original identifier of each vertex, in vertex order.
  std::vector<std::string> vertex_names;
  /// Class name of each class id (sorted lexicographically).
  std::vector<std::string> class_names;
};

struct RawCitationFiles {
  std::filesystem::path edges;     // "<src> <dst>" per line
  std::filesystem::path features;  // "<id> <x_1> ... <x_d>" per line
  std::filesystem::path labels;    // "<id> <class>" per line
  std::optional<std::filesystem::path> years;  // "<id> <year>" per line
  /// Drop edges that reference unknown vertices instead of failing.
  bool drop_dangling = false;
};

/// Generic whitespace-separated raw files. Vertex order follows the feature file.
ConvertedGraph convert_citation_raw(const RawCitationFiles& files);

/// LINQS layout: "<id> <x_1> ... <x_d> <class>" content file and "<cited> <citing>" edges.
ConvertedGraph convert_linqs(const std::filesystem::path& content,
                             const std::filesystem::path& cites, bool drop_dangling = false);

/// Writes the bundle plus mapping.tsv (vertex \t original id) and classes.tsv.
void save_converted(const ConvertedGraph& converted, const std::filesystem::path& dir);

}  // namespace graphood
