#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "graphood/autodiff.hpp"
#include "graphood/graph.hpp"

namespace graphood {

enum class BackboneKind { gcn, sage_mean, graph_mlp };
enum class HeadKind { softmax_ce, sigmoid_bce_weighted, isomax_plus };

std::string_view to_string(BackboneKind kind);
std::string_view to_string(HeadKind kind);
BackboneKind parse_backbone_kind(std::string_view name);
HeadKind parse_head_kind(std::string_view name);

struct BackboneConfig {
  BackboneKind kind = BackboneKind::gcn;
  int layers = 2;
  int hidden_dim = 64;
  double dropout_rate = 0.5;
  // Graph-MLP only.
  int r = 2;
  double tau = 1.0;
  double beta = 1.0;
  int batch_size = 256;

  void validate() const;
};

struct HeadConfig {
  HeadKind kind = HeadKind::softmax_ce;
  /// IsoMax+ entropic scale used during training; inference always uses 1.
  double entropic_scale = 10.0;

  void validate() const;
};

struct TrainConfig {
  int epochs = 200;
  double learning_rate = 0.01;
  std::uint64_t seed = 0;
  bool class_weighting = true;

  void validate() const;
};

/// Trained parameters. Layer l maps weights[l].rows() inputs to weights[l].cols()
/// outputs; SAGE layers take the concatenated (self, neighbor-mean) input.
struct ModelState {
  BackboneConfig backbone;
  HeadConfig head;
  std::vector<Matrix> weights;
  std::vector<Matrix> biases;
  Matrix prototypes;  // known classes x embedding dim (IsoMax+ only)
  double distance_scale = 1.0;
  std::vector<int> known_class_ids;

  Index num_known_classes() const { return static_cast<Index>(known_class_ids.size()); }
  /// Position of class id in known_class_ids, or -1.
  int class_index(int class_id) const;
};

/// Graph operator consumed by a backbone: normalized adjacency for GCN, mean
/// adjacency for SAGE, nothing for Graph-MLP.
std::optional<WeightedAdjacency> propagation_operator(BackboneKind kind, const Graph& g);

/// Output of an inference pass. For the IsoMax+ head, embeddings is the
/// final-layer output compared against prototypes; otherwise it is the
/// penultimate activation. Logits are class scores over known classes (for
/// IsoMax+: -d * distance, entropic scale removed).
struct ForwardResult {
  Matrix embeddings;
  Matrix logits;
};

ForwardResult gcn_forward(const WeightedAdjacency& norm_adj, const Matrix& features,
                          const ModelState& state);
ForwardResult sage_forward(const Graph& g, const Matrix& features, const ModelState& state);
ForwardResult graphmlp_forward(const Matrix& features, const ModelState& state);
/// Dispatches on state.backbone.kind.
ForwardResult forward(const Graph& g, const Matrix& features, const ModelState& state);

/// Parameters bound to a tape, in the order used by the optimizer.
struct ModelVars {
  std::vector<Var> weights;
  std::vector<Var> biases;
  std::optional<Var> prototypes;
  std::optional<Var> distance_scale;
};

ModelVars bind_parameters(Tape& tape, const ModelState& state, bool trainable);

struct TapeForward {
  Var penultimate;
  Var output;
};

/// Backbone pass on a tape. adjacency/adjacency_weights are ignored for
/// Graph-MLP. The adjacency pattern must outlive the tape.
TapeForward backbone_on_tape(const ModelState& state, const ModelVars& params,
                             const WeightedAdjacency* adjacency,
                             std::optional<Var> adjacency_weights, Var features, bool training,
                             std::uint64_t dropout_seed);

/// Class logits from a backbone output for the configured head.
Var head_logits(const ModelState& state, const ModelVars& params, Var output,
                double entropic_scale);

/// Fresh parameters: Glorot-uniform weights, zero biases, prototypes ~ N(0, 0.01).
ModelState init_model(const BackboneConfig& backbone, const HeadConfig& head, Index input_dim,
                      std::vector<int> known_class_ids, std::uint64_t seed);

struct TrainResult {
  ModelState state;
  std::vector<double> loss_trace;
  /// A class weight collapsed to zero (every training vertex in one class).
  bool degenerate_class_weight = false;
};

/// Inductive full-batch training on the given vertices of g. Known classes are
/// the distinct labels among train_vertices.
TrainResult train(const Graph& g, const BackboneConfig& backbone, const HeadConfig& head,
                  const TrainConfig& cfg, std::span<const Index> train_vertices);

/// Same, with explicit input features and labels (labels indexed by vertex).
TrainResult train(const Graph& g, const Matrix& features, std::span<const int> labels,
                  const BackboneConfig& backbone, const HeadConfig& head, const TrainConfig& cfg,
                  std::span<const Index> train_vertices);

/// Single-logit detector trained with class-balanced sigmoid BCE on 0/1
/// targets: each class c in {0, 1} is weighted by (n - n_c) / n.
TrainResult train_binary_detector(const Graph& g, const Matrix& features,
                                  std::span<const int> targets, const BackboneConfig& backbone,
                                  const TrainConfig& cfg, std::span<const Index> rows);

/// Indices of set entries.
std::vector<Index> mask_to_indices(const std::vector<bool>& mask);

/// argmax over logits mapped back to class ids.
std::vector<int> predict_classes(const ModelState& state, const Matrix& logits);

}  // namespace graphood
