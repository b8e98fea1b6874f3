#include "graphood/models.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "graphood/losses.hpp"

namespace graphood {

std::string_view to_string(BackboneKind kind) {
  switch (kind) {
    case BackboneKind::gcn: return "gcn";
    case BackboneKind::sage_mean: return "sage_mean";
    case BackboneKind::graph_mlp: return "graph_mlp";
  }
  return "?";
}

std::string_view to_string(HeadKind kind) {
  switch (kind) {
    case HeadKind::softmax_ce: return "softmax_ce";
    case HeadKind::sigmoid_bce_weighted: return "sigmoid_bce_weighted";
    case HeadKind::isomax_plus: return "isomax_plus";
  }
  return "?";
}

BackboneKind parse_backbone_kind(std::string_view name) {
  if (name == "gcn") return BackboneKind::gcn;
  if (name == "sage_mean") return BackboneKind::sage_mean;
  if (name == "graph_mlp") return BackboneKind::graph_mlp;
  throw ConfigError("unknown backbone kind '" + std::string(name) + "'");
}

HeadKind parse_head_kind(std::string_view name) {
  if (name == "softmax_ce") return HeadKind::softmax_ce;
  if (name == "sigmoid_bce_weighted") return HeadKind::sigmoid_bce_weighted;
  if (name == "isomax_plus") return HeadKind::isomax_plus;
  throw ConfigError("unknown head kind '" + std::string(name) + "'");
}

void BackboneConfig::validate() const {
  if (layers < 2) throw ConfigError("backbone: layers must be >= 2");
  if (hidden_dim < 1) throw ConfigError("backbone: hidden_dim must be >= 1");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw ConfigError("backbone: dropout in [0,1)");
  if (kind == BackboneKind::graph_mlp) {
    if (r < 1 || r > 3) throw ConfigError("backbone: r must be in {1,2,3}");
    if (tau <= 0.0) throw ConfigError("backbone: tau must be > 0");
    if (beta < 0.0) throw ConfigError("backbone: beta must be >= 0");
    if (batch_size < 2) throw ConfigError("backbone: batch_size must be >= 2");
  }
}

void HeadConfig::validate() const {
  if (entropic_scale < 1.0) throw ConfigError("head: entropic_scale must be >= 1");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be > 0");
}

int ModelState::class_index(int class_id) const {
  const auto it = std::find(known_class_ids.begin(), known_class_ids.end(), class_id);
  return it == known_class_ids.end() ? -1 : static_cast<int>(it - known_class_ids.begin());
}

std::optional<WeightedAdjacency> propagation_operator(BackboneKind kind, const Graph& g) {
  switch (kind) {
    case BackboneKind::gcn: return symmetric_normalize(g);
    case BackboneKind::sage_mean: return mean_adjacency(g);
    case BackboneKind::graph_mlp: return std::nullopt;
  }
  return std::nullopt;
}

ModelVars bind_parameters(Tape& tape, const ModelState& state, bool trainable) {
  auto bind = [&](const Matrix& m) { return trainable ? tape.variable(m) : tape.constant(m); };
  ModelVars vars;
  for (const auto& w : state.weights) vars.weights.push_back(bind(w));
  for (const auto& b : state.biases) vars.biases.push_back(bind(b));
  if (state.head.kind == HeadKind::isomax_plus) {
    vars.prototypes = bind(state.prototypes);
    vars.distance_scale = bind(Matrix::Constant(1, 1, state.distance_scale));
  }
  return vars;
}

TapeForward backbone_on_tape(const ModelState& state, const ModelVars& params,
                             const WeightedAdjacency* adjacency,
                             std::optional<Var> adjacency_weights, Var features, bool training,
                             std::uint64_t dropout_seed) {
  const auto& cfg = state.backbone;
  const std::size_t layers = params.weights.size();
  if (features.cols() != state.weights.front().rows() &&
      !(cfg.kind == BackboneKind::sage_mean &&
        2 * features.cols() == state.weights.front().rows())) {
    throw ShapeError("forward: feature dim does not match the first layer");
  }
  if (cfg.kind != BackboneKind::graph_mlp) {
    if (adjacency == nullptr || !adjacency_weights) {
      throw ShapeError("forward: message-passing backbone requires an adjacency operator");
    }
    if (adjacency->size() != features.rows()) {
      throw ShapeError("forward: adjacency size does not match vertex count");
    }
  }

  Var h = features;
  Var penultimate = features;
  for (std::size_t l = 0; l < layers; ++l) {
    const bool last = (l + 1 == layers);
    const std::uint64_t seed = derive_seed(dropout_seed, l);
    switch (cfg.kind) {
      case BackboneKind::gcn: {
        h = dropout(h, cfg.dropout_rate, seed, training);
        h = spmm(*adjacency->pattern, *adjacency_weights, matmul(h, params.weights[l]));
        h = add_bias(h, params.biases[l]);
        if (!last) h = relu(h);
        break;
      }
      case BackboneKind::sage_mean: {
        h = dropout(h, cfg.dropout_rate, seed, training);
        const Var nbr = spmm(*adjacency->pattern, *adjacency_weights, h);
        h = add_bias(matmul(concat_cols(h, nbr), params.weights[l]), params.biases[l]);
        if (!last) h = relu(h);
        break;
      }
      case BackboneKind::graph_mlp: {
        h = dropout(h, cfg.dropout_rate, seed, training);
        h = add_bias(matmul(h, params.weights[l]), params.biases[l]);
        if (!last) h = layer_norm(relu(h));
        break;
      }
    }
    if (!last) penultimate = h;
  }
  return TapeForward{penultimate, h};
}

Var head_logits(const ModelState& state, const ModelVars& params, Var output,
                double entropic_scale) {
  if (state.head.kind != HeadKind::isomax_plus) return output;
  return isomax_logits(output, *params.prototypes, *params.distance_scale, entropic_scale);
}

namespace {

Matrix glorot_uniform(Index fan_in, Index fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / double(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix w(fan_in, fan_out);
  for (Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
  return w;
}

ForwardResult run_inference(const ModelState& state, const WeightedAdjacency* adjacency,
                            const Matrix& features) {
  Tape tape;
  const ModelVars params = bind_parameters(tape, state, false);
  std::optional<Var> adj_w;
  if (adjacency) adj_w = tape.constant(Matrix(adjacency->weights));
  const Var x = tape.constant(features);
  const TapeForward fw = backbone_on_tape(state, params, adjacency, adj_w, x, false, 0);
  const Var logits = head_logits(state, params, fw.output, 1.0);
  const bool isomax = state.head.kind == HeadKind::isomax_plus;
  return ForwardResult{isomax ? fw.output.value() : fw.penultimate.value(), logits.value()};
}

void require_kind(const ModelState& state, BackboneKind kind, const char* op) {
  if (state.backbone.kind != kind) {
    throw ConfigError(std::string(op) + ": model backbone is " +
                      std::string(to_string(state.backbone.kind)));
  }
}

}  // namespace

ForwardResult gcn_forward(const WeightedAdjacency& norm_adj, const Matrix& features,
                          const ModelState& state) {
  require_kind(state, BackboneKind::gcn, "gcn_forward");
  return run_inference(state, &norm_adj, features);
}

ForwardResult sage_forward(const Graph& g, const Matrix& features, const ModelState& state) {
  require_kind(state, BackboneKind::sage_mean, "sage_forward");
  const WeightedAdjacency adj = mean_adjacency(g);
  return run_inference(state, &adj, features);
}

ForwardResult graphmlp_forward(const Matrix& features, const ModelState& state) {
  require_kind(state, BackboneKind::graph_mlp, "graphmlp_forward");
  return run_inference(state, nullptr, features);
}

ForwardResult forward(const Graph& g, const Matrix& features, const ModelState& state) {
  const auto adj = propagation_operator(state.backbone.kind, g);
  return run_inference(state, adj ? &*adj : nullptr, features);
}

ModelState init_model(const BackboneConfig& backbone, const HeadConfig& head, Index input_dim,
                      std::vector<int> known_class_ids, std::uint64_t seed) {
  backbone.validate();
  head.validate();
  if (known_class_ids.empty()) throw ConfigError("init_model: no known classes");
  ModelState s;
  s.backbone = backbone;
  s.head = head;
  s.known_class_ids = std::move(known_class_ids);

  const Index k = s.num_known_classes();
  const Index out_dim = head.kind == HeadKind::isomax_plus ? backbone.hidden_dim : k;
  std::mt19937_64 rng(derive_seed(seed, 0));
  Index in = input_dim;
  for (int l = 0; l < backbone.layers; ++l) {
    const Index out = (l + 1 == backbone.layers) ? out_dim : backbone.hidden_dim;
    const Index fan_in = backbone.kind == BackboneKind::sage_mean ? 2 * in : in;
    s.weights.push_back(glorot_uniform(fan_in, out, rng));
    s.biases.push_back(Matrix::Zero(1, out));
    in = out;
  }
  if (head.kind == HeadKind::isomax_plus) {
    std::normal_distribution<double> gauss(0.0, 0.01);
    s.prototypes.resize(k, out_dim);
    for (Index i = 0; i < s.prototypes.size(); ++i) s.prototypes.data()[i] = gauss(rng);
    s.distance_scale = 1.0;
  }
  return s;
}

namespace {

std::vector<Matrix*> parameter_slots(ModelState& s) {
  std::vector<Matrix*> slots;
  for (auto& w : s.weights) slots.push_back(&w);
  for (auto& b : s.biases) slots.push_back(&b);
  if (s.head.kind == HeadKind::isomax_plus) slots.push_back(&s.prototypes);
  return slots;
}

std::vector<Var> parameter_vars(const ModelVars& v) {
  std::vector<Var> out(v.weights);
  out.insert(out.end(), v.biases.begin(), v.biases.end());
  if (v.prototypes) out.push_back(*v.prototypes);
  if (v.distance_scale) out.push_back(*v.distance_scale);
  return out;
}

// Loss for one epoch given the model output. Returns the loss node.
using LossBuilder = std::function<Var(const ModelState&, const ModelVars&, const TapeForward&,
                                      int epoch)>;

std::vector<double> optimize(ModelState& state, const Graph& g, const Matrix& features,
                             const TrainConfig& cfg, const LossBuilder& build_loss) {
  cfg.validate();
  const auto adjacency = propagation_operator(state.backbone.kind, g);

  std::vector<Matrix> params;
  for (Matrix* p : parameter_slots(state)) params.push_back(*p);
  if (state.head.kind == HeadKind::isomax_plus) {
    params.push_back(Matrix::Constant(1, 1, state.distance_scale));
  }
  AdamState adam(cfg.learning_rate, params);

  std::vector<double> trace;
  trace.reserve(static_cast<std::size_t>(cfg.epochs));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Tape tape;
    const ModelVars vars = bind_parameters(tape, state, true);
    std::optional<Var> adj_w;
    if (adjacency) adj_w = tape.constant(Matrix(adjacency->weights));
    const Var x = tape.constant(features);
    const TapeForward fw =
        backbone_on_tape(state, vars, adjacency ? &*adjacency : nullptr, adj_w, x, true,
                         derive_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(epoch)));
    const Var loss = build_loss(state, vars, fw, epoch);
    tape.backward(loss);
    trace.push_back(loss.value()(0, 0));

    const std::vector<Var> pv = parameter_vars(vars);
    std::vector<Matrix> grads;
    grads.reserve(pv.size());
    for (Var v : pv) grads.push_back(v.grad());
    adam_step(adam, params, grads);

    std::size_t i = 0;
    for (Matrix* p : parameter_slots(state)) *p = params[i++];
    if (state.head.kind == HeadKind::isomax_plus) state.distance_scale = params[i](0, 0);
  }
  return trace;
}

}  // namespace

TrainResult train(const Graph& g, const BackboneConfig& backbone, const HeadConfig& head,
                  const TrainConfig& cfg, std::span<const Index> train_vertices) {
  return train(g, g.features(), g.labels(), backbone, head, cfg, train_vertices);
}

TrainResult train(const Graph& g, const Matrix& features, std::span<const int> labels,
                  const BackboneConfig& backbone, const HeadConfig& head, const TrainConfig& cfg,
                  std::span<const Index> train_vertices) {
  cfg.validate();
  backbone.validate();
  head.validate();
  if (train_vertices.empty()) throw ConfigError("train: empty training mask");
  if (features.rows() != g.num_vertices() || static_cast<Index>(labels.size()) != g.num_vertices()) {
    throw ShapeError("train: features/labels must cover every vertex");
  }

  std::set<int> classes;
  for (Index v : train_vertices) classes.insert(labels[v]);
  TrainResult result;
  result.state = init_model(backbone, head, features.cols(),
                            std::vector<int>(classes.begin(), classes.end()), cfg.seed);
  ModelState& state = result.state;

  // Class index per vertex; vertices outside the train set are never read.
  std::vector<int> targets(static_cast<std::size_t>(g.num_vertices()), 0);
  for (Index v : train_vertices) targets[v] = state.class_index(labels[v]);
  const std::vector<Index> rows(train_vertices.begin(), train_vertices.end());

  BceWeights bce;
  Matrix onehot;
  if (head.kind == HeadKind::sigmoid_bce_weighted) {
    bce = class_balance_weights(targets, rows, state.num_known_classes(), cfg.class_weighting);
    result.degenerate_class_weight = bce.degenerate;
    onehot = Matrix::Zero(g.num_vertices(), state.num_known_classes());
    for (Index v : rows) onehot(v, targets[v]) = 1.0;
  }

  std::optional<SparsePattern> hops;
  if (backbone.kind == BackboneKind::graph_mlp && backbone.beta > 0.0 && rows.size() >= 2) {
    hops = r_hop_mask(g, backbone.r);
  }

  auto build_loss = [&](const ModelState& s, const ModelVars& vars, const TapeForward& fw,
                        int epoch) {
    Var loss = [&] {
      switch (s.head.kind) {
        case HeadKind::softmax_ce: return loss_softmax_ce(fw.output, targets, rows);
        case HeadKind::sigmoid_bce_weighted: return loss_bce_weighted(fw.output, onehot, rows, bce);
        case HeadKind::isomax_plus:
          return loss_isomax(fw.output, *vars.prototypes, *vars.distance_scale,
                             s.head.entropic_scale, targets, rows);
      }
      throw ConfigError("train: unsupported head");
    }();
    if (hops) {
      // Uniform batch without replacement, re-drawn every epoch.
      std::vector<Index> batch = rows;
      std::mt19937_64 rng(derive_seed(cfg.seed, 7'000'000 + static_cast<std::uint64_t>(epoch)));
      std::shuffle(batch.begin(), batch.end(), rng);
      batch.resize(std::min<std::size_t>(batch.size(), static_cast<std::size_t>(s.backbone.batch_size)));
      std::sort(batch.begin(), batch.end());
      loss = loss + s.backbone.beta * loss_ncontrast(fw.penultimate, *hops, s.backbone.tau, batch);
    }
    return loss;
  };

  result.loss_trace = optimize(state, g, features, cfg, build_loss);
  return result;
}

TrainResult train_binary_detector(const Graph& g, const Matrix& features,
                                  std::span<const int> targets, const BackboneConfig& backbone,
                                  const TrainConfig& cfg, std::span<const Index> rows) {
  if (rows.empty()) throw ConfigError("train_binary_detector: empty row set");
  if (backbone.kind == BackboneKind::graph_mlp) {
    throw ConfigError("train_binary_detector: expects a message-passing backbone");
  }
  HeadConfig head{HeadKind::sigmoid_bce_weighted, 1.0};
  TrainResult result;
  result.state = init_model(backbone, head, features.cols(), {1}, cfg.seed);

  Matrix onehot = Matrix::Zero(g.num_vertices(), 1);
  double positives = 0.0;
  for (Index v : rows) {
    if (targets[v] != 0 && targets[v] != 1) throw ShapeError("binary targets must be 0/1");
    onehot(v, 0) = targets[v];
    positives += targets[v];
  }
  const double n = double(rows.size());
  BceWeights w;
  w.positive = Vector::Constant(1, (n - positives) / n);
  w.negative = Vector::Constant(1, positives / n);
  w.degenerate = positives == 0.0 || positives == n;
  result.degenerate_class_weight = w.degenerate;

  const std::vector<Index> row_list(rows.begin(), rows.end());
  auto build_loss = [&](const ModelState&, const ModelVars&, const TapeForward& fw, int) {
    return loss_bce_weighted(fw.output, onehot, row_list, w);
  };
  result.loss_trace = optimize(result.state, g, features, cfg, build_loss);
  return result;
}

std::vector<Index> mask_to_indices(const std::vector<bool>& mask) {
  std::vector<Index> out;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) out.push_back(static_cast<Index>(i));
  }
  return out;
}

std::vector<int> predict_classes(const ModelState& state, const Matrix& logits) {
  if (logits.cols() != state.num_known_classes()) {
    throw ShapeError("predict_classes: logits width differs from known class count");
  }
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Index i = 0; i < logits.rows(); ++i) {
    Index best = 0;
    logits.row(i).maxCoeff(&best);
    out[i] = state.known_class_ids[best];
  }
  return out;
}

}  // namespace graphood
