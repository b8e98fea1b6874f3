#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "graphood/common.hpp"
#include "graphood/graph.hpp"

namespace graphood {

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  std::int32_t id = -1;

  const Matrix& value() const;
  const Matrix& grad() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  bool requires_grad() const;
};

/// Linear record of primitive applications. backward() replays the backward
/// closures in exact reverse order of recording, so gradient accumulation order
/// is fixed and results are bitwise reproducible.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Matrix& out_grad)>;

  /// Leaf whose gradient is tracked (parameters and differentiated inputs).
  Var variable(Matrix value);
  /// Leaf without gradient.
  Var constant(Matrix value);

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  /// Gradient of the last backward() target; a zero matrix if v was not reached.
  const Matrix& grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Seeds d(loss)/d(loss) = 1 and propagates. Throws ShapeError unless loss is 1x1.
  void backward(Var loss);

  // Primitive-author interface.
  Var record(std::string_view op, Matrix value, std::initializer_list<Var> parents,
             BackwardFn fn);
  void accumulate(Var v, const Matrix& contribution);
  template <typename Derived>
  void accumulate(Var v, const Eigen::MatrixBase<Derived>& contribution) {
    accumulate(v, Matrix(contribution));
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    BackwardFn backward;
  };
  // deque keeps references to existing nodes stable while recording.
  std::deque<Node> nodes_;
};

inline const Matrix& Var::value() const { return tape->value(*this); }
inline const Matrix& Var::grad() const { return tape->grad(*this); }
inline bool Var::requires_grad() const { return tape->requires_grad(*this); }

// Dense primitives.
Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double c);
/// a * s where s is a 1x1 node.
Var scale_by(Var a, Var s);
/// Adds a 1 x cols row vector to every row.
Var add_bias(Var a, Var bias);
Var relu(Var a);
Var sigmoid(Var a);
Var row_softmax(Var a);
Var row_log_softmax(Var a);
/// Inverted dropout; identity when !training or rate == 0. The mask is a pure
/// function of seed.
Var dropout(Var a, double rate, std::uint64_t seed, bool training);
/// Row-wise standardization without affine parameters; an all-zero row maps to zeros.
Var layer_norm(Var a, double eps = 1e-5);
/// x / max(||x||, eps) per row.
Var row_l2_normalize(Var a, double eps = 1e-12);
Var concat_cols(Var a, Var b);
Var gather_rows(Var a, std::span<const Index> rows);
/// Cosine similarity between every row of a and every row of b.
Var cosine_similarity(Var a, Var b);
/// Euclidean distance between every row of a and every row of b.
Var pairwise_distance(Var a, Var b);
Var sum(Var a);
Var mean(Var a);

/// out[i] = sum_e weights[e] * x[indices[e]] over row i of the pattern.
/// weights is an nnz x 1 node, so gradients reach individual adjacency entries.
/// The pattern is captured by address and must outlive the tape.
Var spmm(const SparsePattern& pattern, Var weights, Var x);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, double c) { return scale(a, c); }
inline Var operator*(double c, Var a) { return scale(a, c); }

/// Adam with bias correction. Weight decay is fixed at zero.
struct AdamState {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  static constexpr double kWeightDecay = 0.0;
  std::int64_t step = 0;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;

  AdamState() = default;
  AdamState(double lr, std::span<const Matrix> params);
};

void adam_step(AdamState& state, std::span<Matrix> params, std::span<const Matrix> grads);

struct GradCheckResult {
  bool passed = false;
  double max_rel_error = 0.0;
};

using ScalarFunction = std::function<Var(Tape&, std::span<const Var>)>;

/// Compares backward() against central differences for every entry of every
/// input. Relative error is |g - fd| / max(|g|, |fd|, 1e-6).
GradCheckResult finite_diff_check(const ScalarFunction& f, const std::vector<Matrix>& inputs,
                                  double h = 1e-4, double tolerance = 1e-4);

}  // namespace graphood
