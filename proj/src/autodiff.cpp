#include "graphood/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace graphood {

Var Tape::variable(Matrix value) {
  if (!value.allFinite()) throw NumericalError("variable: non-finite input");
  nodes_.push_back(Node{std::move(value), Matrix(), true, nullptr});
  return Var{this, static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Tape::constant(Matrix value) {
  if (!value.allFinite()) throw NumericalError("constant: non-finite input");
  nodes_.push_back(Node{std::move(value), Matrix(), false, nullptr});
  return Var{this, static_cast<std::int32_t>(nodes_.size() - 1)};
}

const Matrix& Tape::grad(Var v) const {
  auto& node = const_cast<Node&>(nodes_[v.id]);
  if (node.grad.size() == 0 && node.value.size() != 0) {
    node.grad = Matrix::Zero(node.value.rows(), node.value.cols());
  }
  return node.grad;
}

Var Tape::record(std::string_view op, Matrix value, std::initializer_list<Var> parents,
                 BackwardFn fn) {
  if (!value.allFinite()) {
    throw NumericalError(std::string(op) + ": non-finite output");
  }
  bool needs_grad = false;
  for (Var p : parents) needs_grad = needs_grad || nodes_[p.id].requires_grad;
  nodes_.push_back(Node{std::move(value), Matrix(), needs_grad, needs_grad ? std::move(fn) : nullptr});
  return Var{this, static_cast<std::int32_t>(nodes_.size() - 1)};
}

void Tape::accumulate(Var v, const Matrix& contribution) {
  Node& node = nodes_[v.id];
  if (!node.requires_grad) return;
  if (node.grad.size() == 0) {
    node.grad = contribution;
  } else {
    node.grad += contribution;
  }
}

void Tape::backward(Var loss) {
  if (value(loss).rows() != 1 || value(loss).cols() != 1) {
    throw ShapeError("backward: loss must be a 1x1 node");
  }
  for (auto& node : nodes_) node.grad.resize(0, 0);
  nodes_[loss.id].grad = Matrix::Ones(1, 1);
  for (std::int32_t i = loss.id; i >= 0; --i) {
    Node& node = nodes_[i];
    if (!node.requires_grad || !node.backward || node.grad.size() == 0) continue;
    node.backward(*this, node.grad);
  }
}

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw ShapeError(what);
}

void require_same_shape(Var a, Var b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()) + ")");
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions differ (" + std::to_string(a.cols()) + " vs " +
                     std::to_string(b.rows()) + ")");
  }
  Matrix out = a.value() * b.value();
  return a.tape->record("matmul", std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (t.requires_grad(a)) t.accumulate(a, g * t.value(b).transpose());
    if (t.requires_grad(b)) t.accumulate(b, t.value(a).transpose() * g);
  });
}

Var transpose(Var a) {
  return a.tape->record("transpose", a.value().transpose(), {a},
                        [a](Tape& t, const Matrix& g) { t.accumulate(a, g.transpose()); });
}

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  return a.tape->record("add", a.value() + b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  return a.tape->record("sub", a.value() - b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, -g);
  });
}

Var scale(Var a, double c) {
  return a.tape->record("scale", a.value() * c, {a},
                        [a, c](Tape& t, const Matrix& g) { t.accumulate(a, g * c); });
}

Var scale_by(Var a, Var s) {
  require(s.rows() == 1 && s.cols() == 1, "scale_by: scale must be 1x1");
  const double c = s.value()(0, 0);
  return a.tape->record("scale_by", a.value() * c, {a, s}, [a, s](Tape& t, const Matrix& g) {
    if (t.requires_grad(a)) t.accumulate(a, g * t.value(s)(0, 0));
    if (t.requires_grad(s)) {
      Matrix gs(1, 1);
      gs(0, 0) = g.cwiseProduct(t.value(a)).sum();
      t.accumulate(s, gs);
    }
  });
}

Var add_bias(Var a, Var bias) {
  require(bias.rows() == 1 && bias.cols() == a.cols(), "add_bias: bias must be 1 x cols");
  Matrix out = a.value().rowwise() + bias.value().row(0);
  return a.tape->record("add_bias", std::move(out), {a, bias},
                        [a, bias](Tape& t, const Matrix& g) {
                          t.accumulate(a, g);
                          if (t.requires_grad(bias)) t.accumulate(bias, g.colwise().sum());
                        });
}

Var relu(Var a) {
  Matrix out = a.value().cwiseMax(0.0);
  return a.tape->record("relu", std::move(out), {a}, [a](Tape& t, const Matrix& g) {
    const Matrix& x = t.value(a);
    t.accumulate(a, g.cwiseProduct((x.array() > 0.0).cast<double>().matrix()));
  });
}

Var sigmoid(Var a) {
  Matrix out = a.value().unaryExpr([](double x) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  });
  Matrix y = out;
  return a.tape->record("sigmoid", std::move(out), {a}, [a, y](Tape& t, const Matrix& g) {
    t.accumulate(a, g.array() * y.array() * (1.0 - y.array()));
  });
}

namespace {

Matrix softmax_rows(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    const double m = x.row(i).maxCoeff();
    out.row(i) = (x.row(i).array() - m).exp();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

}  // namespace

Var row_softmax(Var a) {
  Matrix y = softmax_rows(a.value());
  Matrix out = y;
  return a.tape->record("row_softmax", std::move(out), {a}, [a, y](Tape& t, const Matrix& g) {
    Matrix gx(y.rows(), y.cols());
    for (Index i = 0; i < y.rows(); ++i) {
      const double dot = g.row(i).dot(y.row(i));
      gx.row(i) = y.row(i).array() * (g.row(i).array() - dot);
    }
    t.accumulate(a, gx);
  });
}

Var row_log_softmax(Var a) {
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    const double m = x.row(i).maxCoeff();
    const double lse = m + std::log((x.row(i).array() - m).exp().sum());
    out.row(i) = x.row(i).array() - lse;
  }
  Matrix y = out.array().exp();
  return a.tape->record("row_log_softmax", std::move(out), {a},
                        [a, y](Tape& t, const Matrix& g) {
                          Matrix gx(y.rows(), y.cols());
                          for (Index i = 0; i < y.rows(); ++i) {
                            gx.row(i) = g.row(i) - y.row(i) * g.row(i).sum();
                          }
                          t.accumulate(a, gx);
                        });
}

Var dropout(Var a, double rate, std::uint64_t seed, bool training) {
  if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout: rate must be in [0, 1)");
  if (!training || rate == 0.0) return a;
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution keep(1.0 - rate);
  const double inv = 1.0 / (1.0 - rate);
  Matrix mask(a.rows(), a.cols());
  for (Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? inv : 0.0;
  Matrix out = a.value().cwiseProduct(mask);
  return a.tape->record("dropout", std::move(out), {a}, [a, mask](Tape& t, const Matrix& g) {
    t.accumulate(a, g.cwiseProduct(mask));
  });
}

Var layer_norm(Var a, double eps) {
  const Matrix& x = a.value();
  const Index n = x.cols();
  Matrix y(x.rows(), n);
  Vector inv_std(x.rows());
  for (Index i = 0; i < x.rows(); ++i) {
    const double mu = x.row(i).mean();
    const double var = (x.row(i).array() - mu).square().mean();
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    y.row(i) = (x.row(i).array() - mu) * inv_std[i];
  }
  Matrix out = y;
  return a.tape->record("layer_norm", std::move(out), {a},
                        [a, y, inv_std, n](Tape& t, const Matrix& g) {
                          Matrix gx(y.rows(), n);
                          for (Index i = 0; i < y.rows(); ++i) {
                            const double gm = g.row(i).mean();
                            const double gy = g.row(i).dot(y.row(i)) / double(n);
                            gx.row(i) =
                                inv_std[i] * (g.row(i).array() - gm - y.row(i).array() * gy);
                          }
                          t.accumulate(a, gx);
                        });
}

Var row_l2_normalize(Var a, double eps) {
  const Matrix& x = a.value();
  Vector norms(x.rows());
  Matrix y(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    norms[i] = std::max(x.row(i).norm(), eps);
    y.row(i) = x.row(i) / norms[i];
  }
  Matrix out = y;
  return a.tape->record("row_l2_normalize", std::move(out), {a},
                        [a, y, norms, eps](Tape& t, const Matrix& g) {
                          Matrix gx(y.rows(), y.cols());
                          for (Index i = 0; i < y.rows(); ++i) {
                            if (norms[i] > eps) {
                              gx.row(i) = (g.row(i) - y.row(i) * y.row(i).dot(g.row(i))) / norms[i];
                            } else {
                              gx.row(i) = g.row(i) / eps;
                            }
                          }
                          t.accumulate(a, gx);
                        });
}

Var concat_cols(Var a, Var b) {
  require(a.rows() == b.rows(), "concat_cols: row counts differ");
  const Index ca = a.cols();
  Matrix out(a.rows(), ca + b.cols());
  out.leftCols(ca) = a.value();
  out.rightCols(b.cols()) = b.value();
  return a.tape->record("concat_cols", std::move(out), {a, b},
                        [a, b, ca](Tape& t, const Matrix& g) {
                          if (t.requires_grad(a)) t.accumulate(a, g.leftCols(ca));
                          if (t.requires_grad(b)) t.accumulate(b, g.rightCols(g.cols() - ca));
                        });
}

Var gather_rows(Var a, std::span<const Index> rows) {
  std::vector<Index> idx(rows.begin(), rows.end());
  Matrix out(static_cast<Index>(idx.size()), a.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    require(idx[r] >= 0 && idx[r] < a.rows(), "gather_rows: index out of range");
    out.row(static_cast<Index>(r)) = a.value().row(idx[r]);
  }
  return a.tape->record("gather_rows", std::move(out), {a}, [a, idx](Tape& t, const Matrix& g) {
    Matrix gx = Matrix::Zero(t.value(a).rows(), t.value(a).cols());
    for (std::size_t r = 0; r < idx.size(); ++r) gx.row(idx[r]) += g.row(static_cast<Index>(r));
    t.accumulate(a, gx);
  });
}

Var cosine_similarity(Var a, Var b) {
  require(a.cols() == b.cols(), "cosine_similarity: column counts differ");
  if (a.id == b.id) {
    const Var an = row_l2_normalize(a);
    return matmul(an, transpose(an));
  }
  return matmul(row_l2_normalize(a), transpose(row_l2_normalize(b)));
}

Var pairwise_distance(Var a, Var b) {
  require(a.cols() == b.cols(), "pairwise_distance: column counts differ");
  const Matrix& x = a.value();
  const Matrix& p = b.value();
  Matrix d(x.rows(), p.rows());
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index k = 0; k < p.rows(); ++k) d(i, k) = (x.row(i) - p.row(k)).norm();
  }
  Matrix dist = d;
  return a.tape->record("pairwise_distance", std::move(d), {a, b},
                        [a, b, dist](Tape& t, const Matrix& g) {
                          const Matrix& x = t.value(a);
                          const Matrix& p = t.value(b);
                          Matrix gx = Matrix::Zero(x.rows(), x.cols());
                          Matrix gp = Matrix::Zero(p.rows(), p.cols());
                          for (Index i = 0; i < x.rows(); ++i) {
                            for (Index k = 0; k < p.rows(); ++k) {
                              if (dist(i, k) <= 0.0) continue;
                              const double c = g(i, k) / dist(i, k);
                              gx.row(i) += c * (x.row(i) - p.row(k));
                              gp.row(k) -= c * (x.row(i) - p.row(k));
                            }
                          }
                          t.accumulate(a, gx);
                          t.accumulate(b, gp);
                        });
}

Var sum(Var a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  const Index r = a.rows(), c = a.cols();
  return a.tape->record("sum", std::move(out), {a}, [a, r, c](Tape& t, const Matrix& g) {
    t.accumulate(a, Matrix::Constant(r, c, g(0, 0)));
  });
}

Var mean(Var a) {
  require(a.value().size() > 0, "mean: empty operand");
  return scale(sum(a), 1.0 / double(a.value().size()));
}

Var spmm(const SparsePattern& pattern, Var weights, Var x) {
  require(weights.rows() == pattern.nnz() && weights.cols() == 1,
          "spmm: weights must be nnz x 1");
  require(x.rows() == pattern.cols, "spmm: operand rows must equal pattern cols");
  const Matrix& w = weights.value();
  const Matrix& xv = x.value();
  Matrix out = Matrix::Zero(pattern.rows, xv.cols());
  for (Index i = 0; i < pattern.rows; ++i) {
    for (Index e = pattern.offsets[i]; e < pattern.offsets[i + 1]; ++e) {
      out.row(i) += w(e, 0) * xv.row(pattern.indices[e]);
    }
  }
  const SparsePattern* p = &pattern;
  return x.tape->record("spmm", std::move(out), {weights, x},
                        [p, weights, x](Tape& t, const Matrix& g) {
                          const Matrix& w = t.value(weights);
                          const Matrix& xv = t.value(x);
                          if (t.requires_grad(x)) {
                            Matrix gx = Matrix::Zero(xv.rows(), xv.cols());
                            for (Index i = 0; i < p->rows; ++i) {
                              for (Index e = p->offsets[i]; e < p->offsets[i + 1]; ++e) {
                                gx.row(p->indices[e]) += w(e, 0) * g.row(i);
                              }
                            }
                            t.accumulate(x, gx);
                          }
                          if (t.requires_grad(weights)) {
                            Matrix gw(p->nnz(), 1);
                            for (Index i = 0; i < p->rows; ++i) {
                              for (Index e = p->offsets[i]; e < p->offsets[i + 1]; ++e) {
                                gw(e, 0) = g.row(i).dot(xv.row(p->indices[e]));
                              }
                            }
                            t.accumulate(weights, gw);
                          }
                        });
}

AdamState::AdamState(double lr, std::span<const Matrix> params) : learning_rate(lr) {
  for (const auto& p : params) {
    first_moment.push_back(Matrix::Zero(p.rows(), p.cols()));
    second_moment.push_back(Matrix::Zero(p.rows(), p.cols()));
  }
}

void adam_step(AdamState& s, std::span<Matrix> params, std::span<const Matrix> grads) {
  if (params.size() != grads.size() || params.size() != s.first_moment.size()) {
    throw ShapeError("adam_step: parameter/gradient/state counts differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].rows() != grads[i].rows() || params[i].cols() != grads[i].cols() ||
        s.first_moment[i].rows() != params[i].rows() ||
        s.first_moment[i].cols() != params[i].cols()) {
      throw ShapeError("adam_step: shape mismatch at parameter " + std::to_string(i));
    }
  }
  ++s.step;
  const double c1 = 1.0 - std::pow(s.beta1, double(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, double(s.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = s.first_moment[i];
    auto& v = s.second_moment[i];
    m = s.beta1 * m + (1.0 - s.beta1) * grads[i];
    v = s.beta2 * v + (1.0 - s.beta2) * grads[i].cwiseAbs2();
    params[i].array() -=
        s.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + s.epsilon);
  }
}

GradCheckResult finite_diff_check(const ScalarFunction& f, const std::vector<Matrix>& inputs,
                                  double h, double tolerance) {
  auto evaluate = [&](const std::vector<Matrix>& xs) {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& x : xs) vars.push_back(tape.constant(x));
    return f(tape, vars).value()(0, 0);
  };

  Tape tape;
  std::vector<Var> vars;
  for (const auto& x : inputs) vars.push_back(tape.variable(x));
  const Var loss = f(tape, vars);
  tape.backward(loss);

  GradCheckResult result;
  std::vector<Matrix> probe = inputs;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Matrix analytic = vars[k].grad();
    for (Index i = 0; i < inputs[k].size(); ++i) {
      double& slot = probe[k].data()[i];
      const double orig = slot;
      slot = orig + h;
      const double fp = evaluate(probe);
      slot = orig - h;
      const double fm = evaluate(probe);
      slot = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic.data()[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
      result.max_rel_error = std::max(result.max_rel_error, std::abs(a - numeric) / denom);
    }
  }
  result.passed = result.max_rel_error <= tolerance;
  return result;
}

}  // namespace graphood
