// Copyright 2026 The snd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef SND_AUTODIFF_HPP_
#define SND_AUTODIFF_HPP_

#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "snd/error.hpp"
#include "snd/parameters.hpp"
#include "snd/tensor.hpp"

namespace snd::ad {

class Graph;

// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph* graph() const { return graph_; }
  std::size_t id() const { return id_; }
  const Tensor& value() const;
  const Tensor& grad() const;
  bool requires_grad() const;

 private:
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

// Tape for reverse-mode differentiation. A non-recording graph evaluates the
// same ops without keeping backward closures, which is how inference runs.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t)>;

  explicit Graph(bool record = true) : record_(record) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return record_; }

  // Parameters read from `store` through Param() become differentiable
  // leaves whose gradients Backward() adds into store.
  void Train(ParameterStore& store) { trainable_ = &store; }

  Var Constant(Tensor value) { return Push(std::move(value), false, {}); }

  Var Variable(Tensor value) { return Push(std::move(value), record_, {}); }

  Var Param(const ParameterStore& store, const std::string& name) {
    const bool trainable = record_ && &store == trainable_;
    if (trainable) {
      auto it = param_ids_.find(name);
      if (it != param_ids_.end()) return Var(this, it->second);
    }
    Var v = Push(store.Value(name), trainable, {});
    if (trainable) param_ids_.emplace(name, v.id());
    return v;
  }

  Var Emit(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
    return Emit(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(fn));
  }

  Var Emit(Tensor value, std::span<const Var> inputs, BackwardFn fn) {
    Require(value.AllFinite(), ErrorCode::kDivergence, "non-finite op result");
    bool needs = false;
    if (record_)
      for (const Var& in : inputs) needs = needs || nodes_[in.id()].requires_grad;
    return Push(std::move(value), needs, needs ? std::move(fn) : BackwardFn{});
  }

  // Accumulates d(loss)/d(param) into the trained store. Callers zero the
  // store's gradients first when they want fresh values; parameters that
  // the loss does not reach receive nothing.
  void Backward(Var loss) {
    Require(loss.graph() == this, ErrorCode::kContract, "loss from another graph");
    Require(loss.value().size() == 1, ErrorCode::kContract,
            "backward needs a scalar loss, got " + ShapeString(loss.value().shape()));
    Require(record_, ErrorCode::kContract, "backward on a non-recording graph");
    GradOf(loss.id())[0] = 1.0;
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
      n.backward(*this, i);
    }
    if (trainable_ == nullptr) return;
    for (const auto& [name, id] : param_ids_) {
      const Tensor& g = nodes_[id].grad;
      if (g.empty()) continue;
      Tensor& dst = trainable_->MutableGrad(name);
      for (std::size_t k = 0; k < g.size(); ++k) dst[k] += g[k];
    }
  }

  const Tensor& ValueOf(std::size_t id) const { return nodes_[id].value; }
  bool RequiresGrad(std::size_t id) const { return nodes_[id].requires_grad; }

  const Tensor& GradValue(std::size_t id) {
    return GradOf(id);
  }

  // Gradient buffer for node `id`, allocated on first use.
  Tensor& GradOf(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty() && !n.value.empty()) n.grad = Tensor(n.value.shape());
    return n.grad;
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  Var Push(Tensor value, bool requires_grad, BackwardFn fn) {
    nodes_.push_back(Node{std::move(value), Tensor(), requires_grad, std::move(fn)});
    return Var(this, nodes_.size() - 1);
  }

  bool record_;
  ParameterStore* trainable_ = nullptr;
  std::map<std::string, std::size_t> param_ids_;
  std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return graph_->ValueOf(id_); }
inline const Tensor& Var::grad() const { return graph_->GradValue(id_); }
inline bool Var::requires_grad() const { return graph_->RequiresGrad(id_); }

namespace internal {

inline void Accumulate(Graph& g, const Var& v, const Tensor& delta) {
  if (!v.requires_grad()) return;
  Tensor& dst = g.GradOf(v.id());
  for (std::size_t i = 0; i < delta.size(); ++i) dst[i] += delta[i];
}

}  // namespace internal

inline Var Matmul(Var a, Var b) {
  Graph& g = *a.graph();
  return g.Emit(snd::Matmul(a.value(), b.value()), {a, b}, [a, b](Graph& g, std::size_t self) {
    const Tensor& up = g.GradOf(self);
    if (a.requires_grad()) internal::Accumulate(g, a, snd::Matmul(up, snd::Transpose(b.value())));
    if (b.requires_grad()) internal::Accumulate(g, b, snd::Matmul(snd::Transpose(a.value()), up));
  });
}

inline Var Transpose(Var a) {
  Graph& g = *a.graph();
  return g.Emit(snd::Transpose(a.value()), {a}, [a](Graph& g, std::size_t self) {
    internal::Accumulate(g, a, snd::Transpose(g.GradOf(self)));
  });
}

inline Var Add(Var a, Var b) {
  Graph& g = *a.graph();
  return g.Emit(snd::Add(a.value(), b.value()), {a, b}, [a, b](Graph& g, std::size_t self) {
    const Tensor up = g.GradOf(self);
    internal::Accumulate(g, a, up);
    internal::Accumulate(g, b, up);
  });
}

inline Var Sub(Var a, Var b) {
  Graph& g = *a.graph();
  return g.Emit(snd::Sub(a.value(), b.value()), {a, b}, [a, b](Graph& g, std::size_t self) {
    const Tensor up = g.GradOf(self);
    internal::Accumulate(g, a, up);
    internal::Accumulate(g, b, snd::Scale(up, -1.0));
  });
}

inline Var Scale(Var a, double s) {
  Graph& g = *a.graph();
  return g.Emit(snd::Scale(a.value(), s), {a}, [a, s](Graph& g, std::size_t self) {
    internal::Accumulate(g, a, snd::Scale(g.GradOf(self), s));
  });
}

// Elementwise product.
inline Var Mul(Var a, Var b) {
  RequireSameShape(a.value(), b.value(), "mul");
  Graph& g = *a.graph();
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return g.Emit(std::move(out), {a, b}, [a, b](Graph& g, std::size_t self) {
    const Tensor& up = g.GradOf(self);
    Tensor da = up, db = up;
    for (std::size_t i = 0; i < up.size(); ++i) {
      da[i] *= b.value()[i];
      db[i] *= a.value()[i];
    }
    internal::Accumulate(g, a, da);
    internal::Accumulate(g, b, db);
  });
}

// Adds a length-cols vector to every row.
inline Var AddRow(Var a, Var bias) {
  const Tensor& x = a.value();
  Require(bias.value().size() == x.cols(), ErrorCode::kDimension, "add_row bias size");
  Graph& g = *a.graph();
  Tensor out = x;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += bias.value()[c];
  return g.Emit(std::move(out), {a, bias}, [a, bias](Graph& g, std::size_t self) {
    const Tensor up = g.GradOf(self);
    internal::Accumulate(g, a, up);
    if (bias.requires_grad()) {
      Tensor db(bias.value().shape());
      for (std::size_t r = 0; r < up.rows(); ++r)
        for (std::size_t c = 0; c < up.cols(); ++c) db[c] += up(r, c);
      internal::Accumulate(g, bias, db);
    }
  });
}

inline Var SoftmaxRows(Var a, const std::vector<bool>& mask = {}) {
  Graph& g = *a.graph();
  Tensor y = snd::SoftmaxRows(a.value(), mask);
  return g.Emit(std::move(y), {a}, [a](Graph& g, std::size_t self) {
    const Tensor& y = g.ValueOf(self);
    const Tensor& up = g.GradOf(self);
    Tensor dx(y.shape());
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double s = Dot(up.row(r), y.row(r));
      for (std::size_t c = 0; c < y.cols(); ++c) dx(r, c) = y(r, c) * (up(r, c) - s);
    }
    internal::Accumulate(g, a, dx);
  });
}

inline Var LayerNorm(Var x, Var gain, Var bias, double eps) {
  Graph& g = *x.graph();
  const Tensor& in = x.value();
  const std::size_t d = in.cols(), rows = in.rows();
  Require(gain.value().size() == d && bias.value().size() == d, ErrorCode::kDimension,
          "layer_norm gain/bias size");
  Tensor xhat(in.shape());
  std::vector<double> inv(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    auto row = in.row(r);
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= d;
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    var /= d;
    inv[r] = 1.0 / std::sqrt(var + eps);
    if (!std::isfinite(inv[r])) inv[r] = 0.0;
    for (std::size_t c = 0; c < d; ++c) xhat(r, c) = (row[c] - mean) * inv[r];
  }
  Tensor out(in.shape());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < d; ++c)
      out(r, c) = xhat(r, c) * gain.value()[c] + bias.value()[c];
  return g.Emit(std::move(out), {x, gain, bias},
                [x, gain, bias, xhat = std::move(xhat), inv = std::move(inv)](Graph& g,
                                                                               std::size_t self) {
    const Tensor& up = g.GradOf(self);
    const std::size_t d = xhat.cols();
    if (gain.requires_grad() || bias.requires_grad()) {
      Tensor dg(gain.value().shape()), db(bias.value().shape());
      for (std::size_t r = 0; r < xhat.rows(); ++r)
        for (std::size_t c = 0; c < d; ++c) {
          dg[c] += up(r, c) * xhat(r, c);
          db[c] += up(r, c);
        }
      internal::Accumulate(g, gain, dg);
      internal::Accumulate(g, bias, db);
    }
    if (!x.requires_grad()) return;
    Tensor dx(xhat.shape());
    for (std::size_t r = 0; r < xhat.rows(); ++r) {
      double sum = 0.0, dot = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double dxh = up(r, c) * gain.value()[c];
        sum += dxh;
        dot += dxh * xhat(r, c);
      }
      for (std::size_t c = 0; c < d; ++c) {
        const double dxh = up(r, c) * gain.value()[c];
        dx(r, c) = inv[r] / d * (d * dxh - sum - xhat(r, c) * dot);
      }
    }
    internal::Accumulate(g, x, dx);
  });
}

inline Var Gelu(Var a) {
  Graph& g = *a.graph();
  return g.Emit(snd::Activation(a.value()), {a}, [a](Graph& g, std::size_t self) {
    Tensor dx = g.GradOf(self);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= GeluDerivative(a.value()[i]);
    internal::Accumulate(g, a, dx);
  });
}

inline Var Relu(Var a) {
  Graph& g = *a.graph();
  Tensor out = a.value();
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return g.Emit(std::move(out), {a}, [a](Graph& g, std::size_t self) {
    Tensor dx = g.GradOf(self);
    for (std::size_t i = 0; i < dx.size(); ++i)
      if (a.value()[i] <= 0.0) dx[i] = 0.0;
    internal::Accumulate(g, a, dx);
  });
}

// Concatenates matrices with equal row counts side by side.
inline Var ConcatCols(const std::vector<Var>& parts) {
  Require(!parts.empty(), ErrorCode::kEmptyInput, "concat of nothing");
  Graph& g = *parts.front().graph();
  const std::size_t rows = parts.front().value().rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    Require(p.value().rows() == rows, ErrorCode::kDimension, "concat_cols row mismatch");
    cols += p.value().cols();
  }
  Tensor out({rows, cols});
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < v.cols(); ++c) out(r, offset + c) = v(r, c);
    offset += v.cols();
  }
  return g.Emit(std::move(out), parts, [parts](Graph& g, std::size_t self) {
    const Tensor up = g.GradOf(self);
    std::size_t offset = 0;
    for (const Var& p : parts) {
      const Tensor& v = p.value();
      if (p.requires_grad()) {
        Tensor d(v.shape());
        for (std::size_t r = 0; r < v.rows(); ++r)
          for (std::size_t c = 0; c < v.cols(); ++c) d(r, c) = up(r, offset + c);
        internal::Accumulate(g, p, d);
      }
      offset += v.cols();
    }
  });
}

// Stacks matrices (or vectors, as single rows) with equal column counts.
inline Var ConcatRows(const std::vector<Var>& parts) {
  Require(!parts.empty(), ErrorCode::kEmptyInput, "concat of nothing");
  Graph& g = *parts.front().graph();
  const std::size_t cols = parts.front().value().cols();
  std::vector<double> data;
  for (const Var& p : parts) {
    Require(p.value().cols() == cols, ErrorCode::kDimension, "concat_rows column mismatch");
    data.insert(data.end(), p.value().data().begin(), p.value().data().end());
  }
  const std::size_t rows = data.size() / cols;
  return g.Emit(Tensor({rows, cols}, std::move(data)), parts,
                [parts](Graph& g, std::size_t self) {
    const Tensor up = g.GradOf(self);
    std::size_t offset = 0;
    for (const Var& p : parts) {
      const std::size_t n = p.value().size();
      if (p.requires_grad()) {
        Tensor d(p.value().shape());
        for (std::size_t i = 0; i < n; ++i) d[i] = up[offset + i];
        internal::Accumulate(g, p, d);
      }
      offset += n;
    }
  });
}

inline Var SliceRows(Var a, std::size_t begin, std::size_t count) {
  const Tensor& x = a.value();
  Require(begin + count <= x.rows(), ErrorCode::kDimension, "slice_rows out of range");
  Graph& g = *a.graph();
  const std::size_t cols = x.cols();
  std::vector<double> data(x.data().begin() + begin * cols,
                           x.data().begin() + (begin + count) * cols);
  return g.Emit(Tensor({count, cols}, std::move(data)), {a},
                [a, begin](Graph& g, std::size_t self) {
    const Tensor& up = g.GradOf(self);
    Tensor d(a.value().shape());
    const std::size_t off = begin * up.cols();
    for (std::size_t i = 0; i < up.size(); ++i) d[off + i] = up[i];
    internal::Accumulate(g, a, d);
  });
}

// Row idx[i] of `table` becomes row i of the result; gradients scatter back.
inline Var GatherRows(Var table, std::vector<std::size_t> idx) {
  const Tensor& t = table.value();
  const std::size_t cols = t.cols();
  Tensor out({idx.size(), cols});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    Require(idx[i] < t.rows(), ErrorCode::kDimension, "gather index out of range");
    std::copy(t.row(idx[i]).begin(), t.row(idx[i]).end(), out.row(i).begin());
  }
  Graph& g = *table.graph();
  return g.Emit(std::move(out), {table}, [table, idx = std::move(idx)](Graph& g, std::size_t self) {
    const Tensor& up = g.GradOf(self);
    Tensor d(table.value().shape());
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t c = 0; c < up.cols(); ++c) d(idx[i], c) += up(i, c);
    internal::Accumulate(g, table, d);
  });
}

// Mean over the rows with mask[r] == true (all rows when mask is empty);
// result has shape {1, cols}.
inline Var MeanRows(Var a, const std::vector<bool>& mask = {}) {
  const Tensor& x = a.value();
  Require(mask.empty() || mask.size() == x.rows(), ErrorCode::kDimension, "mean_rows mask");
  std::vector<double> weight(x.rows(), 0.0);
  std::size_t valid = 0;
  for (std::size_t r = 0; r < x.rows(); ++r)
    if (mask.empty() || mask[r]) ++valid;
  Require(valid > 0, ErrorCode::kDegenerateMask, "mean over no valid rows");
  for (std::size_t r = 0; r < x.rows(); ++r)
    if (mask.empty() || mask[r]) weight[r] = 1.0 / static_cast<double>(valid);
  Tensor out({1, x.cols()});
  for (std::size_t r = 0; r < x.rows(); ++r)
    if (weight[r] != 0.0)
      for (std::size_t c = 0; c < x.cols(); ++c) out[c] += weight[r] * x(r, c);
  Graph& g = *a.graph();
  return g.Emit(std::move(out), {a}, [a, weight](Graph& g, std::size_t self) {
    const Tensor& up = g.GradOf(self);
    Tensor d(a.value().shape());
    for (std::size_t r = 0; r < d.rows(); ++r)
      for (std::size_t c = 0; c < d.cols(); ++c) d(r, c) = weight[r] * up[c];
    internal::Accumulate(g, a, d);
  });
}

inline Var Sum(Var a) {
  Graph& g = *a.graph();
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return g.Emit(Tensor({1}, {s}), {a}, [a](Graph& g, std::size_t self) {
    const double up = g.GradOf(self)[0];
    internal::Accumulate(g, a, Tensor(a.value().shape(), up));
  });
}

inline Var SumSquares(Var a) {
  Graph& g = *a.graph();
  double s = 0.0;
  for (double v : a.value().data()) s += v * v;
  return g.Emit(Tensor({1}, {s}), {a}, [a](Graph& g, std::size_t self) {
    internal::Accumulate(g, a, snd::Scale(a.value(), 2.0 * g.GradOf(self)[0]));
  });
}

// Mean over all entries of (a - b)^2.
inline Var MeanSquaredError(Var a, Var b) {
  RequireSameShape(a.value(), b.value(), "mse");
  Graph& g = *a.graph();
  const std::size_t n = a.value().size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = a.value()[i] - b.value()[i];
    s += t * t;
  }
  return g.Emit(Tensor({1}, {s / n}), {a, b}, [a, b, n](Graph& g, std::size_t self) {
    const double up = g.GradOf(self)[0];
    Tensor diff = snd::Sub(a.value(), b.value());
    Tensor d = snd::Scale(diff, 2.0 * up / n);
    internal::Accumulate(g, a, d);
    internal::Accumulate(g, b, snd::Scale(d, -1.0));
  });
}

// Mean binary cross-entropy of logits (one per row) against 0/1 labels.
inline Var BceWithLogits(Var logits, const std::vector<double>& labels) {
  const Tensor& z = logits.value();
  Require(z.size() == labels.size(), ErrorCode::kDimension, "bce label count");
  Graph& g = *logits.graph();
  const std::size_t n = labels.size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = z[i];
    // log(1 + exp(-|x|)) + max(x, 0) - x*y
    s += std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0) - x * labels[i];
  }
  return g.Emit(Tensor({1}, {s / n}), {logits}, [logits, labels, n](Graph& g, std::size_t self) {
    const double up = g.GradOf(self)[0];
    Tensor d(logits.value().shape());
    for (std::size_t i = 0; i < n; ++i) {
      const double p = 1.0 / (1.0 + std::exp(-logits.value()[i]));
      d[i] = up * (p - labels[i]) / n;
    }
    internal::Accumulate(g, logits, d);
  });
}

}  // namespace snd::ad

#endif  // SND_AUTODIFF_HPP_
