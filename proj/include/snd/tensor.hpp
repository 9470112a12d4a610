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

#ifndef SND_TENSOR_HPP_
#define SND_TENSOR_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "snd/error.hpp"
#include "snd/rng.hpp"

namespace snd {

using Shape = std::vector<std::size_t>;

inline std::string ShapeString(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

// Dense row-major tensor of doubles. Everything before the last dimension is
// treated as rows, so a rank-1 tensor of size d is a single row.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(std::move(shape)), data_(Count(shape_), fill) {}

  Tensor(Shape shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    Require(Count(shape_) == data_.size(), ErrorCode::kDimension,
            "shape " + ShapeString(shape_) + " does not match " +
                std::to_string(data_.size()) + " values");
  }

  static Tensor Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    std::size_t r = rows.size();
    std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
      Require(row.size() == c, ErrorCode::kDimension, "ragged matrix literal");
      data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(data));
  }

  static Tensor Vector(std::vector<double> values) {
    std::size_t n = values.size();
    return Tensor({n}, std::move(values));
  }

  static Tensor Identity(std::size_t n) {
    Tensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
    return t;
  }

  static Tensor Normal(Shape shape, double stddev, Rng& rng) {
    Tensor t(std::move(shape));
    for (double& v : t.data_) v = stddev * rng.Normal();
    return t;
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t cols() const { return shape_.empty() ? 1 : shape_.back(); }
  std::size_t rows() const {
    std::size_t c = cols();
    return c == 0 ? 0 : data_.size() / c;
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols(), cols()};
  }

  Tensor Reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

  bool AllFinite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  static std::size_t Count(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           std::multiplies<>());
  }

  Shape shape_;
  std::vector<double> data_;
};

inline void RequireSameShape(const Tensor& a, const Tensor& b, const char* op) {
  Require(a.shape() == b.shape(), ErrorCode::kDimension,
          std::string(op) + ": " + ShapeString(a.shape()) + " vs " +
              ShapeString(b.shape()));
}

inline Tensor Matmul(const Tensor& a, const Tensor& b) {
  Require(a.rank() == 2 && b.rank() == 2 && a.cols() == b.rows(),
          ErrorCode::kDimension,
          "matmul: " + ShapeString(a.shape()) + " x " + ShapeString(b.shape()));
  const std::size_t m = a.rows(), k = a.cols(), p = b.cols();
  Tensor out({m, p});
  for (std::size_t i = 0; i < m; ++i) {
    double* o = out.data().data() + i * p;
    for (std::size_t j = 0; j < k; ++j) {
      const double aij = a(i, j);
      if (aij == 0.0) continue;
      const double* brow = b.data().data() + j * p;
      for (std::size_t c = 0; c < p; ++c) o[c] += aij * brow[c];
    }
  }
  return out;
}

inline Tensor Transpose(const Tensor& a) {
  Require(a.rank() == 2, ErrorCode::kDimension, "transpose needs a matrix");
  Tensor out({a.cols(), a.rows()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

inline Tensor Add(const Tensor& a, const Tensor& b) {
  RequireSameShape(a, b, "add");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

inline Tensor Sub(const Tensor& a, const Tensor& b) {
  RequireSameShape(a, b, "sub");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

inline Tensor Scale(const Tensor& a, double s) {
  Tensor out = a;
  for (double& v : out.data()) v *= s;
  return out;
}

// Row-wise softmax. Columns with mask[c] == false get exactly zero weight.
inline Tensor SoftmaxRows(const Tensor& x, const std::vector<bool>& mask = {}) {
  const std::size_t cols = x.cols();
  Require(mask.empty() || mask.size() == cols, ErrorCode::kDimension,
          "softmax mask length");
  if (!mask.empty())
    Require(std::any_of(mask.begin(), mask.end(), [](bool b) { return b; }),
            ErrorCode::kDegenerateMask, "every position is masked");
  Tensor out(x.shape());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.row(r);
    auto o = out.row(r);
    double mx = -INFINITY;
    for (std::size_t c = 0; c < cols; ++c)
      if (mask.empty() || mask[c]) mx = std::max(mx, in[c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      o[c] = (mask.empty() || mask[c]) ? std::exp(in[c] - mx) : 0.0;
      sum += o[c];
    }
    for (double& v : o) v /= sum;
  }
  return out;
}

inline Tensor LayerNorm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                        double eps) {
  const std::size_t d = x.cols();
  Require(gain.size() == d && bias.size() == d, ErrorCode::kDimension,
          "layer_norm gain/bias size");
  Tensor out(x.shape());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.row(r);
    double mean = std::accumulate(in.begin(), in.end(), 0.0) / d;
    double var = 0.0;
    for (double v : in) var += (v - mean) * (v - mean);
    var /= d;
    double inv = 1.0 / std::sqrt(var + eps);
    if (!std::isfinite(inv)) inv = 0.0;  // zero variance with eps == 0
    auto o = out.row(r);
    for (std::size_t c = 0; c < d; ++c)
      o[c] = (in[c] - mean) * inv * gain[c] + bias[c];
  }
  return out;
}

// tanh-form GELU.
inline double Gelu(double x) {
  constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
  return 0.5 * x * (1.0 + std::tanh(kC * (x + 0.044715 * x * x * x)));
}

inline double GeluDerivative(double x) {
  constexpr double kC = 0.7978845608028654;
  const double u = kC * (x + 0.044715 * x * x * x);
  const double t = std::tanh(u);
  const double du = kC * (1.0 + 3.0 * 0.044715 * x * x);
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

inline Tensor Activation(const Tensor& x) {
  Tensor out = x;
  for (double& v : out.data()) v = Gelu(v);
  return out;
}

inline double Dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double Norm(std::span<const double> a) { return std::sqrt(Dot(a, a)); }

inline double SquaredDistance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = a[i] - b[i];
    s += t * t;
  }
  return s;
}

inline double Distance(std::span<const double> a, std::span<const double> b) {
  return std::sqrt(SquaredDistance(a, b));
}

inline double CosineSimilarity(std::span<const double> a, std::span<const double> b) {
  const double na = Norm(a), nb = Norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return Dot(a, b) / (na * nb);
}

// Mean of squared coordinate differences.
inline double MeanSquaredError(std::span<const double> a, std::span<const double> b) {
  return a.empty() ? 0.0 : SquaredDistance(a, b) / static_cast<double>(a.size());
}

inline double MaxAbsDiff(const Tensor& a, const Tensor& b) {
  RequireSameShape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Mean over rows; result has shape {cols}.
inline Tensor MeanRows(const Tensor& x) {
  Tensor out({x.cols()});
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) out[c] += x(r, c);
  for (double& v : out.data()) v /= static_cast<double>(x.rows());
  return out;
}

// Round every entry to the nearest 32-bit float (ties to even).
inline Tensor RoundToFloat32(const Tensor& x) {
  Tensor out = x;
  for (double& v : out.data()) v = static_cast<double>(static_cast<float>(v));
  return out;
}

}  // namespace snd

#endif  // SND_TENSOR_HPP_
