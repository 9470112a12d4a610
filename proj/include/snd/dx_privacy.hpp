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

#ifndef SND_DX_PRIVACY_HPP_
#define SND_DX_PRIVACY_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "snd/error.hpp"
#include "snd/rng.hpp"
#include "snd/tensor.hpp"
#include "snd/vocab.hpp"

namespace snd {

// Sentinel for the no-noise control arm: privatization becomes the identity.
inline constexpr double kInfiniteEta = std::numeric_limits<double>::infinity();

inline bool IsInfiniteEta(double eta) { return std::isinf(eta) && eta > 0; }

inline void ValidateEta(double eta) {
  Require(eta > 0.0 && !std::isnan(eta), ErrorCode::kInvalidArgument,
          "eta must be positive, got " + std::to_string(eta));
}

struct PrivacyParams {
  double eta = kInfiniteEta;
  bool clip_enabled = true;

  bool no_noise() const { return IsInfiniteEta(eta); }
};

// Gamma(shape, scale) by Marsaglia-Tsang rejection. Shapes below one use the
// U^(1/shape) boost.
inline double SampleGamma(double shape, double scale, Rng& rng) {
  Require(shape > 0.0 && scale > 0.0, ErrorCode::kInvalidArgument, "gamma parameters");
  if (shape < 1.0) {
    const double u = rng.UniformOpen();
    return SampleGamma(shape + 1.0, scale, rng) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  while (true) {
    double x, v;
    do {
      x = rng.Normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.UniformOpen();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v * scale;
  }
}

// z = l * v with l ~ Gamma(d, 1/eta) and v uniform on the unit sphere, which
// has density proportional to exp(-eta * ||z||).
struct NoiseSample {
  double radius = 0.0;
  std::vector<double> direction;
  std::vector<double> z;
};

inline NoiseSample SampleNoise(std::size_t d, double eta, Rng& rng) {
  Require(d >= 1, ErrorCode::kInvalidArgument, "noise dimension must be >= 1");
  ValidateEta(eta);
  Require(!IsInfiniteEta(eta), ErrorCode::kInvalidArgument, "no noise to sample at infinite eta");
  NoiseSample s;
  s.radius = SampleGamma(static_cast<double>(d), 1.0 / eta, rng);
  s.direction.resize(d);
  double norm = 0.0;
  do {
    for (double& v : s.direction) v = rng.Normal();
    norm = Norm(s.direction);
  } while (norm == 0.0);
  for (double& v : s.direction) v /= norm;
  s.z.resize(d);
  for (std::size_t i = 0; i < d; ++i) s.z[i] = s.radius * s.direction[i];
  return s;
}

// Raw mechanism output M(x) = x + z per row, together with the drawn z's.
struct Privatized {
  Tensor values;
  Tensor noise;
};

inline Privatized Privatize(const Tensor& x, double eta, Rng& rng) {
  ValidateEta(eta);
  Privatized out{x, Tensor(x.shape())};
  if (IsInfiniteEta(eta)) return out;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    NoiseSample s = SampleNoise(x.cols(), eta, rng);
    auto row = out.values.row(r);
    auto noise = out.noise.row(r);
    for (std::size_t c = 0; c < x.cols(); ++c) {
      noise[c] = s.z[c];
      row[c] += s.z[c];
    }
  }
  return out;
}

// Clip radius C: the largest row norm over the vocabulary table.
struct ClipBound {
  double c = 0.0;

  static ClipBound FromVocabulary(const VocabEmbeddingTable& table) {
    Require(table.vocab_size() > 0, ErrorCode::kEmptyInput, "empty vocabulary");
    ClipBound b;
    for (std::size_t v = 0; v < table.vocab_size(); ++v)
      b.c = std::max(b.c, Norm(table.row(static_cast<TokenId>(v))));
    return b;
  }
};

// M'(x) = M(x) * min(1, C / ||M(x)||), row by row.
inline Tensor ClipPrivatized(const Tensor& m, const ClipBound& bound) {
  Require(bound.c > 0.0, ErrorCode::kInvalidArgument, "clip bound must be positive");
  Tensor out = m;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    const double norm = Norm(row);
    if (norm <= bound.c) continue;
    const double s = bound.c / norm;
    for (double& v : row) v *= s;
    // Rounding can leave the norm an ulp above C; shrink until it is not, so
    // a second clip is a no-op.
    while (Norm(row) > bound.c)
      for (double& v : row) v *= 1.0 - std::numeric_limits<double>::epsilon();
  }
  return out;
}

inline Tensor EffectiveNoise(const Tensor& clipped, const Tensor& clean) {
  RequireSameShape(clipped, clean, "effective_noise");
  return Sub(clipped, clean);
}

// What the client uploads (x_tilde) and keeps (z = x_tilde - x).
struct PrivatizedTokens {
  Tensor x_tilde;
  Tensor noise;
};

inline PrivatizedTokens PrivatizeTokens(const Tensor& x, const PrivacyParams& params,
                                        const ClipBound& bound, Rng& rng) {
  Privatized raw = Privatize(x, params.eta, rng);
  PrivatizedTokens out;
  out.x_tilde = params.clip_enabled ? ClipPrivatized(raw.values, bound) : std::move(raw.values);
  out.noise = EffectiveNoise(out.x_tilde, x);
  // x + (m - x) need not round back to m. Upload x + z instead so the
  // client's z reconstructs the upload exactly; keep it inside the ball.
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto xt = out.x_tilde.row(r);
    auto z = out.noise.row(r);
    auto clean = x.row(r);
    while (true) {
      for (std::size_t c = 0; c < xt.size(); ++c) xt[c] = clean[c] + z[c];
      if (!params.clip_enabled || Norm(xt) <= bound.c) break;
      for (std::size_t c = 0; c < xt.size(); ++c)
        z[c] = xt[c] * (1.0 - std::numeric_limits<double>::epsilon()) - clean[c];
    }
  }
  return out;
}

// eta * (||y - x'|| - ||y - x||): log of the output-density ratio between
// inputs x and x' at output y.
inline double LogDensityRatio(std::span<const double> x, std::span<const double> x_prime,
                              std::span<const double> y, double eta) {
  ValidateEta(eta);
  Require(x.size() == x_prime.size() && x.size() == y.size(), ErrorCode::kDimension,
          "log_density_ratio widths differ");
  return eta * (Distance(y, x_prime) - Distance(y, x));
}

// Lower bound on the per-coordinate MSE of any unbiased denoiser that sees
// only the privatized data: (diam_sq_sum / 4k) / (exp(eta * b_x) - 1).
inline double ServerMseLowerBound(double eta, double b_x, double diam_sq_sum, std::size_t k) {
  Require(eta >= 0.0 && b_x >= 0.0 && diam_sq_sum > 0.0 && k > 0, ErrorCode::kInvalidArgument,
          "server_mse_lower_bound arguments must be positive");
  const double denom = std::expm1(eta * b_x);
  Require(denom > 0.0, ErrorCode::kUndefinedBound, "eta * B_x must be positive");
  return diam_sq_sum / (4.0 * static_cast<double>(k)) / denom;
}

// Perturbed token embeddings with no clipping and no denoising downstream.
inline Tensor TokEmbPrivBaseline(const Tensor& x, double eta, Rng& rng) {
  return Privatize(x, eta, rng).values;
}

// Each token's perturbed embedding snapped to its nearest vocabulary row.
inline std::vector<TokenId> Text2TextPrivatize(const Tensor& x, const VocabEmbeddingTable& table,
                                               double eta, Rng& rng) {
  Require(table.vocab_size() > 0, ErrorCode::kEmptyInput, "empty vocabulary");
  Tensor noisy = Privatize(x, eta, rng).values;
  std::vector<TokenId> ids(noisy.rows());
  for (std::size_t r = 0; r < noisy.rows(); ++r) ids[r] = NearestToken(table, noisy.row(r));
  return ids;
}

// Pearson correlation between corresponding entries of two equal-shape
// matrices.
inline double EntryCorrelation(const Tensor& a, const Tensor& b) {
  RequireSameShape(a, b, "correlation");
  const std::size_t n = a.size();
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace snd

#endif  // SND_DX_PRIVACY_HPP_
