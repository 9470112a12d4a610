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

#ifndef SND_LAYERS_HPP_
#define SND_LAYERS_HPP_

#include <cmath>
#include <string>
#include <vector>

#include "snd/autodiff.hpp"
#include "snd/parameters.hpp"
#include "snd/rng.hpp"

namespace snd {

struct AttentionShape {
  std::size_t d_model = 0;
  std::size_t d_kv = 0;
  std::size_t n_head = 0;
};

inline std::string HeadName(const std::string& prefix, const char* which, std::size_t head) {
  return prefix + "." + which + "." + std::to_string(head);
}

// Weights ~ Normal(0, stddev^2), biases zero.
inline void AddLinear(ParameterStore& store, const std::string& prefix, std::size_t in,
                      std::size_t out, double stddev, Rng& rng, bool bias = true) {
  store.Add(prefix + ".w", Tensor::Normal({in, out}, stddev, rng));
  if (bias) store.Add(prefix + ".b", Tensor({out}));
}

inline void AddLayerNorm(ParameterStore& store, const std::string& prefix, std::size_t d) {
  store.Add(prefix + ".gain", Tensor({d}, 1.0));
  store.Add(prefix + ".bias", Tensor({d}));
}

// Per-head query/key/value maps of size d_model x d_kv and an output map of
// size (n_head * d_kv) x d_model; no biases.
inline void AddAttention(ParameterStore& store, const std::string& prefix,
                         const AttentionShape& shape, double stddev, Rng& rng) {
  for (std::size_t h = 0; h < shape.n_head; ++h) {
    store.Add(HeadName(prefix, "q", h), Tensor::Normal({shape.d_model, shape.d_kv}, stddev, rng));
    store.Add(HeadName(prefix, "k", h), Tensor::Normal({shape.d_model, shape.d_kv}, stddev, rng));
    store.Add(HeadName(prefix, "v", h), Tensor::Normal({shape.d_model, shape.d_kv}, stddev, rng));
  }
  store.Add(prefix + ".out", Tensor::Normal({shape.n_head * shape.d_kv, shape.d_model}, stddev, rng));
}

inline ad::Var Linear(ad::Graph& g, ad::Var x, const ParameterStore& store,
                      const std::string& prefix) {
  ad::Var y = ad::Matmul(x, g.Param(store, prefix + ".w"));
  if (store.Contains(prefix + ".b")) y = ad::AddRow(y, g.Param(store, prefix + ".b"));
  return y;
}

inline ad::Var ApplyLayerNorm(ad::Graph& g, ad::Var x, const ParameterStore& store,
                              const std::string& prefix, double eps = 1e-5) {
  return ad::LayerNorm(x, g.Param(store, prefix + ".gain"), g.Param(store, prefix + ".bias"), eps);
}

// Scaled dot-product attention over the rows of h. Keys at positions with
// mask[t] == false receive zero weight; an empty mask means all valid.
inline ad::Var MultiHeadAttention(ad::Graph& g, ad::Var h, const ParameterStore& store,
                                  const std::string& prefix, std::size_t n_head,
                                  const std::vector<bool>& mask = {}) {
  Require(n_head > 0, ErrorCode::kInvalidArgument, "attention needs at least one head");
  Require(mask.empty() || mask.size() == h.value().rows(), ErrorCode::kDimension,
          "attention mask length");
  std::vector<ad::Var> heads;
  heads.reserve(n_head);
  for (std::size_t i = 0; i < n_head; ++i) {
    ad::Var wq = g.Param(store, HeadName(prefix, "q", i));
    Require(wq.value().rows() == h.value().cols(), ErrorCode::kDimension,
            "attention weights do not match d_model");
    ad::Var q = ad::Matmul(h, wq);
    ad::Var k = ad::Matmul(h, g.Param(store, HeadName(prefix, "k", i)));
    ad::Var v = ad::Matmul(h, g.Param(store, HeadName(prefix, "v", i)));
    const double scale = 1.0 / std::sqrt(static_cast<double>(q.value().cols()));
    ad::Var scores = ad::Scale(ad::Matmul(q, ad::Transpose(k)), scale);
    heads.push_back(ad::Matmul(ad::SoftmaxRows(scores, mask), v));
  }
  ad::Var joined = n_head == 1 ? heads.front() : ad::ConcatCols(heads);
  return ad::Matmul(joined, g.Param(store, prefix + ".out"));
}

// Tensor-level entry point for callers outside a graph.
inline Tensor MultiHeadAttention(const Tensor& h, const ParameterStore& store,
                                 const std::string& prefix, std::size_t n_head,
                                 const std::vector<bool>& mask = {}) {
  ad::Graph g(/*record=*/false);
  return MultiHeadAttention(g, g.Constant(h), store, prefix, n_head, mask).value();
}

}  // namespace snd

#endif  // SND_LAYERS_HPP_
