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

#ifndef SND_SPLIT_MODEL_HPP_
#define SND_SPLIT_MODEL_HPP_

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "snd/autodiff.hpp"
#include "snd/checkpoint.hpp"
#include "snd/error.hpp"
#include "snd/layers.hpp"
#include "snd/parameters.hpp"
#include "snd/rng.hpp"
#include "snd/tensor.hpp"
#include "snd/vocab.hpp"

namespace snd {

inline constexpr std::size_t kMaxSequenceLength = 512;

enum class EmbeddingRole { kClean, kNoisy, kDenoised };

enum class PoolingMode { kMean = 0 };

struct SentenceEmbedding {
  Tensor values;  // {d}
  EmbeddingRole role = EmbeddingRole::kClean;
  PoolingMode pooling = PoolingMode::kMean;

  std::size_t dim() const { return values.size(); }
};

struct EncoderConfig {
  std::size_t d_model = 32;
  std::size_t d_ff = 64;
  std::size_t d_kv = 8;
  std::size_t n_head = 4;
  std::size_t layers = 2;
  std::size_t max_length = kMaxSequenceLength;
  bool positional = true;
  double init_std = 0.02;
};

// The server-side encoder. Immutable once built; safe to share across
// threads for concurrent Encode calls.
struct EncoderWeights {
  EncoderConfig config;
  ParameterStore params;
  PoolingMode pooling = PoolingMode::kMean;
};

inline std::string EncoderLayerPrefix(std::size_t layer) { return "enc." + std::to_string(layer); }

inline Tensor SinusoidalPositions(std::size_t n, std::size_t d) {
  Tensor pe({n, d});
  for (std::size_t pos = 0; pos < n; ++pos)
    for (std::size_t i = 0; i < d; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(i - i % 2) / static_cast<double>(d));
      pe(pos, i) = (i % 2 == 0) ? std::sin(pos * freq) : std::cos(pos * freq);
    }
  return pe;
}

inline EncoderWeights InitEncoder(const EncoderConfig& config, Rng& rng) {
  Require(config.d_model > 0 && config.d_ff > 0 && config.d_kv > 0 && config.n_head > 0,
          ErrorCode::kInvalidArgument, "encoder sizes must be positive");
  EncoderWeights w;
  w.config = config;
  const AttentionShape shape{config.d_model, config.d_kv, config.n_head};
  for (std::size_t l = 0; l < config.layers; ++l) {
    const std::string p = EncoderLayerPrefix(l);
    AddLayerNorm(w.params, p + ".ln1", config.d_model);
    AddAttention(w.params, p + ".attn", shape, config.init_std, rng);
    AddLayerNorm(w.params, p + ".ln2", config.d_model);
    AddLinear(w.params, p + ".fc", config.d_model, config.d_ff, config.init_std, rng);
    AddLinear(w.params, p + ".proj", config.d_ff, config.d_model, config.init_std, rng);
  }
  return w;
}

// Rows of the table selected by ids.
inline Tensor EmbedTokens(std::span<const TokenId> ids, const VocabEmbeddingTable& table) {
  const std::size_t d = table.dim();
  Tensor out({ids.size(), d});
  for (std::size_t t = 0; t < ids.size(); ++t) {
    Require(ids[t] < table.vocab_size(), ErrorCode::kInvalidArgument,
            "token id " + std::to_string(ids[t]) + " outside vocabulary of " +
                std::to_string(table.vocab_size()));
    auto src = table.row(ids[t]);
    std::copy(src.begin(), src.end(), out.row(t).begin());
  }
  return out;
}

// Pre-norm transformer encoder followed by mean pooling over valid rows.
// Returns a {1, d} node.
inline ad::Var EncodeGraph(ad::Graph& g, ad::Var x, const EncoderWeights& w,
                           const std::vector<bool>& mask = {}) {
  const Tensor& in = x.value();
  const EncoderConfig& cfg = w.config;
  Require(in.rank() == 2 && in.rows() > 0, ErrorCode::kEmptyInput, "encode needs at least one token");
  Require(in.cols() == cfg.d_model, ErrorCode::kDimension,
          "token width " + std::to_string(in.cols()) + " != d_model " + std::to_string(cfg.d_model));
  Require(in.rows() <= cfg.max_length, ErrorCode::kInvalidArgument,
          "sequence of " + std::to_string(in.rows()) + " exceeds max length " +
              std::to_string(cfg.max_length));
  ad::Var h = x;
  if (cfg.positional) h = ad::Add(h, g.Constant(SinusoidalPositions(in.rows(), in.cols())));
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::string p = EncoderLayerPrefix(l);
    ad::Var a = MultiHeadAttention(g, ApplyLayerNorm(g, h, w.params, p + ".ln1"), w.params,
                                   p + ".attn", cfg.n_head, mask);
    h = ad::Add(h, a);
    ad::Var f = Linear(g, ApplyLayerNorm(g, h, w.params, p + ".ln2"), w.params, p + ".fc");
    h = ad::Add(h, Linear(g, ad::Gelu(f), w.params, p + ".proj"));
  }
  return ad::MeanRows(h, mask);
}

inline SentenceEmbedding Encode(const Tensor& x, const EncoderWeights& w,
                                EmbeddingRole role = EmbeddingRole::kClean) {
  ad::Graph g(/*record=*/false);
  Tensor pooled = EncodeGraph(g, g.Constant(x), w).value();
  return SentenceEmbedding{pooled.Reshaped({pooled.size()}), role, w.pooling};
}

// Frozen stand-in for a pretrained encoder. Fan-in scaled weights; at 0.02
// the blocks are close to the identity map.
inline EncoderConfig ToyServerEncoderConfig(std::size_t d_model = 32) {
  EncoderConfig c;
  c.d_model = d_model;
  c.init_std = 1.0 / std::sqrt(static_cast<double>(d_model));
  return c;
}

struct ToyModelConfig {
  std::size_t vocab_size = 1000;
  // Token representations ~ Normal(0, table_std^2) per coordinate.
  double table_std = 1.0;
  EncoderConfig encoder = ToyServerEncoderConfig();
  std::uint64_t seed = 0;
};

struct ToyModel {
  VocabEmbeddingTable table;
  EncoderWeights encoder;
};

inline ToyModel InitToyModel(const ToyModelConfig& config) {
  Require(config.vocab_size > 0, ErrorCode::kInvalidArgument, "vocabulary size must be positive");
  Rng rng(config.seed);
  ToyModel m;
  m.table.rows = Tensor::Normal({config.vocab_size, config.encoder.d_model}, config.table_std, rng);
  m.encoder = InitEncoder(config.encoder, rng);
  return m;
}

// Copy of `w` with every weight matrix shifted by Normal noise whose scale is
// `relative` times that matrix's RMS. Layer-norm parameters are untouched.
inline EncoderWeights PerturbEncoder(const EncoderWeights& w, double relative, Rng& rng) {
  EncoderWeights out;
  out.config = w.config;
  out.pooling = w.pooling;
  out.params = w.params.CloneValues();
  for (auto& [name, e] : out.params.entries()) {
    if (e.value.rank() != 2) continue;
    double ss = 0.0;
    for (double v : e.value.data()) ss += v * v;
    const double rms = std::sqrt(ss / e.value.size());
    for (double& v : e.value.data()) v += relative * rms * rng.Normal();
  }
  return out;
}

// Encoder checkpoints carry their configuration in a "meta.encoder" record.
inline ParameterStore EncoderToStore(const EncoderWeights& w) {
  ParameterStore s = w.params.CloneValues();
  const EncoderConfig& c = w.config;
  s.Add("meta.encoder",
        Tensor::Vector({double(c.d_model), double(c.d_ff), double(c.d_kv), double(c.n_head),
                        double(c.layers), double(c.max_length), c.positional ? 1.0 : 0.0,
                        c.init_std, double(static_cast<int>(w.pooling))}));
  return s;
}

inline EncoderWeights EncoderFromStore(const ParameterStore& store) {
  Require(store.Contains("meta.encoder"), ErrorCode::kFormat, "checkpoint has no encoder metadata");
  const Tensor& m = store.Value("meta.encoder");
  Require(m.size() == 9, ErrorCode::kFormat, "encoder metadata size");
  EncoderWeights w;
  w.config.d_model = static_cast<std::size_t>(m[0]);
  w.config.d_ff = static_cast<std::size_t>(m[1]);
  w.config.d_kv = static_cast<std::size_t>(m[2]);
  w.config.n_head = static_cast<std::size_t>(m[3]);
  w.config.layers = static_cast<std::size_t>(m[4]);
  w.config.max_length = static_cast<std::size_t>(m[5]);
  w.config.positional = m[6] != 0.0;
  w.config.init_std = m[7];
  w.pooling = static_cast<PoolingMode>(static_cast<int>(m[8]));
  for (const auto& [name, e] : store.entries())
    if (name != "meta.encoder") w.params.Add(name, e.value);
  return w;
}

inline void SaveToyModel(const ToyModel& m, const std::string& path) {
  ParameterStore s = EncoderToStore(m.encoder);
  s.Add("vocab.table", m.table.rows);
  SaveCheckpoint(s, path);
}

inline ToyModel LoadToyModel(const std::string& path) {
  ParameterStore s = LoadCheckpoint(path);
  Require(s.Contains("vocab.table"), ErrorCode::kFormat, "checkpoint has no vocabulary table");
  ToyModel m;
  m.table.rows = s.Value("vocab.table");
  ParameterStore rest;
  for (const auto& [name, e] : s.entries())
    if (name != "vocab.table") rest.Add(name, e.value);
  m.encoder = EncoderFromStore(rest);
  return m;
}

}  // namespace snd

#endif  // SND_SPLIT_MODEL_HPP_
