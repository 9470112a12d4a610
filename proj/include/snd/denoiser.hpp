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

#ifndef SND_DENOISER_HPP_
#define SND_DENOISER_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "snd/autodiff.hpp"
#include "snd/checkpoint.hpp"
#include "snd/dx_privacy.hpp"
#include "snd/error.hpp"
#include "snd/layers.hpp"
#include "snd/optim.hpp"
#include "snd/parameters.hpp"
#include "snd/rng.hpp"
#include "snd/split_model.hpp"
#include "snd/tensor.hpp"

namespace snd {

struct DenoiserConfig {
  std::size_t d_model = 32;
  std::size_t d_ff = 64;
  std::size_t d_kv = 8;
  std::size_t n_head = 4;
  std::size_t layers = 2;
  std::size_t max_tokens = kMaxSequenceLength;
  double learning_rate = 1e-3;
  std::size_t batch_size = 16;
  std::size_t epochs = 2;
  double init_std = 0.02;
  double weight_decay = 0.0;
  // When false the noise block of the input is zeroed: the model then only
  // sees what a server would see.
  bool noise_aware = true;
  std::uint64_t seed = 0;

  bool SameArchitecture(const DenoiserConfig& o) const {
    return d_model == o.d_model && d_ff == o.d_ff && d_kv == o.d_kv && n_head == o.n_head &&
           layers == o.layers && max_tokens == o.max_tokens && noise_aware == o.noise_aware;
  }
};

struct DenoiserWeights {
  DenoiserConfig config;
  ParameterStore params;
};

// Segment ids of the three input blocks.
enum class Segment : std::size_t { kNoisyEmbedding = 0, kPrivatizedTokens = 1, kNoise = 2 };

inline std::string DenoiserLayerPrefix(std::size_t layer) { return "dn." + std::to_string(layer); }

inline DenoiserWeights InitDenoiser(const DenoiserConfig& config) {
  Require(config.d_model > 0 && config.d_ff > 0 && config.d_kv > 0 && config.n_head > 0 &&
              config.max_tokens > 0,
          ErrorCode::kInvalidArgument, "denoiser sizes must be positive");
  Rng rng(config.seed);
  DenoiserWeights w;
  w.config = config;
  w.params.Add("segment", Tensor({3, config.d_model}));
  w.params.Add("position", Tensor({config.max_tokens + 1, config.d_model}));
  const AttentionShape shape{config.d_model, config.d_kv, config.n_head};
  for (std::size_t l = 0; l < config.layers; ++l) {
    const std::string p = DenoiserLayerPrefix(l);
    AddAttention(w.params, p + ".attn", shape, config.init_std, rng);
    AddLayerNorm(w.params, p + ".ln", config.d_model);
    AddLinear(w.params, p + ".fc", config.d_model, config.d_ff, config.init_std, rng);
    AddLinear(w.params, p + ".proj", config.d_ff, config.d_model, config.init_std, rng);
  }
  return w;
}

// Key mask over the 2n+1 input rows given which of the n tokens are real.
inline std::vector<bool> DenoiserMask(const std::vector<bool>& token_valid) {
  std::vector<bool> mask;
  mask.reserve(2 * token_valid.size() + 1);
  mask.push_back(true);
  mask.insert(mask.end(), token_valid.begin(), token_valid.end());
  mask.insert(mask.end(), token_valid.begin(), token_valid.end());
  return mask;
}

// H0 = [e_n; x~_1..x~_n; z_1..z_n] plus segment and position embeddings.
// Row 0 and each token's x~ and z rows share position index t + 1.
inline ad::Var BuildInputGraph(ad::Graph& g, const DenoiserWeights& w, const Tensor& e_n,
                               const Tensor& x_tilde, const Tensor& noise) {
  const std::size_t d = w.config.d_model;
  RequireSameShape(x_tilde, noise, "denoiser input blocks");
  Require(e_n.size() == d && x_tilde.cols() == d, ErrorCode::kDimension,
          "denoiser inputs must have width d_model");
  const std::size_t n = x_tilde.rows();
  Require(n >= 1, ErrorCode::kEmptyInput, "denoiser needs at least one token");
  Require(n <= w.config.max_tokens, ErrorCode::kInvalidArgument, "too many tokens for denoiser");
  std::vector<double> raw(e_n.data().begin(), e_n.data().end());
  raw.insert(raw.end(), x_tilde.data().begin(), x_tilde.data().end());
  if (w.config.noise_aware)
    raw.insert(raw.end(), noise.data().begin(), noise.data().end());
  else
    raw.resize(raw.size() + noise.size(), 0.0);
  std::vector<std::size_t> segments(2 * n + 1), positions(2 * n + 1);
  segments[0] = static_cast<std::size_t>(Segment::kNoisyEmbedding);
  positions[0] = 0;
  for (std::size_t t = 0; t < n; ++t) {
    segments[1 + t] = static_cast<std::size_t>(Segment::kPrivatizedTokens);
    segments[1 + n + t] = static_cast<std::size_t>(Segment::kNoise);
    positions[1 + t] = positions[1 + n + t] = t + 1;
  }
  ad::Var h = g.Constant(Tensor({2 * n + 1, d}, std::move(raw)));
  h = ad::Add(h, ad::GatherRows(g.Param(w.params, "segment"), std::move(segments)));
  return ad::Add(h, ad::GatherRows(g.Param(w.params, "position"), std::move(positions)));
}

inline Tensor BuildInput(const DenoiserWeights& w, const Tensor& e_n, const Tensor& x_tilde,
                         const Tensor& noise) {
  ad::Graph g(/*record=*/false);
  return BuildInputGraph(g, w, e_n, x_tilde, noise).value();
}

// h^l = h^{l-1} + a + m with a = attn(h^{l-1}) over all rows and
// m = W_proj gelu(W_fc LN(a + h^{l-1})). Returns row 0 of the last layer as a
// {1, d} node.
inline ad::Var DenoiseGraph(ad::Graph& g, ad::Var h0, const DenoiserWeights& w,
                            const std::vector<bool>& mask = {}) {
  ad::Var h = h0;
  for (std::size_t l = 0; l < w.config.layers; ++l) {
    const std::string p = DenoiserLayerPrefix(l);
    ad::Var a = MultiHeadAttention(g, h, w.params, p + ".attn", w.config.n_head, mask);
    ad::Var normed = ApplyLayerNorm(g, ad::Add(a, h), w.params, p + ".ln");
    ad::Var m = Linear(g, ad::Gelu(Linear(g, normed, w.params, p + ".fc")), w.params, p + ".proj");
    h = ad::Add(ad::Add(h, a), m);
  }
  return ad::SliceRows(h, 0, 1);
}

inline SentenceEmbedding DenoiseForward(const Tensor& h0, const DenoiserWeights& w,
                                        const std::vector<bool>& mask = {}) {
  ad::Graph g(/*record=*/false);
  Tensor out = DenoiseGraph(g, g.Constant(h0), w, mask).value();
  return SentenceEmbedding{out.Reshaped({out.size()}), EmbeddingRole::kDenoised, PoolingMode::kMean};
}

// Convenience: assemble the input and run the model.
inline SentenceEmbedding Denoise(const DenoiserWeights& w, const Tensor& e_n, const Tensor& x_tilde,
                                 const Tensor& noise, const std::vector<bool>& token_valid = {}) {
  ad::Graph g(/*record=*/false);
  ad::Var h0 = BuildInputGraph(g, w, e_n, x_tilde, noise);
  std::vector<bool> mask = token_valid.empty() ? std::vector<bool>{} : DenoiserMask(token_valid);
  Tensor out = DenoiseGraph(g, h0, w, mask).value();
  return SentenceEmbedding{out.Reshaped({out.size()}), EmbeddingRole::kDenoised, PoolingMode::kMean};
}

// One training pair: what the client holds plus the clean target.
struct DenoiseExample {
  Tensor e_n;      // {d}
  Tensor x_tilde;  // n x d
  Tensor noise;    // n x d
  Tensor e_c;      // {d}
  double eta = kInfiniteEta;
};

struct PairOptions {
  // Each sequence draws its eta uniformly from this list.
  std::vector<double> etas = {kInfiniteEta};
  std::size_t samples_per_sequence = 1;
  bool clip = true;
  // Round what crosses the wire (x~ and e_n) to 32-bit floats.
  bool wire_rounding = false;
};

using Corpus = std::vector<std::vector<TokenId>>;

inline std::vector<DenoiseExample> GenerateTrainingPairs(const Corpus& corpus,
                                                         const VocabEmbeddingTable& table,
                                                         const EncoderWeights& encoder,
                                                         const PairOptions& options, Rng& rng) {
  Require(!corpus.empty(), ErrorCode::kEmptyInput, "empty corpus");
  Require(!options.etas.empty(), ErrorCode::kInvalidArgument, "no eta values to sample");
  for (double eta : options.etas) ValidateEta(eta);
  const ClipBound bound = ClipBound::FromVocabulary(table);
  std::vector<DenoiseExample> out;
  out.reserve(corpus.size() * options.samples_per_sequence);
  for (const auto& ids : corpus) {
    const Tensor x = EmbedTokens(ids, table);
    const Tensor e_c = Encode(x, encoder).values;
    for (std::size_t s = 0; s < options.samples_per_sequence; ++s) {
      DenoiseExample ex;
      ex.eta = options.etas.size() == 1 ? options.etas[0] : options.etas[rng.Index(options.etas.size())];
      PrivatizedTokens p = PrivatizeTokens(x, PrivacyParams{ex.eta, options.clip}, bound, rng);
      ex.x_tilde = std::move(p.x_tilde);
      ex.noise = std::move(p.noise);
      if (options.wire_rounding) {
        ex.e_n = RoundToFloat32(Encode(RoundToFloat32(ex.x_tilde), encoder).values);
      } else {
        ex.e_n = IsInfiniteEta(ex.eta) ? e_c : Encode(ex.x_tilde, encoder).values;
      }
      ex.e_c = e_c;
      out.push_back(std::move(ex));
    }
  }
  return out;
}

inline ad::Var ExampleLoss(ad::Graph& g, const DenoiserWeights& w, const DenoiseExample& ex) {
  ad::Var out = DenoiseGraph(g, BuildInputGraph(g, w, ex.e_n, ex.x_tilde, ex.noise), w);
  return ad::MeanSquaredError(out, g.Constant(ex.e_c.Reshaped({1, ex.e_c.size()})));
}

struct DenoiseMetrics {
  double mse_denoised = 0.0;  // mean over items of per-coordinate MSE(e_d, e_c)
  double mse_noisy = 0.0;     // same for e_n
  double cos_denoised = 0.0;
  double cos_noisy = 0.0;
  double fraction_cos_improved = 0.0;
  std::size_t count = 0;
};

inline DenoiseMetrics EvaluateDenoiser(const DenoiserWeights& w,
                                       const std::vector<DenoiseExample>& examples) {
  DenoiseMetrics m;
  std::size_t improved = 0;
  for (const auto& ex : examples) {
    const Tensor e_d = Denoise(w, ex.e_n, ex.x_tilde, ex.noise).values;
    m.mse_denoised += MeanSquaredError(e_d.data(), ex.e_c.data());
    m.mse_noisy += MeanSquaredError(ex.e_n.data(), ex.e_c.data());
    const double cd = CosineSimilarity(e_d.data(), ex.e_c.data());
    const double cn = CosineSimilarity(ex.e_n.data(), ex.e_c.data());
    m.cos_denoised += cd;
    m.cos_noisy += cn;
    if (cd > cn) ++improved;
  }
  m.count = examples.size();
  if (m.count) {
    const double n = static_cast<double>(m.count);
    m.mse_denoised /= n;
    m.mse_noisy /= n;
    m.cos_denoised /= n;
    m.cos_noisy /= n;
    m.fraction_cos_improved = improved / n;
  }
  return m;
}

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
};

struct TrainingResult {
  DenoiserWeights weights;
  double initial_validation_loss = 0.0;
  std::vector<EpochRecord> history;
};

inline double MeanLoss(const DenoiserWeights& w, const std::vector<DenoiseExample>& examples) {
  if (examples.empty()) return 0.0;
  double total = 0.0;
  for (const auto& ex : examples) {
    ad::Graph g(/*record=*/false);
    total += ExampleLoss(g, w, ex).value()[0];
  }
  return total / static_cast<double>(examples.size());
}

// Minimizes the mean squared error between D(e_n, x~, z) and e_c with
// minibatch Adam. Starts from `initial` when given (fine-tuning), otherwise
// from a fresh seeded initialization.
inline TrainingResult TrainDenoiser(const std::vector<DenoiseExample>& train,
                                    const std::vector<DenoiseExample>& validation,
                                    const DenoiserConfig& config,
                                    const DenoiserWeights* initial = nullptr) {
  Require(!train.empty(), ErrorCode::kEmptyInput, "no training pairs");
  Require(config.batch_size > 0, ErrorCode::kInvalidArgument, "batch size must be positive");
  TrainingResult result;
  if (initial != nullptr) {
    Require(initial->config.SameArchitecture(config), ErrorCode::kInvalidArgument,
            "initial weights do not match the config");
    result.weights.config = config;
    result.weights.params = initial->params.CloneValues();
  } else {
    result.weights = InitDenoiser(config);
  }
  DenoiserWeights& w = result.weights;
  result.initial_validation_loss = MeanLoss(w, validation);

  AdamOptions adam;
  adam.learning_rate = config.learning_rate;
  adam.weight_decay = config.weight_decay;
  Rng shuffle_rng = Rng(config.seed).Fork(0x5eed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const double inv = 1.0 / static_cast<double>(end - start);
      w.params.ZeroGrad();
      for (std::size_t i = start; i < end; ++i) {
        ad::Graph g;
        g.Train(w.params);
        ad::Var loss = ExampleLoss(g, w, train[order[i]]);
        const double value = loss.value()[0];
        Require(std::isfinite(value), ErrorCode::kDivergence, "training loss is not finite");
        epoch_loss += value;
        g.Backward(ad::Scale(loss, inv));
      }
      AdamStep(w.params, adam);
    }
    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.train_loss = epoch_loss / static_cast<double>(train.size());
    rec.validation_loss = MeanLoss(w, validation);
    Require(std::isfinite(rec.train_loss) && std::isfinite(rec.validation_loss),
            ErrorCode::kDivergence, "loss became non-finite");
    result.history.push_back(rec);
  }
  w.params.ZeroGrad();
  return result;
}

// ---------------------------------------------------------------------------
// Eta partitions.

struct EtaPartition {
  double low = 0.0;   // exclusive
  double high = 0.0;  // inclusive
  std::array<double, 2> representatives{};
  DenoiserWeights weights;

  bool Contains(double eta) const { return eta > low && eta <= high; }
};

class EtaPartitionRegistry {
 public:
  // Partitions must arrive in increasing order without overlap and share
  // one architecture.
  void Add(EtaPartition partition) {
    Require(partition.low < partition.high, ErrorCode::kInvalidArgument, "empty eta interval");
    if (!partitions_.empty()) {
      Require(partition.low >= partitions_.back().high, ErrorCode::kInvalidArgument,
              "eta intervals must be sorted and disjoint");
      Require(partition.weights.config.SameArchitecture(partitions_.front().weights.config),
              ErrorCode::kInvalidArgument, "registry models must share one config");
    }
    partitions_.push_back(std::move(partition));
  }

  const std::vector<EtaPartition>& partitions() const { return partitions_; }
  bool empty() const { return partitions_.empty(); }

  const EtaPartition& Find(double eta) const {
    Require(!partitions_.empty(), ErrorCode::kNoModel, "registry is empty");
    for (const auto& p : partitions_)
      if (p.Contains(eta)) return p;
    throw Error(ErrorCode::kNoModel, "no denoiser covers eta " + std::to_string(eta));
  }

 private:
  std::vector<EtaPartition> partitions_;
};

inline const DenoiserWeights& SelectDenoiser(double eta, const EtaPartitionRegistry& registry) {
  return registry.Find(eta).weights;
}

inline ParameterStore DenoiserToStore(const DenoiserWeights& w) {
  ParameterStore s = w.params.CloneValues();
  const DenoiserConfig& c = w.config;
  s.Add("meta.denoiser", Tensor::Vector({double(c.d_model), double(c.d_ff), double(c.d_kv),
                                          double(c.n_head), double(c.layers), double(c.max_tokens),
                                          c.noise_aware ? 1.0 : 0.0}));
  return s;
}

inline DenoiserWeights DenoiserFromStore(const ParameterStore& store) {
  Require(store.Contains("meta.denoiser"), ErrorCode::kFormat, "checkpoint has no denoiser metadata");
  const Tensor& m = store.Value("meta.denoiser");
  Require(m.size() == 7, ErrorCode::kFormat, "denoiser metadata size");
  DenoiserWeights w;
  w.config.d_model = static_cast<std::size_t>(m[0]);
  w.config.d_ff = static_cast<std::size_t>(m[1]);
  w.config.d_kv = static_cast<std::size_t>(m[2]);
  w.config.n_head = static_cast<std::size_t>(m[3]);
  w.config.layers = static_cast<std::size_t>(m[4]);
  w.config.max_tokens = static_cast<std::size_t>(m[5]);
  w.config.noise_aware = m[6] != 0.0;
  for (const auto& [name, e] : store.entries())
    if (name != "meta.denoiser") w.params.Add(name, e.value);
  return w;
}

inline std::string FormatEta(double eta) {
  if (IsInfiniteEta(eta)) return "inf";
  std::ostringstream out;
  out.precision(17);
  out << eta;
  return out.str();
}

inline double ParseEta(const std::string& text) {
  if (text == "inf" || text == "infinity") return kInfiniteEta;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  Require(used == text.size() && !text.empty(), ErrorCode::kFormat, "bad eta value '" + text + "'");
  return v;
}

// Manifest: one line per partition, "eta_low eta_high checkpoint_path".
// Checkpoint paths are written relative to the manifest's directory.
inline void SaveRegistry(const EtaPartitionRegistry& registry, const std::string& directory) {
  std::ofstream manifest(directory + "/manifest.txt");
  Require(static_cast<bool>(manifest), ErrorCode::kIo, "cannot write manifest in " + directory);
  for (std::size_t i = 0; i < registry.partitions().size(); ++i) {
    const EtaPartition& p = registry.partitions()[i];
    const std::string file = "denoiser_" + std::to_string(i) + ".sndw";
    ParameterStore s = DenoiserToStore(p.weights);
    s.Add("meta.representatives", Tensor::Vector({p.representatives[0], p.representatives[1]}));
    SaveCheckpoint(s, directory + "/" + file);
    manifest << FormatEta(p.low) << ' ' << FormatEta(p.high) << ' ' << file << '\n';
  }
}

inline EtaPartitionRegistry LoadRegistry(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  Require(static_cast<bool>(in), ErrorCode::kIo, "cannot read " + manifest_path);
  const auto slash = manifest_path.find_last_of('/');
  const std::string dir = slash == std::string::npos ? "." : manifest_path.substr(0, slash);
  EtaPartitionRegistry registry;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string low, high, path;
    Require(static_cast<bool>(fields >> low >> high >> path), ErrorCode::kFormat,
            "bad manifest line: " + line);
    EtaPartition p;
    p.low = ParseEta(low);
    p.high = ParseEta(high);
    ParameterStore s = LoadCheckpoint(path.front() == '/' ? path : dir + "/" + path);
    if (s.Contains("meta.representatives")) {
      const Tensor& r = s.Value("meta.representatives");
      p.representatives = {r[0], r[1]};
      ParameterStore rest;
      for (const auto& [name, e] : s.entries())
        if (name != "meta.representatives") rest.Add(name, e.value);
      s = std::move(rest);
    }
    p.weights = DenoiserFromStore(s);
    registry.Add(std::move(p));
  }
  return registry;
}

// Correlation between clean and transmitted token representations at one
// eta, over `samples` vocabulary rows drawn with a fixed stream.
inline double PrivatizedCorrelation(const VocabEmbeddingTable& table, double eta, bool clip,
                                    std::size_t samples, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<TokenId> ids(samples);
  for (auto& id : ids) id = static_cast<TokenId>(rng.Index(table.vocab_size()));
  const Tensor x = EmbedTokens(ids, table);
  const ClipBound bound = ClipBound::FromVocabulary(table);
  return EntryCorrelation(x, PrivatizeTokens(x, PrivacyParams{eta, clip}, bound, rng).x_tilde);
}

struct PartitionPlanEntry {
  double low = 0.0;
  double high = 0.0;
  std::array<double, 2> representatives{};
};

// Three intervals split where the clean/privatized correlation crosses
// `low_corr` and `high_corr`. Representatives sit inside each interval on a
// log scale.
inline std::vector<PartitionPlanEntry> PlanEtaPartitions(const VocabEmbeddingTable& table,
                                                         bool clip, std::uint64_t seed,
                                                         double low_corr = 0.2,
                                                         double high_corr = 0.8,
                                                         std::size_t samples = 2000) {
  auto crossing = [&](double target) {
    double lo = std::log(1e-4), hi = std::log(1e6);
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (PrivatizedCorrelation(table, std::exp(mid), clip, samples, seed) < target)
        lo = mid;
      else
        hi = mid;
    }
    return std::exp(0.5 * (lo + hi));
  };
  const double a = crossing(low_corr);
  const double b = crossing(high_corr);
  const double step = std::cbrt(b / a);
  return {
      {0.0, a, {a / 4.0, a / 1.5}},
      {a, b, {a * step, a * step * step}},
      {b, kInfiniteEta, {b * 1.5, b * 4.0}},
  };
}

}  // namespace snd

#endif  // SND_DENOISER_HPP_
