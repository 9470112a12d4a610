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

#ifndef SND_PRIVACY_EVAL_HPP_
#define SND_PRIVACY_EVAL_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>

#include "snd/classifier.hpp"
#include "snd/dx_privacy.hpp"
#include "snd/error.hpp"
#include "snd/rng.hpp"
#include "snd/tensor.hpp"
#include "snd/vocab.hpp"

namespace snd {

inline constexpr std::size_t kDefaultNeighborOrder = 3;

// Distance from each row to its k-th nearest other row. Exact O(N^2 d)
// search; every pair is visited once.
inline std::vector<double> KnnDistances(const Tensor& points, std::size_t k) {
  const std::size_t n = points.rows();
  Require(k >= 1 && n > k, ErrorCode::kInvalidArgument,
          "k-NN needs N > k >= 1 (N=" + std::to_string(n) + ", k=" + std::to_string(k) + ")");
  const std::size_t d = points.cols();
  const double* base = points.data().data();
  // Per point, the k smallest squared distances kept as a max-heap; the
  // root doubles as a cheap rejection threshold.
  std::vector<double> heaps(n * k, std::numeric_limits<double>::infinity());
  auto offer = [&](std::size_t i, double d2) {
    double* h = heaps.data() + i * k;
    std::pop_heap(h, h + k);
    h[k - 1] = d2;
    std::push_heap(h, h + k);
  };
  for (std::size_t i = 0; i < n; ++i) {
    const double* pi = base + i * d;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double* pj = base + j * d;
      double d2 = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = pi[c] - pj[c];
        d2 += diff * diff;
      }
      if (d2 >= heaps[i * k] && d2 >= heaps[j * k]) continue;
      Require(d2 > 0.0, ErrorCode::kDegenerateDistance,
              "points " + std::to_string(i) + " and " + std::to_string(j) + " coincide");
      if (d2 < heaps[i * k]) offer(i, d2);
      if (d2 < heaps[j * k]) offer(j, d2);
    }
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = std::sqrt(heaps[i * k]);
  return out;
}

inline double Digamma(double x) {
  Require(x > 0.0, ErrorCode::kInvalidArgument, "digamma defined here for x > 0 only");
  return boost::math::digamma(x);
}

inline double UnitBallVolume(std::size_t d) {
  Require(d >= 1, ErrorCode::kInvalidArgument, "dimension must be >= 1");
  const double half = static_cast<double>(d) / 2.0;
  return std::exp(half * std::log(std::numbers::pi) - std::lgamma(half + 1.0));
}

inline double MeanLogDistance(const std::vector<double>& distances) {
  double s = 0.0;
  for (double e : distances) s += std::log(e);
  return s / static_cast<double>(distances.size());
}

// Kozachenko-Leonenko entropy estimate in nats:
// psi(N) - psi(k) + log c_d + (d/N) sum log eps_i.
inline double KnnEntropy(const Tensor& points, std::size_t k = kDefaultNeighborOrder) {
  const std::vector<double> eps = KnnDistances(points, k);
  const double n = static_cast<double>(points.rows());
  const double d = static_cast<double>(points.cols());
  return Digamma(n) - Digamma(static_cast<double>(k)) + std::log(UnitBallVolume(points.cols())) +
         d * MeanLogDistance(eps);
}

struct MIEstimate {
  double value = 0.0;  // nats
  std::size_t samples = 0;
  std::size_t k = 0;
  std::size_t dim = 0;
};

// I(X; X~) = H(X~) - H(Z) with both entropies estimated at the same N and
// k, so only the log-distance terms survive. Small samples can make this
// negative; the value is returned unchanged.
inline MIEstimate EstimateMutualInformation(const Tensor& x_tilde, const Tensor& noise,
                                            std::size_t k = kDefaultNeighborOrder) {
  Require(x_tilde.rows() == noise.rows() && x_tilde.cols() == noise.cols(), ErrorCode::kDimension,
          "MI sample sets must share N and d");
  const double d = static_cast<double>(x_tilde.cols());
  MIEstimate m;
  m.samples = x_tilde.rows();
  m.k = k;
  m.dim = x_tilde.cols();
  m.value = d * MeanLogDistance(KnnDistances(x_tilde, k)) - d * MeanLogDistance(KnnDistances(noise, k));
  return m;
}

// MI between vocabulary rows and their privatized copies: X is drawn
// uniformly from the table (with replacement), X~ = X + z unclipped, and the
// noise set is the drawn z's.
inline MIEstimate VocabularyMutualInformation(const VocabEmbeddingTable& table, double eta,
                                              std::size_t samples, std::size_t k, Rng& rng) {
  Require(table.vocab_size() > 0, ErrorCode::kEmptyInput, "empty vocabulary");
  Require(!IsInfiniteEta(eta), ErrorCode::kInvalidArgument, "MI is unbounded without noise");
  Tensor x({samples, table.dim()});
  for (std::size_t i = 0; i < samples; ++i) {
    auto src = table.row(static_cast<TokenId>(rng.Index(table.vocab_size())));
    std::copy(src.begin(), src.end(), x.row(i).begin());
  }
  Privatized p = Privatize(x, eta, rng);
  return EstimateMutualInformation(p.values, p.noise, k);
}

enum class AttackKind { kInversion, kAttribute };

struct AttackReport {
  AttackKind kind = AttackKind::kInversion;
  double accuracy = 0.0;
  double auc = std::numeric_limits<double>::quiet_NaN();  // attribute only
  double eta = kInfiniteEta;
  std::uint64_t seed = 0;
  std::size_t samples = 0;
};

// Nearest-neighbour token recovery against the vocabulary table.
inline AttackReport InversionAttack(const Tensor& x_tilde, const VocabEmbeddingTable& table,
                                    const std::vector<TokenId>& truth) {
  Require(table.vocab_size() > 0, ErrorCode::kEmptyInput, "empty vocabulary");
  Require(x_tilde.cols() == table.dim(), ErrorCode::kDimension, "representation width differs");
  Require(x_tilde.rows() == truth.size() && !truth.empty(), ErrorCode::kDimension,
          "one true token per row required");
  std::size_t hits = 0;
  for (std::size_t r = 0; r < x_tilde.rows(); ++r) hits += NearestToken(table, x_tilde.row(r)) == truth[r];
  AttackReport report;
  report.kind = AttackKind::kInversion;
  report.samples = truth.size();
  report.accuracy = static_cast<double>(hits) / static_cast<double>(truth.size());
  return report;
}

struct LabeledRepresentations {
  std::vector<Tensor> token_matrices;  // each n_i x d
  std::vector<int> labels;
};

inline Tensor MeanPooled(const std::vector<Tensor>& token_matrices) {
  std::vector<Tensor> rows;
  rows.reserve(token_matrices.size());
  for (const Tensor& m : token_matrices) rows.push_back(MeanRows(m));
  return StackRows(rows);
}

// Trains the downstream classifier on mean-pooled privatized token
// representations and scores it on the held-out split.
inline AttackReport AttributeInference(const LabeledRepresentations& train,
                                       const LabeledRepresentations& test,
                                       const ClassifierConfig& config = {}) {
  Require(!train.labels.empty() && !test.labels.empty(), ErrorCode::kEmptyInput,
          "attribute attack needs nonempty splits");
  const DownstreamScores s = EvalDownstream(MeanPooled(train.token_matrices), train.labels,
                                            MeanPooled(test.token_matrices), test.labels, config);
  AttackReport report;
  report.kind = AttackKind::kAttribute;
  report.accuracy = s.accuracy;
  report.auc = s.auc;
  report.samples = test.labels.size();
  return report;
}

struct GeometryReport {
  double mean_knn_distance = 0.0;
  double mean_perturbation_distance = 0.0;
  double eta = kInfiniteEta;
  std::size_t k = 1;
};

struct GeometryOptions {
  std::size_t k = 1;
  std::size_t sample_count = 1000;  // vocabulary rows to average over
  std::size_t noise_draws = 1000;
};

// Mean distance from sampled vocabulary rows to their k-th nearest other
// row, and mean ||M(x) - x|| over fresh noise draws.
inline GeometryReport GeometryMetrics(const VocabEmbeddingTable& table, double eta,
                                      const GeometryOptions& options, Rng& rng) {
  const std::size_t v = table.vocab_size();
  Require(options.sample_count >= 1 && options.sample_count <= v, ErrorCode::kInvalidArgument,
          "sample_count must be within the vocabulary size");
  Require(options.k >= 1 && options.k < v, ErrorCode::kInvalidArgument, "k must be below |V|");
  std::vector<std::size_t> ids(v);
  std::iota(ids.begin(), ids.end(), 0);
  for (std::size_t i = 0; i < options.sample_count; ++i) std::swap(ids[i], ids[i + rng.Index(v - i)]);
  GeometryReport report;
  report.eta = eta;
  report.k = options.k;
  std::vector<double> d2(v - 1);
  for (std::size_t s = 0; s < options.sample_count; ++s) {
    const std::size_t i = ids[s];
    std::size_t m = 0;
    for (std::size_t j = 0; j < v; ++j)
      if (j != i) d2[m++] = SquaredDistance(table.rows.row(i), table.rows.row(j));
    std::nth_element(d2.begin(), d2.begin() + (options.k - 1), d2.end());
    report.mean_knn_distance += std::sqrt(d2[options.k - 1]);
  }
  report.mean_knn_distance /= static_cast<double>(options.sample_count);
  if (!IsInfiniteEta(eta)) {
    for (std::size_t i = 0; i < options.noise_draws; ++i)
      report.mean_perturbation_distance += SampleNoise(table.dim(), eta, rng).radius;
    report.mean_perturbation_distance /= static_cast<double>(options.noise_draws);
  }
  return report;
}

}  // namespace snd

#endif  // SND_PRIVACY_EVAL_HPP_
