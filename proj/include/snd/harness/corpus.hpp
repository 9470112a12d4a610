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

#ifndef SND_HARNESS_CORPUS_HPP_
#define SND_HARNESS_CORPUS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "snd/denoiser.hpp"
#include "snd/error.hpp"
#include "snd/rng.hpp"
#include "snd/vocab.hpp"

namespace snd {

// Synthetic stand-in for a text corpus: token ids follow a Zipf law over the
// vocabulary (id 0 most frequent), and a sequence is labelled 1 when it
// contains any marker token.
struct CorpusSpec {
  std::size_t vocab_size = 1000;
  std::size_t length = 16;
  std::size_t size = 2000;
  double zipf_exponent = 1.1;
  std::size_t marker_count = 50;
};

struct LabeledCorpus {
  Corpus sequences;
  std::vector<int> labels;
};

class ZipfSampler {
 public:
  ZipfSampler(std::size_t n, double exponent) : cdf_(n) {
    Require(n > 0, ErrorCode::kInvalidArgument, "zipf support must be nonempty");
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      total += std::pow(static_cast<double>(r + 1), -exponent);
      cdf_[r] = total;
    }
    for (double& c : cdf_) c /= total;
  }

  double Probability(std::size_t id) const { return cdf_[id] - (id ? cdf_[id - 1] : 0.0); }

  TokenId Sample(Rng& rng) const {
    const double u = rng.Uniform();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return static_cast<TokenId>(std::min<std::size_t>(it - cdf_.begin(), cdf_.size() - 1));
  }

 private:
  std::vector<double> cdf_;
};

// A window of consecutive ids whose total probability makes a length-L
// sequence contain a marker about half the time.
inline std::vector<TokenId> ChooseMarkers(const CorpusSpec& spec) {
  Require(spec.marker_count > 0 && spec.marker_count <= spec.vocab_size, ErrorCode::kInvalidArgument,
          "marker count must be within the vocabulary");
  const ZipfSampler zipf(spec.vocab_size, spec.zipf_exponent);
  const double target = 1.0 - std::pow(0.5, 1.0 / static_cast<double>(spec.length));
  std::size_t best_start = 0;
  double best_gap = INFINITY;
  for (std::size_t start = 0; start + spec.marker_count <= spec.vocab_size; ++start) {
    double mass = 0.0;
    for (std::size_t i = 0; i < spec.marker_count; ++i) mass += zipf.Probability(start + i);
    if (std::abs(mass - target) < best_gap) {
      best_gap = std::abs(mass - target);
      best_start = start;
    }
  }
  std::vector<TokenId> markers(spec.marker_count);
  for (std::size_t i = 0; i < spec.marker_count; ++i) markers[i] = static_cast<TokenId>(best_start + i);
  return markers;
}

inline LabeledCorpus GenerateCorpus(const CorpusSpec& spec, Rng& rng) {
  Require(spec.length >= 1 && spec.size >= 1, ErrorCode::kInvalidArgument, "empty corpus spec");
  const ZipfSampler zipf(spec.vocab_size, spec.zipf_exponent);
  const std::vector<TokenId> markers = ChooseMarkers(spec);
  LabeledCorpus out;
  out.sequences.reserve(spec.size);
  for (std::size_t i = 0; i < spec.size; ++i) {
    std::vector<TokenId> seq(spec.length);
    int label = 0;
    for (auto& t : seq) {
      t = zipf.Sample(rng);
      if (t >= markers.front() && t <= markers.back()) label = 1;
    }
    out.sequences.push_back(std::move(seq));
    out.labels.push_back(label);
  }
  return out;
}

// Gives every marker row the component `strength` along a random unit
// direction u and removes the u component from every other row, so the
// marker count of a sequence is linear in its mean token representation.
inline void PlantAttribute(VocabEmbeddingTable& table, const std::vector<TokenId>& markers,
                           double strength, Rng& rng) {
  const std::size_t d = table.dim();
  std::vector<double> u(d);
  for (double& v : u) v = rng.Normal();
  const double norm = Norm(u);
  for (double& v : u) v /= norm;
  std::vector<bool> is_marker(table.vocab_size(), false);
  for (TokenId m : markers) is_marker.at(m) = true;
  for (std::size_t r = 0; r < table.vocab_size(); ++r) {
    auto row = table.rows.row(r);
    const double along = Dot(row, u);
    const double target = is_marker[r] ? strength : 0.0;
    for (std::size_t c = 0; c < d; ++c) row[c] += (target - along) * u[c];
  }
}

}  // namespace snd

#endif  // SND_HARNESS_CORPUS_HPP_
