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

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "gtest/gtest.h"
#include "snd/classifier.hpp"
#include "snd/dx_privacy.hpp"
#include "snd/harness/corpus.hpp"
#include "snd/privacy_eval.hpp"
#include "snd/split_model.hpp"

namespace snd {
namespace {

Tensor Column(const std::vector<double>& v) { return Tensor({v.size(), 1}, v); }

TEST(KnnDistanceTest, OneDimensionalExample) {
  EXPECT_EQ(KnnDistances(Column({0, 1, 3}), 1), (std::vector<double>{1, 1, 2}));
}

TEST(KnnDistanceTest, LastNeighbourIsFarthestPoint) {
  EXPECT_EQ(KnnDistances(Column({0, 1, 3}), 2), (std::vector<double>{3, 2, 3}));
}

TEST(KnnDistanceTest, MatchesSortedBruteForce) {
  Rng rng(1);
  Tensor pts = Tensor::Normal({300, 2}, 1.0, rng);
  for (std::size_t k : {1, 3, 7}) {
    std::vector<double> got = KnnDistances(pts, k);
    for (std::size_t i = 0; i < pts.rows(); ++i) {
      std::vector<double> d;
      for (std::size_t j = 0; j < pts.rows(); ++j)
        if (j != i) d.push_back(Distance(pts.row(i), pts.row(j)));
      std::sort(d.begin(), d.end());
      EXPECT_EQ(got[i], d[k - 1]);
    }
  }
}

TEST(KnnDistanceTest, DuplicatesAndSmallSamplesRejected) {
  try {
    KnnDistances(Column({0, 2, 2, 5}), 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateDistance);
  }
  EXPECT_THROW(KnnDistances(Column({0, 1}), 2), Error);
  EXPECT_THROW(KnnDistances(Column({0, 1}), 0), Error);
}

TEST(DigammaTest, KnownValues) {
  EXPECT_NEAR(Digamma(1.0), -0.5772156649015329, 1e-10);
  EXPECT_NEAR(Digamma(2.0), 0.4227843350984671, 1e-10);
  EXPECT_NEAR(Digamma(100.0), std::log(100.0) - 1.0 / 200.0 - 1.0 / 120000.0, 1e-9);
  EXPECT_NEAR(Digamma(1e-3), Digamma(1.0 + 1e-3) - 1.0 / 1e-3, 1e-10);
}

TEST(DigammaTest, NonPositiveRejected) {
  EXPECT_THROW(Digamma(0.0), Error);
  EXPECT_THROW(Digamma(-2.5), Error);
}

TEST(UnitBallVolumeTest, LowDimensions) {
  EXPECT_NEAR(UnitBallVolume(1), 2.0, 1e-14);
  EXPECT_NEAR(UnitBallVolume(2), std::numbers::pi, 1e-14);
  EXPECT_NEAR(UnitBallVolume(3), 4.0 * std::numbers::pi / 3.0, 1e-14);
  EXPECT_NEAR(UnitBallVolume(3), 4.18879, 1e-5);
}

TEST(KnnEntropyTest, StandardGaussian) {
  Rng rng(2);
  Tensor x = Tensor::Normal({20000, 1}, 1.0, rng);
  EXPECT_NEAR(KnnEntropy(x, 3), 0.5 * std::log(2 * std::numbers::pi * std::numbers::e), 0.05);
}

TEST(KnnEntropyTest, UnitUniform) {
  Rng rng(3);
  std::vector<double> v(20000);
  for (double& u : v) u = rng.Uniform();
  EXPECT_NEAR(KnnEntropy(Column(v), 3), 0.0, 0.05);
}

TEST(KnnEntropyTest, ScalingShiftsByLogFactor) {
  Rng rng(4);
  Tensor x = Tensor::Normal({20000, 1}, 1.0, rng);
  Tensor y = Tensor::Normal({20000, 1}, 2.0, rng);
  EXPECT_NEAR(KnnEntropy(y, 3) - KnnEntropy(x, 3), std::log(2.0), 0.05);
}

TEST(KnnEntropyTest, TranslationInvariant) {
  Rng rng(5);
  // Dyadic grid so that the shift is exact.
  Tensor x({400, 2});
  for (double& v : x.data()) v = static_cast<double>(rng.Index(1 << 20)) / 64.0;
  Tensor shifted = x;
  for (double& v : shifted.data()) v += 3.0;
  EXPECT_EQ(KnnEntropy(x, 3), KnnEntropy(shifted, 3));
}

TEST(MiEstimateTest, IdenticalSetsGiveZero) {
  Rng rng(6);
  Tensor a = Tensor::Normal({500, 4}, 1.0, rng);
  MIEstimate m = EstimateMutualInformation(a, a, 3);
  EXPECT_EQ(m.value, 0.0);
  EXPECT_EQ(m.samples, 500u);
  EXPECT_EQ(m.k, 3u);
  EXPECT_EQ(m.dim, 4u);
}

TEST(MiEstimateTest, GaussianChannel) {
  Rng rng(7);
  Tensor x = Tensor::Normal({20000, 1}, 1.0, rng);
  Tensor z = Tensor::Normal({20000, 1}, 1.0, rng);
  MIEstimate m = EstimateMutualInformation(Add(x, z), z, 3);
  EXPECT_NEAR(m.value, 0.5 * std::log(2.0), 0.05);
}

TEST(MiEstimateTest, MismatchedSetsRejected) {
  EXPECT_THROW(EstimateMutualInformation(Tensor({10, 2}), Tensor({11, 2})), Error);
}

TEST(MiEstimateTest, IncreasesWithEtaOnToyVocabulary) {
  ToyModelConfig cfg;
  cfg.seed = 8;
  ToyModel m = InitToyModel(cfg);
  Rng rng(8);
  double prev = -INFINITY;
  for (double eta : {0.1, 1.0, 10.0, 100.0}) {
    const double mi = VocabularyMutualInformation(m.table, eta, 2000, 3, rng).value;
    EXPECT_GT(mi, prev) << "eta=" << eta;
    prev = mi;
  }
}

TEST(InversionAttackTest, NoNoiseRecoversEveryToken) {
  Rng rng(9);
  VocabEmbeddingTable table{Tensor::Normal({100, 8}, 1.0, rng)};
  std::vector<TokenId> ids(300);
  for (auto& id : ids) id = static_cast<TokenId>(rng.Index(100));
  AttackReport r = InversionAttack(EmbedTokens(ids, table), table, ids);
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_EQ(r.kind, AttackKind::kInversion);
  EXPECT_EQ(r.samples, 300u);
}

TEST(InversionAttackTest, HeavyNoiseDefeatsAttack) {
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    ToyModelConfig cfg;
    cfg.seed = seed;
    ToyModel m = InitToyModel(cfg);
    Rng rng(seed + 50);
    GeometryOptions geo;
    geo.sample_count = 1000;
    geo.noise_draws = 1;
    const double nn = GeometryMetrics(m.table, kInfiniteEta, geo, rng).mean_knn_distance;
    // Mean noise norm d / eta set to five times the nearest-neighbour spacing.
    const double eta = 32.0 / (5.0 * nn);
    std::vector<TokenId> ids(2000);
    for (auto& id : ids) id = static_cast<TokenId>(rng.Index(1000));
    const Tensor x = EmbedTokens(ids, m.table);
    total += InversionAttack(Privatize(x, eta, rng).values, m.table, ids).accuracy;
  }
  EXPECT_LE(total / 5.0, 0.05);
}

TEST(InversionAttackTest, SingleTokenVocabularyAlwaysRecovered) {
  VocabEmbeddingTable table{Tensor::Matrix({{1, 2, 3}})};
  Rng rng(10);
  std::vector<TokenId> ids(50, 0);
  AttackReport r = InversionAttack(Privatize(EmbedTokens(ids, table), 0.01, rng).values, table, ids);
  EXPECT_EQ(r.accuracy, 1.0);
}

TEST(InversionAttackTest, EmptyVocabularyRejected) {
  VocabEmbeddingTable empty{Tensor({0, 3})};
  EXPECT_THROW(InversionAttack(Tensor({1, 3}), empty, {0}), Error);
}

// Desk-scale planted-attribute data: token matrices from a Zipf corpus whose
// label marks the presence of a marker token.
struct AttributeData {
  LabeledRepresentations train, test;
};

AttributeData MakeAttributeData(double eta, std::uint64_t seed, bool shuffle_labels = false) {
  CorpusSpec spec;
  spec.size = 1500;
  Rng rng(seed);
  ToyModelConfig cfg;
  cfg.seed = seed;
  ToyModel m = InitToyModel(cfg);
  PlantAttribute(m.table, ChooseMarkers(spec), 2.0, rng);
  LabeledCorpus corpus = GenerateCorpus(spec, rng);
  if (shuffle_labels) std::shuffle(corpus.labels.begin(), corpus.labels.end(), rng);
  const ClipBound bound = ClipBound::FromVocabulary(m.table);
  AttributeData out;
  for (std::size_t i = 0; i < corpus.sequences.size(); ++i) {
    Tensor x = EmbedTokens(corpus.sequences[i], m.table);
    Tensor xt = PrivatizeTokens(x, {eta, true}, bound, rng).x_tilde;
    LabeledRepresentations& split = i < 1000 ? out.train : out.test;
    split.token_matrices.push_back(std::move(xt));
    split.labels.push_back(corpus.labels[i]);
  }
  return out;
}

TEST(AttributeInferenceTest, NoNoisePlantedAttributeIsLearnable) {
  AttributeData data = MakeAttributeData(kInfiniteEta, 11);
  AttackReport r = AttributeInference(data.train, data.test);
  EXPECT_GT(r.auc, 0.95);
  EXPECT_EQ(r.kind, AttackKind::kAttribute);
  EXPECT_EQ(r.samples, 500u);
}

TEST(AttributeInferenceTest, ExtremeNoiseGivesChanceAuc) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    // Row norms are about sqrt(32); mean noise norm 32 / eta is ten times that.
    AttributeData data = MakeAttributeData(32.0 / (10.0 * std::sqrt(32.0)), 20 + seed);
    AttackReport r = AttributeInference(data.train, data.test);
    EXPECT_GE(r.auc, 0.4);
    EXPECT_LE(r.auc, 0.6);
  }
}

TEST(AttributeInferenceTest, RandomLabelsGiveChanceAuc) {
  AttributeData data = MakeAttributeData(kInfiniteEta, 12, /*shuffle_labels=*/true);
  AttackReport r = AttributeInference(data.train, data.test);
  EXPECT_GE(r.auc, 0.4);
  EXPECT_LE(r.auc, 0.6);
}

TEST(AttributeInferenceTest, SingleClassTrainingRejected) {
  LabeledRepresentations train{{Tensor({2, 3}, 1.0), Tensor({2, 3}, 2.0)}, {1, 1}};
  try {
    AttributeInference(train, train);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSingleClass);
  }
}

TEST(GeometryTest, TwoRowVocabulary) {
  VocabEmbeddingTable table{Tensor::Matrix({{0, 0}, {0, 7}})};
  Rng rng(13);
  GeometryReport r = GeometryMetrics(table, 1.0, {1, 2, 10}, rng);
  EXPECT_EQ(r.mean_knn_distance, 7.0);
  EXPECT_EQ(r.k, 1u);
}

TEST(GeometryTest, PerturbationDistanceIsDOverEta) {
  Rng rng(14);
  VocabEmbeddingTable table{Tensor::Normal({50, 16}, 1.0, rng)};
  GeometryReport r = GeometryMetrics(table, 4.0, {1, 50, 100000}, rng);
  EXPECT_NEAR(r.mean_perturbation_distance / 4.0, 1.0, 0.02);
}

TEST(GeometryTest, ScalingTableDoublesSpacingOnly) {
  Rng rng(15);
  VocabEmbeddingTable table{Tensor::Normal({80, 8}, 1.0, rng)};
  VocabEmbeddingTable doubled{Scale(table.rows, 2.0)};
  Rng a(16), b(16);
  GeometryReport r1 = GeometryMetrics(table, 2.0, {3, 40, 1000}, a);
  GeometryReport r2 = GeometryMetrics(doubled, 2.0, {3, 40, 1000}, b);
  EXPECT_NEAR(r2.mean_knn_distance, 2.0 * r1.mean_knn_distance, 1e-12);
  EXPECT_EQ(r2.mean_perturbation_distance, r1.mean_perturbation_distance);
}

// Smallest eta on a log grid at which inversion of every vocabulary row
// succeeds at least half the time.
double InversionCrossingEta(const VocabEmbeddingTable& table, std::uint64_t seed) {
  std::vector<TokenId> ids(table.vocab_size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<TokenId>(i);
  const Tensor x = EmbedTokens(ids, table);
  for (double log_eta = -2.0; log_eta <= 4.0; log_eta += 0.05) {
    Rng rng(seed);
    const double eta = std::pow(10.0, log_eta);
    if (InversionAttack(Privatize(x, eta, rng).values, table, ids).accuracy >= 0.5) return eta;
  }
  return INFINITY;
}

TEST(GeometryTest, WiderSpacingNeedsSmallerEta) {
  Rng rng(17);
  VocabEmbeddingTable wide{Tensor::Normal({200, 8}, 1.0, rng)};
  VocabEmbeddingTable narrow{Scale(wide.rows, 0.1)};
  GeometryOptions geo{1, 200, 1};
  Rng g(1);
  const double ratio = GeometryMetrics(wide, 1.0, geo, g).mean_knn_distance /
                       GeometryMetrics(narrow, 1.0, geo, g).mean_knn_distance;
  EXPECT_NEAR(ratio, 10.0, 1e-9);
  EXPECT_LT(InversionCrossingEta(wide, 3), InversionCrossingEta(narrow, 3));
}

TEST(DownstreamTest, SeparableTaskLearned) {
  Rng rng(18);
  Tensor x = Tensor::Normal({600, 6}, 1.0, rng);
  std::vector<int> y(600);
  for (std::size_t i = 0; i < 600; ++i) y[i] = x(i, 0) + 0.5 * x(i, 3) > 0 ? 1 : 0;
  Tensor train = Tensor({400, 6}, std::vector<double>(x.data().begin(), x.data().begin() + 2400));
  Tensor test = Tensor({200, 6}, std::vector<double>(x.data().begin() + 2400, x.data().end()));
  DownstreamScores s = EvalDownstream(train, {y.begin(), y.begin() + 400}, test, {y.begin() + 400, y.end()});
  EXPECT_GT(s.accuracy, 0.95);
  EXPECT_GT(s.auc, 0.95);
}

TEST(DownstreamTest, ShuffledLabelsAtChance) {
  Rng rng(19);
  Tensor x = Tensor::Normal({1000, 6}, 1.0, rng);
  std::vector<int> y(1000);
  for (auto& v : y) v = static_cast<int>(rng.Index(2));
  Tensor train = Tensor({600, 6}, std::vector<double>(x.data().begin(), x.data().begin() + 3600));
  Tensor test = Tensor({400, 6}, std::vector<double>(x.data().begin() + 3600, x.data().end()));
  DownstreamScores s = EvalDownstream(train, {y.begin(), y.begin() + 600}, test, {y.begin() + 600, y.end()});
  EXPECT_GE(s.accuracy, 0.4);
  EXPECT_LE(s.accuracy, 0.6);
}

TEST(RocAucTest, PerfectOrderingIsOne) {
  EXPECT_EQ(RocAuc({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}), 1.0);
  EXPECT_EQ(RocAuc({0.9, 0.8, 0.2, 0.1}, {0, 0, 1, 1}), 0.0);
}

TEST(RocAucTest, TiesCountHalf) {
  EXPECT_EQ(RocAuc({0.5, 0.5}, {0, 1}), 0.5);
  // One positive above both negatives, one tied with a negative.
  EXPECT_EQ(RocAuc({0.1, 0.4, 0.4, 0.9}, {0, 0, 1, 1}), 0.875);
}

TEST(RocAucTest, SingleClassRejected) {
  EXPECT_THROW(RocAuc({0.1, 0.2}, {1, 1}), Error);
}

TEST(AccuracyTest, ThresholdAtZeroLogit) {
  EXPECT_EQ(Accuracy({-1.0, 2.0, 0.5, -0.1}, {0, 1, 0, 0}), 0.75);
}

TEST(ConcatPairsTest, SideBySide) {
  Tensor a = Tensor::Matrix({{1, 2}, {3, 4}});
  Tensor b = Tensor::Matrix({{5}, {6}});
  EXPECT_EQ(ConcatPairs(a, b), Tensor::Matrix({{1, 2, 5}, {3, 4, 6}}));
}

}  // namespace
}  // namespace snd
