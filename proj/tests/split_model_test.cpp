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

#include <cstdio>
#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "snd/split_model.hpp"

namespace snd {
namespace {

EncoderConfig SmallConfig(std::size_t layers, bool positional) {
  EncoderConfig c;
  c.d_model = 8;
  c.d_ff = 16;
  c.d_kv = 4;
  c.n_head = 2;
  c.layers = layers;
  c.positional = positional;
  c.init_std = 0.3;
  return c;
}

TEST(EmbedTokensTest, RowsFollowIds) {
  VocabEmbeddingTable table{Tensor::Matrix({{1, 2}, {3, 4}, {5, 6}})};
  std::vector<TokenId> ids{0};
  EXPECT_EQ(EmbedTokens(ids, table), Tensor::Matrix({{1, 2}}));
  ids = {2, 1, 2};
  Tensor x = EmbedTokens(ids, table);
  EXPECT_EQ(x.shape(), (Shape{3, 2}));
  EXPECT_EQ(x, Tensor::Matrix({{5, 6}, {3, 4}, {5, 6}}));
}

TEST(EmbedTokensTest, OutOfRangeIdRejected) {
  VocabEmbeddingTable table{Tensor::Matrix({{1, 2}})};
  std::vector<TokenId> ids{1};
  EXPECT_THROW(EmbedTokens(ids, table), Error);
}

TEST(EncodeTest, NoLayersNoPositionsIsMeanOfRows) {
  Rng rng(1);
  EncoderWeights w = InitEncoder(SmallConfig(0, false), rng);
  Tensor x = Tensor::Normal({5, 8}, 1.0, rng);
  SentenceEmbedding e = Encode(x, w);
  EXPECT_LT(MaxAbsDiff(e.values, MeanRows(x)), 1e-15);
  EXPECT_EQ(e.role, EmbeddingRole::kClean);
  EXPECT_EQ(e.pooling, PoolingMode::kMean);
}

TEST(EncodeTest, Deterministic) {
  Rng rng(2);
  EncoderWeights w = InitEncoder(SmallConfig(2, true), rng);
  Tensor x = Tensor::Normal({6, 8}, 1.0, rng);
  EXPECT_EQ(Encode(x, w).values, Encode(x, w).values);
}

TEST(EncodeTest, SingleTokenOneLayerMatchesHandComposition) {
  Rng rng(3);
  EncoderWeights w = InitEncoder(SmallConfig(1, true), rng);
  const ParameterStore& p = w.params;
  Tensor x = Tensor::Normal({1, 8}, 1.0, rng);

  Tensor h = Add(x, SinusoidalPositions(1, 8));
  Tensor y = LayerNorm(h, p.Value("enc.0.ln1.gain"), p.Value("enc.0.ln1.bias"), 1e-5);
  // One position: every head attends to itself with weight 1.
  Tensor joined({1, 8});
  for (std::size_t head = 0; head < 2; ++head) {
    Tensor v = Matmul(y, p.Value(HeadName("enc.0.attn", "v", head)));
    for (std::size_t j = 0; j < 4; ++j) joined(0, head * 4 + j) = v(0, j);
  }
  h = Add(h, Matmul(joined, p.Value("enc.0.attn.out")));
  Tensor f = Matmul(LayerNorm(h, p.Value("enc.0.ln2.gain"), p.Value("enc.0.ln2.bias"), 1e-5),
                    p.Value("enc.0.fc.w"));
  f = Activation(Add(f, p.Value("enc.0.fc.b").Reshaped({1, 16})));
  Tensor m = Add(Matmul(f, p.Value("enc.0.proj.w")), p.Value("enc.0.proj.b").Reshaped({1, 8}));
  h = Add(h, m);

  EXPECT_LT(MaxAbsDiff(Encode(x, w).values, h.Reshaped({8})), 1e-12);
}

TEST(EncodeTest, PermutationInvariantWithoutPositions) {
  Rng rng(4);
  EncoderWeights w = InitEncoder(SmallConfig(2, false), rng);
  Tensor x = Tensor::Normal({4, 8}, 1.0, rng);
  Tensor swapped = x;
  for (std::size_t j = 0; j < 8; ++j) std::swap(swapped(0, j), swapped(3, j));
  EXPECT_LT(MaxAbsDiff(Encode(x, w).values, Encode(swapped, w).values), 1e-12);
}

TEST(EncodeTest, TranspositionChangesOutputWithPositions) {
  Rng rng(5);
  EncoderWeights w = InitEncoder(SmallConfig(2, true), rng);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor x = Tensor::Normal({4, 8}, 1.0, rng);
    Tensor swapped = x;
    for (std::size_t j = 0; j < 8; ++j) std::swap(swapped(1, j), swapped(2, j));
    EXPECT_GT(MaxAbsDiff(Encode(x, w).values, Encode(swapped, w).values), 1e-6);
  }
}

TEST(EncodeTest, EmptyAndWrongWidthRejected) {
  Rng rng(6);
  EncoderWeights w = InitEncoder(SmallConfig(1, true), rng);
  EXPECT_THROW(Encode(Tensor({0, 8}), w), Error);
  EXPECT_THROW(Encode(Tensor({2, 7}), w), Error);
}

TEST(EncodeTest, SequenceLengthCapEnforced) {
  Rng rng(7);
  EncoderWeights w = InitEncoder(SmallConfig(0, true), rng);
  EXPECT_NO_THROW(Encode(Tensor({kMaxSequenceLength, 8}), w));
  EXPECT_THROW(Encode(Tensor({kMaxSequenceLength + 1, 8}), w), Error);
}

TEST(EncodeTest, EmbedThenEncodeIsTheTrainingPath) {
  ToyModelConfig cfg;
  cfg.vocab_size = 50;
  cfg.seed = 8;
  ToyModel m = InitToyModel(cfg);
  std::vector<TokenId> ids{3, 14, 15, 9, 26};
  Tensor x({5, m.table.dim()});
  for (std::size_t t = 0; t < ids.size(); ++t)
    for (std::size_t j = 0; j < x.cols(); ++j) x(t, j) = m.table.rows(ids[t], j);
  EXPECT_EQ(Encode(EmbedTokens(ids, m.table), m.encoder).values, Encode(x, m.encoder).values);
}

TEST(ToyModelTest, SameSeedIdenticalWeights) {
  ToyModelConfig cfg;
  cfg.seed = 42;
  ToyModel a = InitToyModel(cfg), b = InitToyModel(cfg);
  EXPECT_EQ(a.table.rows, b.table.rows);
  EXPECT_TRUE(a.encoder.params.SameValues(b.encoder.params));
}

TEST(ToyModelTest, DefaultShapes) {
  ToyModel m = InitToyModel({});
  EXPECT_EQ(m.table.rows.shape(), (Shape{1000, 32}));
  EXPECT_EQ(m.encoder.config.layers, 2u);
}

TEST(ToyModelTest, DifferentSeedsDiffer) {
  ToyModelConfig a, b;
  a.seed = 1;
  b.seed = 2;
  ToyModel ma = InitToyModel(a), mb = InitToyModel(b);
  EXPECT_NE(ma.table.rows, mb.table.rows);
  EXPECT_FALSE(ma.encoder.params.SameValues(mb.encoder.params));
}

TEST(ToyModelTest, CheckpointRoundTripIsBitExact) {
  ToyModelConfig cfg;
  cfg.vocab_size = 64;
  cfg.seed = 9;
  ToyModel m = InitToyModel(cfg);
  const std::string path = testing::TempDir() + "/toy_model.sndw";
  SaveToyModel(m, path);
  ToyModel back = LoadToyModel(path);
  std::remove(path.c_str());
  EXPECT_EQ(back.table.rows, m.table.rows);
  EXPECT_TRUE(back.encoder.params.SameValues(m.encoder.params));
  EXPECT_EQ(back.encoder.config.init_std, m.encoder.config.init_std);
  Rng rng(1);
  Tensor x = Tensor::Normal({3, 32}, 1.0, rng);
  EXPECT_EQ(Encode(x, back.encoder).values, Encode(x, m.encoder).values);
}

TEST(ToyModelTest, PerturbedEncoderDiffersButKeepsLayerNorms) {
  ToyModel m = InitToyModel({});
  Rng rng(10);
  EncoderWeights drifted = PerturbEncoder(m.encoder, 0.5, rng);
  EXPECT_FALSE(drifted.params.SameValues(m.encoder.params));
  EXPECT_EQ(drifted.params.Value("enc.0.ln1.gain"), m.encoder.params.Value("enc.0.ln1.gain"));
}

}  // namespace
}  // namespace snd
