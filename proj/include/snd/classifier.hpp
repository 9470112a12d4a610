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

#ifndef SND_CLASSIFIER_HPP_
#define SND_CLASSIFIER_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "snd/autodiff.hpp"
#include "snd/error.hpp"
#include "snd/layers.hpp"
#include "snd/optim.hpp"
#include "snd/parameters.hpp"
#include "snd/tensor.hpp"

namespace snd {

struct ClassifierConfig {
  std::size_t epochs = 300;  // full-batch steps
  double learning_rate = 1e-2;
  double init_std = 0.02;
  bool standardize = true;
  std::uint64_t seed = 0;
};

// Two fully connected layers (hidden width = input width) with a ReLU
// between them and one logit out.
class BinaryClassifier {
 public:
  BinaryClassifier() = default;

  static BinaryClassifier Train(const Tensor& features, const std::vector<int>& labels,
                                const ClassifierConfig& config) {
    Require(features.rank() == 2 && features.rows() == labels.size() && !labels.empty(),
            ErrorCode::kDimension, "one label per feature row required");
    const std::size_t positives = std::count(labels.begin(), labels.end(), 1);
    Require(positives > 0 && positives < labels.size(), ErrorCode::kSingleClass,
            "training labels contain a single class");
    BinaryClassifier c;
    const std::size_t d = features.cols();
    c.mean_.assign(d, 0.0);
    c.scale_.assign(d, 1.0);
    if (config.standardize) {
      for (std::size_t r = 0; r < features.rows(); ++r)
        for (std::size_t j = 0; j < d; ++j) c.mean_[j] += features(r, j);
      for (double& m : c.mean_) m /= features.rows();
      std::vector<double> var(d, 0.0);
      for (std::size_t r = 0; r < features.rows(); ++r)
        for (std::size_t j = 0; j < d; ++j) var[j] += std::pow(features(r, j) - c.mean_[j], 2);
      for (std::size_t j = 0; j < d; ++j) {
        const double sd = std::sqrt(var[j] / features.rows());
        c.scale_[j] = sd > 1e-12 ? 1.0 / sd : 1.0;
      }
    }
    Rng rng(config.seed);
    AddLinear(c.params_, "fc1", d, d, config.init_std, rng);
    AddLinear(c.params_, "fc2", d, 1, config.init_std, rng);
    const Tensor x = c.Normalize(features);
    const std::vector<double> y(labels.begin(), labels.end());
    AdamOptions adam;
    adam.learning_rate = config.learning_rate;
    for (std::size_t step = 0; step < config.epochs; ++step) {
      c.params_.ZeroGrad();
      ad::Graph g;
      g.Train(c.params_);
      g.Backward(ad::BceWithLogits(c.Logits(g, g.Constant(x)), y));
      AdamStep(c.params_, adam);
    }
    c.params_.ZeroGrad();
    return c;
  }

  // Logits, one per row.
  std::vector<double> Scores(const Tensor& features) const {
    ad::Graph g(/*record=*/false);
    const Tensor out = Logits(g, g.Constant(Normalize(features))).value();
    return out.values();
  }

 private:
  Tensor Normalize(const Tensor& features) const {
    Require(features.cols() == mean_.size(), ErrorCode::kDimension, "feature width changed");
    Tensor x = features;
    for (std::size_t r = 0; r < x.rows(); ++r)
      for (std::size_t j = 0; j < x.cols(); ++j) x(r, j) = (x(r, j) - mean_[j]) * scale_[j];
    return x;
  }

  ad::Var Logits(ad::Graph& g, ad::Var x) const {
    return Linear(g, ad::Relu(Linear(g, x, params_, "fc1")), params_, "fc2");
  }

  ParameterStore params_;
  std::vector<double> mean_;
  std::vector<double> scale_;
};

// Fraction of rows where (score > 0) matches the label.
inline double Accuracy(const std::vector<double>& scores, const std::vector<int>& labels) {
  Require(scores.size() == labels.size() && !labels.empty(), ErrorCode::kDimension,
          "one score per label required");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) hits += (scores[i] > 0.0) == (labels[i] == 1);
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

// Average ranks (1-based) with ties sharing the mean of their positions.
inline std::vector<double> AverageRanks(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

// Area under the ROC curve from the rank-sum statistic.
inline double RocAuc(const std::vector<double>& scores, const std::vector<int>& labels) {
  Require(scores.size() == labels.size(), ErrorCode::kDimension, "one score per label required");
  const std::vector<double> ranks = AverageRanks(scores);
  double pos = 0.0, rank_sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == 1) {
      pos += 1.0;
      rank_sum += ranks[i];
    }
  const double neg = static_cast<double>(labels.size()) - pos;
  Require(pos > 0 && neg > 0, ErrorCode::kSingleClass, "AUC needs both classes");
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

struct DownstreamScores {
  double accuracy = 0.0;
  double auc = 0.0;
};

inline DownstreamScores EvalDownstream(const Tensor& train_x, const std::vector<int>& train_y,
                                       const Tensor& test_x, const std::vector<int>& test_y,
                                       const ClassifierConfig& config = {}) {
  Require(train_x.cols() == test_x.cols(), ErrorCode::kDimension,
          "train and test embeddings differ in width");
  const BinaryClassifier c = BinaryClassifier::Train(train_x, train_y, config);
  const std::vector<double> scores = c.Scores(test_x);
  return {Accuracy(scores, test_y), RocAuc(scores, test_y)};
}

// Stacks sentence embeddings (each of size d) into an N x d matrix.
inline Tensor StackRows(const std::vector<Tensor>& rows) {
  Require(!rows.empty(), ErrorCode::kEmptyInput, "nothing to stack");
  const std::size_t d = rows.front().size();
  std::vector<double> data;
  data.reserve(rows.size() * d);
  for (const Tensor& r : rows) {
    Require(r.size() == d, ErrorCode::kDimension, "rows differ in width");
    data.insert(data.end(), r.data().begin(), r.data().end());
  }
  return Tensor({rows.size(), d}, std::move(data));
}

// Pair tasks: both sentence embeddings side by side.
inline Tensor ConcatPairs(const Tensor& first, const Tensor& second) {
  Require(first.rows() == second.rows(), ErrorCode::kDimension, "pair counts differ");
  Tensor out({first.rows(), first.cols() + second.cols()});
  for (std::size_t r = 0; r < first.rows(); ++r) {
    std::copy(first.row(r).begin(), first.row(r).end(), out.row(r).begin());
    std::copy(second.row(r).begin(), second.row(r).end(), out.row(r).begin() + first.cols());
  }
  return out;
}

}  // namespace snd

#endif  // SND_CLASSIFIER_HPP_
