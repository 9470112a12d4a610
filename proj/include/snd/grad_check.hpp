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

#ifndef SND_GRAD_CHECK_HPP_
#define SND_GRAD_CHECK_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "snd/autodiff.hpp"
#include "snd/parameters.hpp"
#include "snd/rng.hpp"

namespace snd {

using LossFn = std::function<ad::Var(ad::Graph&, const ParameterStore&)>;

struct GradCheckOptions {
  double step = 1e-5;
  // Entries sampled per parameter tensor; 0 checks every entry.
  std::size_t entries_per_tensor = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
};

// Compares reverse-mode gradients against central differences. The relative
// error of one entry is |a - n| / max(|a|, |n|, 1e-12).
inline GradCheckResult GradCheck(const LossFn& loss, ParameterStore& params,
                                 const GradCheckOptions& options = {}) {
  Require(options.step > 0.0, ErrorCode::kInvalidArgument, "grad_check step must be positive");
  params.ZeroGrad();
  {
    ad::Graph g;
    g.Train(params);
    g.Backward(loss(g, params));
  }
  auto evaluate = [&]() {
    ad::Graph g(/*record=*/false);
    return loss(g, params).value()[0];
  };

  Rng rng(options.seed);
  GradCheckResult result;
  for (const std::string& name : params.Names()) {
    const std::size_t n = params.Value(name).size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    if (options.entries_per_tensor != 0 && options.entries_per_tensor < n) {
      for (std::size_t i = 0; i < options.entries_per_tensor; ++i)
        std::swap(idx[i], idx[i + rng.Index(n - i)]);
      idx.resize(options.entries_per_tensor);
    }
    for (std::size_t i : idx) {
      double& p = params.MutableValue(name)[i];
      const double saved = p;
      p = saved + options.step;
      const double up = evaluate();
      p = saved - options.step;
      const double down = evaluate();
      p = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double analytic = params.Grad(name)[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-12});
      const double err = std::abs(analytic - numeric) / denom;
      ++result.checked;
      if (err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_parameter = name;
        result.worst_index = i;
      }
    }
  }
  return result;
}

}  // namespace snd

#endif  // SND_GRAD_CHECK_HPP_
