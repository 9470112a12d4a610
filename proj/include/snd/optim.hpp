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

#ifndef SND_OPTIM_HPP_
#define SND_OPTIM_HPP_

#include <cmath>

#include "snd/parameters.hpp"

namespace snd {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Decoupled (AdamW-style) decay; 0 disables it.
  double weight_decay = 0.0;
};

// One bias-corrected adaptive-moment update over every parameter in the
// store, using the gradients currently held there.
inline void AdamStep(ParameterStore& store, const AdamOptions& opt) {
  const std::int64_t t = store.step() + 1;
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(t));
  for (auto& [name, e] : store.entries()) {
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      const double g = e.grad[i];
      double& m = e.first_moment[i];
      double& v = e.second_moment[i];
      m = opt.beta1 * m + (1.0 - opt.beta1) * g;
      v = opt.beta2 * v + (1.0 - opt.beta2) * g * g;
      const double m_hat = m / c1;
      const double v_hat = v / c2;
      double& p = e.value[i];
      if (opt.weight_decay != 0.0) p -= opt.learning_rate * opt.weight_decay * p;
      p -= opt.learning_rate * m_hat / (std::sqrt(v_hat) + opt.epsilon);
    }
  }
  store.set_step(t);
}

}  // namespace snd

#endif  // SND_OPTIM_HPP_
