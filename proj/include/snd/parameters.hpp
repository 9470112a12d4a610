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

#ifndef SND_PARAMETERS_HPP_
#define SND_PARAMETERS_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "snd/error.hpp"
#include "snd/tensor.hpp"

namespace snd {

// Named parameters with matching gradients and adaptive-moment state.
// Iteration order is lexicographic by name, so anything that walks the store
// is deterministic.
class ParameterStore {
 public:
  struct Entry {
    Tensor value;
    Tensor grad;
    Tensor first_moment;
    Tensor second_moment;
  };

  void Add(const std::string& name, Tensor value) {
    Require(!entries_.contains(name), ErrorCode::kInvalidArgument,
            "duplicate parameter " + name);
    Entry e;
    e.grad = Tensor(value.shape());
    e.first_moment = Tensor(value.shape());
    e.second_moment = Tensor(value.shape());
    e.value = std::move(value);
    entries_.emplace(name, std::move(e));
  }

  bool Contains(const std::string& name) const { return entries_.contains(name); }

  const Tensor& Value(const std::string& name) const { return Get(name).value; }
  Tensor& MutableValue(const std::string& name) { return Get(name).value; }
  const Tensor& Grad(const std::string& name) const { return Get(name).grad; }
  Tensor& MutableGrad(const std::string& name) { return Get(name).grad; }

  Entry& Get(const std::string& name) {
    auto it = entries_.find(name);
    Require(it != entries_.end(), ErrorCode::kInvalidArgument,
            "unknown parameter " + name);
    return it->second;
  }
  const Entry& Get(const std::string& name) const {
    auto it = entries_.find(name);
    Require(it != entries_.end(), ErrorCode::kInvalidArgument,
            "unknown parameter " + name);
    return it->second;
  }

  std::vector<std::string> Names() const {
    std::vector<std::string> names;
    names.reserve(entries_.size());
    for (const auto& [name, _] : entries_) names.push_back(name);
    return names;
  }

  std::map<std::string, Entry>& entries() { return entries_; }
  const std::map<std::string, Entry>& entries() const { return entries_; }

  std::size_t ParameterCount() const {
    std::size_t n = 0;
    for (const auto& [_, e] : entries_) n += e.value.size();
    return n;
  }

  void ZeroGrad() {
    for (auto& [_, e] : entries_) std::fill(e.grad.data().begin(), e.grad.data().end(), 0.0);
  }

  void ScaleGrad(double s) {
    for (auto& [_, e] : entries_)
      for (double& g : e.grad.data()) g *= s;
  }

  std::int64_t step() const { return step_; }
  void set_step(std::int64_t step) { step_ = step; }

  // Values only; gradients and optimizer state are reset.
  ParameterStore CloneValues() const {
    ParameterStore out;
    for (const auto& [name, e] : entries_) out.Add(name, e.value);
    return out;
  }

  bool SameValues(const ParameterStore& other) const {
    if (entries_.size() != other.entries_.size()) return false;
    for (const auto& [name, e] : entries_) {
      auto it = other.entries_.find(name);
      if (it == other.entries_.end() || !(it->second.value == e.value)) return false;
    }
    return true;
  }

 private:
  std::map<std::string, Entry> entries_;
  std::int64_t step_ = 0;
};

}  // namespace snd

#endif  // SND_PARAMETERS_HPP_
