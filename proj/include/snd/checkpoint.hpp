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

#ifndef SND_CHECKPOINT_HPP_
#define SND_CHECKPOINT_HPP_

#include <bit>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "snd/error.hpp"
#include "snd/parameters.hpp"

namespace snd {

// Weight file: "SNDW", u16 version, then records until end of file:
//   u32 name length, name bytes, u32 rank, u32 dims[rank], f64 values.
// All integers and floats are little-endian.
inline constexpr char kCheckpointMagic[4] = {'S', 'N', 'D', 'W'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

namespace internal {

template <typename T>
void PutLe(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(value) >> (8 * i)));
}

template <typename T>
T GetLe(const std::vector<std::uint8_t>& in, std::size_t& pos) {
  Require(pos + sizeof(T) <= in.size(), ErrorCode::kTruncated, "checkpoint ends early");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    v |= static_cast<std::uint64_t>(in[pos + i]) << (8 * i);
  pos += sizeof(T);
  return static_cast<T>(v);
}

}  // namespace internal

inline std::vector<std::uint8_t> SerializeCheckpoint(const ParameterStore& store) {
  std::vector<std::uint8_t> out(kCheckpointMagic, kCheckpointMagic + 4);
  internal::PutLe<std::uint16_t>(out, kCheckpointVersion);
  for (const auto& [name, e] : store.entries()) {
    internal::PutLe<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    internal::PutLe<std::uint32_t>(out, static_cast<std::uint32_t>(e.value.rank()));
    for (std::size_t dim : e.value.shape())
      internal::PutLe<std::uint32_t>(out, static_cast<std::uint32_t>(dim));
    for (double v : e.value.data()) internal::PutLe<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

inline ParameterStore DeserializeCheckpoint(const std::vector<std::uint8_t>& in) {
  Require(in.size() >= 6 && std::equal(kCheckpointMagic, kCheckpointMagic + 4, in.begin()),
          ErrorCode::kBadMagic, "not a weight checkpoint");
  std::size_t pos = 4;
  const auto version = internal::GetLe<std::uint16_t>(in, pos);
  Require(version == kCheckpointVersion, ErrorCode::kVersionMismatch,
          "checkpoint version " + std::to_string(version));
  ParameterStore store;
  while (pos < in.size()) {
    const auto len = internal::GetLe<std::uint32_t>(in, pos);
    Require(pos + len <= in.size(), ErrorCode::kTruncated, "checkpoint name");
    std::string name(in.begin() + pos, in.begin() + pos + len);
    pos += len;
    const auto rank = internal::GetLe<std::uint32_t>(in, pos);
    Shape shape(rank);
    std::size_t count = 1;
    for (auto& dim : shape) {
      dim = internal::GetLe<std::uint32_t>(in, pos);
      count *= dim;
    }
    Require(pos + 8 * count <= in.size(), ErrorCode::kTruncated, "checkpoint values of " + name);
    std::vector<double> values(count);
    for (double& v : values) v = std::bit_cast<double>(internal::GetLe<std::uint64_t>(in, pos));
    store.Add(name, Tensor(std::move(shape), std::move(values)));
  }
  return store;
}

inline void SaveCheckpoint(const ParameterStore& store, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  Require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path);
  const auto bytes = SerializeCheckpoint(store);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  Require(static_cast<bool>(out), ErrorCode::kIo, "short write to " + path);
}

inline ParameterStore LoadCheckpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  Require(static_cast<bool>(in), ErrorCode::kIo, "cannot read " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return DeserializeCheckpoint(bytes);
}

}  // namespace snd

#endif  // SND_CHECKPOINT_HPP_
