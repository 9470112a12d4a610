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

#ifndef SND_PROTOCOL_TRANSPORT_HPP_
#define SND_PROTOCOL_TRANSPORT_HPP_

#include <atomic>
#include <cstdint>
#include <functional>
#include <mutex>
#include <span>
#include <vector>

#include "snd/error.hpp"

namespace snd {

// Carries one request frame to the server and returns the response frame.
class Transport {
 public:
  virtual ~Transport() = default;

  std::vector<std::uint8_t> Exchange(std::span<const std::uint8_t> request) {
    std::vector<std::uint8_t> response = DoExchange(request);
    bytes_sent_ += request.size();
    bytes_received_ += response.size();
    return response;
  }

  std::uint64_t bytes_sent() const { return bytes_sent_; }
  std::uint64_t bytes_received() const { return bytes_received_; }

 protected:
  virtual std::vector<std::uint8_t> DoExchange(std::span<const std::uint8_t> request) = 0;

 private:
  std::atomic<std::uint64_t> bytes_sent_{0};
  std::atomic<std::uint64_t> bytes_received_{0};
};

using FrameHandler = std::function<std::vector<std::uint8_t>(std::span<const std::uint8_t>)>;

// Calls the handler directly; deterministic and used by tests.
class InProcessTransport : public Transport {
 public:
  explicit InProcessTransport(FrameHandler handler) : handler_(std::move(handler)) {}

 protected:
  std::vector<std::uint8_t> DoExchange(std::span<const std::uint8_t> request) override {
    return handler_(request);
  }

 private:
  FrameHandler handler_;
};

}  // namespace snd

#endif  // SND_PROTOCOL_TRANSPORT_HPP_
