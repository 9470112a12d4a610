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

#ifndef SND_PROTOCOL_CLIENT_HPP_
#define SND_PROTOCOL_CLIENT_HPP_

#include <cstdint>
#include <mutex>
#include <string>

#include "snd/error.hpp"
#include "snd/protocol/frame.hpp"
#include "snd/protocol/transport.hpp"
#include "snd/split_model.hpp"

namespace snd {

class Session {
 public:
  Session(Transport& transport, std::uint64_t id = 0) : transport_(transport), id_(id) {}

  std::uint64_t id() const { return id_; }
  std::uint16_t version() const { return kFrameVersion; }
  Transport& transport() { return transport_; }

  // At most one request in flight.
  std::vector<std::uint8_t> Exchange(std::span<const std::uint8_t> request) {
    std::lock_guard<std::mutex> lock(mu_);
    return transport_.Exchange(request);
  }

 private:
  Transport& transport_;
  std::uint64_t id_;
  std::mutex mu_;
};

// Uploads the privatized tokens and returns the server's noisy sentence
// embedding (width checked against the upload).
inline SentenceEmbedding ClientRequest(const Tensor& x_tilde, Session& session) {
  const std::vector<std::uint8_t> reply = session.Exchange(EncodeFrame(MakeRequestFrame(x_tilde)));
  const Frame f = DecodeFrame(reply);
  if (f.type == MessageType::kError)
    throw Error(ErrorCode::kServerError, "server error: " + ErrorFrameMessage(f));
  Require(f.type == MessageType::kEmbedResponse, ErrorCode::kContract,
          "expected an EmbedResponse frame");
  Require(f.n == 1 && f.d == x_tilde.cols(), ErrorCode::kContract,
          "response shape " + std::to_string(f.n) + "x" + std::to_string(f.d) +
              " does not match width " + std::to_string(x_tilde.cols()));
  SentenceEmbedding e;
  e.values = FrameTensor(f).Reshaped({f.d});
  e.role = EmbeddingRole::kNoisy;
  return e;
}

}  // namespace snd

#endif  // SND_PROTOCOL_CLIENT_HPP_
