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

#ifndef SND_PROTOCOL_SERVER_HPP_
#define SND_PROTOCOL_SERVER_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "snd/protocol/frame.hpp"
#include "snd/split_model.hpp"

namespace snd {

// Server side of the split: frame bytes in, frame bytes out. It holds only
// the frozen encoder and never sees clean tokens, noise, or the denoiser.
class EmbeddingServer {
 public:
  explicit EmbeddingServer(const EncoderWeights& encoder) : encoder_(encoder) {}

  // Pure in the request bytes; safe to call from many threads at once.
  std::vector<std::uint8_t> Handle(std::span<const std::uint8_t> request) const {
    try {
      const Frame f = DecodeFrame(request);
      Require(f.type == MessageType::kEmbedRequest, ErrorCode::kBadMessageType,
              "server accepts EmbedRequest frames only");
      Require(f.n >= 1, ErrorCode::kEmptyInput, "request carries no tokens");
      Require(f.n <= encoder_.config.max_length, ErrorCode::kInvalidArgument,
              "request of " + std::to_string(f.n) + " tokens exceeds the limit of " +
                  std::to_string(encoder_.config.max_length));
      Require(f.d == encoder_.config.d_model, ErrorCode::kDimension,
              "request width " + std::to_string(f.d) + " != model width " +
                  std::to_string(encoder_.config.d_model));
      const SentenceEmbedding e = Encode(FrameTensor(f), encoder_, EmbeddingRole::kNoisy);
      return EncodeFrame(MakeResponseFrame(e.values));
    } catch (const Error& e) {
      return EncodeFrame(MakeErrorFrame(std::string(ErrorCodeName(e.code())) + ": " + e.what()));
    }
  }

  const EncoderWeights& encoder() const { return encoder_; }

 private:
  const EncoderWeights& encoder_;
};

}  // namespace snd

#endif  // SND_PROTOCOL_SERVER_HPP_
