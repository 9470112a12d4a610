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

#ifndef SND_ERROR_HPP_
#define SND_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace snd {

enum class ErrorCode {
  kDimension,
  kInvalidArgument,
  kContract,
  kDegenerateMask,
  kDegenerateDistance,
  kUndefinedBound,
  kNoModel,
  kEmptyInput,
  kDivergence,
  kSingleClass,
  kIo,
  kFormat,
  // Wire protocol.
  kBadMagic,
  kVersionMismatch,
  kCrcMismatch,
  kTruncated,
  kBadMessageType,
  kTransport,
  kServerError,
};

inline std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDimension: return "dimension";
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kContract: return "contract";
    case ErrorCode::kDegenerateMask: return "degenerate_mask";
    case ErrorCode::kDegenerateDistance: return "degenerate_distance";
    case ErrorCode::kUndefinedBound: return "undefined_bound";
    case ErrorCode::kNoModel: return "no_model";
    case ErrorCode::kEmptyInput: return "empty_input";
    case ErrorCode::kDivergence: return "divergence";
    case ErrorCode::kSingleClass: return "single_class";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kFormat: return "format";
    case ErrorCode::kBadMagic: return "bad_magic";
    case ErrorCode::kVersionMismatch: return "version_mismatch";
    case ErrorCode::kCrcMismatch: return "crc_mismatch";
    case ErrorCode::kTruncated: return "truncated";
    case ErrorCode::kBadMessageType: return "bad_message_type";
    case ErrorCode::kTransport: return "transport";
    case ErrorCode::kServerError: return "server_error";
  }
  return "unknown";
}

// All library failures are reported as snd::Error; code() distinguishes them.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void Require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

}  // namespace snd

#endif  // SND_ERROR_HPP_
