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

#ifndef SND_PROTOCOL_FRAME_HPP_
#define SND_PROTOCOL_FRAME_HPP_

#include <bit>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <boost/crc.hpp>

#include "snd/error.hpp"
#include "snd/tensor.hpp"

namespace snd {

inline constexpr std::uint8_t kFrameMagic[4] = {'S', 'N', 'D', '1'};
inline constexpr std::uint16_t kFrameVersion = 1;
// magic(4) + version(2) + type(1) + n(4) + d(4)
inline constexpr std::size_t kFrameHeaderBytes = 15;
inline constexpr std::size_t kFrameCrcBytes = 4;
// Ceiling on 4*n*d accepted from the wire before anything is allocated.
inline constexpr std::uint64_t kMaxPayloadBytes = 64ull << 20;

enum class MessageType : std::uint8_t { kEmbedRequest = 1, kEmbedResponse = 2, kError = 3 };

struct Frame {
  std::uint16_t version = kFrameVersion;
  MessageType type = MessageType::kEmbedRequest;
  std::uint32_t n = 0;
  std::uint32_t d = 0;
  std::vector<float> payload;  // row-major, n * d values

  bool operator==(const Frame&) const = default;
};

inline std::uint32_t Crc32(std::span<const std::uint8_t> bytes) {
  boost::crc_32_type crc;
  crc.process_bytes(bytes.data(), bytes.size());
  return crc.checksum();
}

namespace wire {

inline void PutU16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline void PutU32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

inline std::uint16_t GetU16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline std::uint32_t GetU32(const std::uint8_t* p) {
  return std::uint32_t{p[0]} | std::uint32_t{p[1]} << 8 | std::uint32_t{p[2]} << 16 |
         std::uint32_t{p[3]} << 24;
}

}  // namespace wire

inline std::uint64_t FramePayloadBytes(std::uint64_t n, std::uint64_t d) { return 4 * n * d; }

inline std::uint64_t FrameBytes(std::uint64_t n, std::uint64_t d) {
  return kFrameHeaderBytes + FramePayloadBytes(n, d) + kFrameCrcBytes;
}

inline std::vector<std::uint8_t> EncodeFrame(const Frame& f) {
  Require(f.payload.size() == std::uint64_t{f.n} * f.d, ErrorCode::kDimension,
          "frame payload must hold n*d values");
  std::vector<std::uint8_t> out(std::begin(kFrameMagic), std::end(kFrameMagic));
  out.reserve(FrameBytes(f.n, f.d));
  wire::PutU16(out, f.version);
  out.push_back(static_cast<std::uint8_t>(f.type));
  wire::PutU32(out, f.n);
  wire::PutU32(out, f.d);
  for (float v : f.payload) wire::PutU32(out, std::bit_cast<std::uint32_t>(v));
  wire::PutU32(out, Crc32(out));
  return out;
}

// Header fields read without validation, for stream readers that need the
// length before the rest of the frame arrives.
struct FrameHeader {
  bool magic_ok = false;
  std::uint16_t version = 0;
  std::uint8_t type = 0;
  std::uint32_t n = 0;
  std::uint32_t d = 0;
};

inline FrameHeader PeekHeader(std::span<const std::uint8_t> bytes) {
  Require(bytes.size() >= kFrameHeaderBytes, ErrorCode::kTruncated, "frame header truncated");
  FrameHeader h;
  h.magic_ok = std::equal(std::begin(kFrameMagic), std::end(kFrameMagic), bytes.begin());
  h.version = wire::GetU16(bytes.data() + 4);
  h.type = bytes[6];
  h.n = wire::GetU32(bytes.data() + 7);
  h.d = wire::GetU32(bytes.data() + 11);
  return h;
}

// Checks run in order: header length, magic, version, payload length, CRC,
// message type.
inline Frame DecodeFrame(std::span<const std::uint8_t> bytes) {
  const FrameHeader h = PeekHeader(bytes);
  Require(h.magic_ok, ErrorCode::kBadMagic, "frame magic is not SND1");
  Require(h.version == kFrameVersion, ErrorCode::kVersionMismatch,
          "frame version " + std::to_string(h.version) + " unsupported");
  const std::uint64_t expected = FrameBytes(h.n, h.d);
  Require(FramePayloadBytes(h.n, h.d) <= kMaxPayloadBytes, ErrorCode::kFormat,
          "frame payload too large");
  Require(bytes.size() >= expected, ErrorCode::kTruncated,
          "frame truncated: " + std::to_string(bytes.size()) + " of " + std::to_string(expected) +
              " bytes");
  Require(bytes.size() == expected, ErrorCode::kFormat, "trailing bytes after frame");
  const std::size_t body = expected - kFrameCrcBytes;
  Require(Crc32(bytes.first(body)) == wire::GetU32(bytes.data() + body), ErrorCode::kCrcMismatch,
          "frame CRC mismatch");
  Require(h.type >= 1 && h.type <= 3, ErrorCode::kBadMessageType,
          "unknown message type " + std::to_string(h.type));
  Frame f;
  f.version = h.version;
  f.type = static_cast<MessageType>(h.type);
  f.n = h.n;
  f.d = h.d;
  f.payload.resize(std::uint64_t{h.n} * h.d);
  for (std::size_t i = 0; i < f.payload.size(); ++i)
    f.payload[i] = std::bit_cast<float>(wire::GetU32(bytes.data() + kFrameHeaderBytes + 4 * i));
  return f;
}

// float conversion rounds to nearest-even.
inline Frame TensorFrame(MessageType type, const Tensor& values, std::uint32_t n, std::uint32_t d) {
  Require(values.size() == std::uint64_t{n} * d, ErrorCode::kDimension, "tensor does not fill frame");
  Frame f;
  f.type = type;
  f.n = n;
  f.d = d;
  f.payload.reserve(values.size());
  for (double v : values.data()) f.payload.push_back(static_cast<float>(v));
  return f;
}

inline Frame MakeRequestFrame(const Tensor& x_tilde) {
  Require(x_tilde.rank() == 2, ErrorCode::kDimension, "request needs an n x d matrix");
  return TensorFrame(MessageType::kEmbedRequest, x_tilde, static_cast<std::uint32_t>(x_tilde.rows()),
                     static_cast<std::uint32_t>(x_tilde.cols()));
}

inline Frame MakeResponseFrame(const Tensor& embedding) {
  return TensorFrame(MessageType::kEmbedResponse, embedding, 1,
                     static_cast<std::uint32_t>(embedding.size()));
}

// Error text travels as raw bytes NUL-padded to whole floats: n = 1 and
// d = padded length / 4.
inline Frame MakeErrorFrame(const std::string& message) {
  std::vector<std::uint8_t> bytes(message.begin(), message.end());
  bytes.resize((bytes.size() + 3) / 4 * 4, 0);
  if (bytes.empty()) bytes.assign(4, 0);
  Frame f;
  f.type = MessageType::kError;
  f.n = 1;
  f.d = static_cast<std::uint32_t>(bytes.size() / 4);
  f.payload.resize(f.d);
  for (std::size_t i = 0; i < f.payload.size(); ++i)
    f.payload[i] = std::bit_cast<float>(wire::GetU32(bytes.data() + 4 * i));
  return f;
}

inline std::string ErrorFrameMessage(const Frame& f) {
  std::string out;
  for (float v : f.payload) {
    const std::uint32_t u = std::bit_cast<std::uint32_t>(v);
    for (int s = 0; s < 32; s += 8) out.push_back(static_cast<char>((u >> s) & 0xff));
  }
  while (!out.empty() && out.back() == '\0') out.pop_back();
  return out;
}

inline Tensor FrameTensor(const Frame& f) {
  std::vector<double> data(f.payload.begin(), f.payload.end());
  return Tensor({f.n, f.d}, std::move(data));
}

struct PayloadAccount {
  std::uint64_t upload_payload_bytes = 0;
  std::uint64_t download_payload_bytes = 0;
  std::uint64_t upload_bytes = 0;    // whole request frame
  std::uint64_t download_bytes = 0;  // whole response frame
};

// Bytes moved by one request of n tokens of width d.
inline PayloadAccount PayloadAccounting(std::uint64_t n, std::uint64_t d) {
  return {FramePayloadBytes(n, d), FramePayloadBytes(1, d), FrameBytes(n, d), FrameBytes(1, d)};
}

}  // namespace snd

#endif  // SND_PROTOCOL_FRAME_HPP_
