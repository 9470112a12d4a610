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

#ifndef SND_VOCAB_HPP_
#define SND_VOCAB_HPP_

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "snd/error.hpp"
#include "snd/tensor.hpp"

namespace snd {

using TokenId = std::uint32_t;

// Token representation table E with one row per vocabulary entry.
struct VocabEmbeddingTable {
  Tensor rows;  // |V| x d

  std::size_t vocab_size() const { return rows.rank() == 2 ? rows.rows() : 0; }
  std::size_t dim() const { return rows.rank() == 2 ? rows.cols() : 0; }
  std::span<const double> row(TokenId id) const { return rows.row(id); }
};

// Index of the table row closest to `point` in Euclidean distance; the
// lowest id wins ties.
inline TokenId NearestToken(const VocabEmbeddingTable& table, std::span<const double> point) {
  Require(table.vocab_size() > 0, ErrorCode::kEmptyInput, "empty vocabulary");
  Require(point.size() == table.dim(), ErrorCode::kDimension, "point and vocabulary widths differ");
  TokenId best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t v = 0; v < table.vocab_size(); ++v) {
    const double dist = SquaredDistance(table.row(static_cast<TokenId>(v)), point);
    if (dist < best_d) {
      best_d = dist;
      best = static_cast<TokenId>(v);
    }
  }
  return best;
}

}  // namespace snd

#endif  // SND_VOCAB_HPP_
