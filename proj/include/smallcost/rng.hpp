// Copyright 2026 The smallcost Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SMALLCOST_RNG_HPP_
#define SMALLCOST_RNG_HPP_

#include <array>
#include <cstddef>
#include <cstdint>

#include "smallcost/numerics.hpp"

namespace smallcost {

/// Philox4x32-10 counter-based generator.
///
/// A block is a pure function of (key, counter), so any draw can be produced
/// in isolation: Monte Carlo workers indexed by (path, step) generate
/// identical streams regardless of scheduling or worker count.
struct Philox4x32 {
  static constexpr std::uint32_t kW32A = 0x9E3779B9u;
  static constexpr std::uint32_t kW32B = 0xBB67AE85u;
  static constexpr std::uint32_t kM4x32A = 0xD2511F53u;
  static constexpr std::uint32_t kM4x32B = 0xCD9E8D57u;

  static std::array<std::uint32_t, 4> block(std::uint64_t key, std::uint64_t ctr_hi,
                                            std::uint64_t ctr_lo) {
    std::uint32_t x0 = static_cast<std::uint32_t>(ctr_lo);
    std::uint32_t x1 = static_cast<std::uint32_t>(ctr_lo >> 32);
    std::uint32_t x2 = static_cast<std::uint32_t>(ctr_hi);
    std::uint32_t x3 = static_cast<std::uint32_t>(ctr_hi >> 32);
    std::uint32_t k0 = static_cast<std::uint32_t>(key);
    std::uint32_t k1 = static_cast<std::uint32_t>(key >> 32);
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = static_cast<std::uint64_t>(kM4x32A) * x0;
      const std::uint64_t p1 = static_cast<std::uint64_t>(kM4x32B) * x2;
      const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
      const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
      const std::uint32_t y0 = hi1 ^ x1 ^ k0;
      const std::uint32_t y1 = lo1;
      const std::uint32_t y2 = hi0 ^ x3 ^ k1;
      const std::uint32_t y3 = lo0;
      x0 = y0;
      x1 = y1;
      x2 = y2;
      x3 = y3;
      k0 += kW32A;
      k1 += kW32B;
    }
    return {x0, x1, x2, x3};
  }

  /// Four consecutive-counter blocks in one call, bit-identical to four
  /// block() calls at ctr_lo .. ctr_lo + 3. The single-block round loop is a
  /// serial dependency chain; interleaving four independent chains lets the
  /// multiplier pipeline, which matters in path loops drawing billions of
  /// variates.
  static void block4(std::uint64_t key, std::uint64_t ctr_hi,
                     std::uint64_t ctr_lo, std::uint32_t out[16]) {
    std::uint32_t x0[4], x1[4], x2[4], x3[4];
    for (int j = 0; j < 4; ++j) {
      const std::uint64_t lo = ctr_lo + static_cast<std::uint64_t>(j);
      x0[j] = static_cast<std::uint32_t>(lo);
      x1[j] = static_cast<std::uint32_t>(lo >> 32);
      x2[j] = static_cast<std::uint32_t>(ctr_hi);
      x3[j] = static_cast<std::uint32_t>(ctr_hi >> 32);
    }
    std::uint32_t k0 = static_cast<std::uint32_t>(key);
    std::uint32_t k1 = static_cast<std::uint32_t>(key >> 32);
    for (int round = 0; round < 10; ++round) {
      for (int j = 0; j < 4; ++j) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kM4x32A) * x0[j];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kM4x32B) * x2[j];
        const std::uint32_t y0 =
            static_cast<std::uint32_t>(p1 >> 32) ^ x1[j] ^ k0;
        const std::uint32_t y1 = static_cast<std::uint32_t>(p1);
        const std::uint32_t y2 =
            static_cast<std::uint32_t>(p0 >> 32) ^ x3[j] ^ k1;
        const std::uint32_t y3 = static_cast<std::uint32_t>(p0);
        x0[j] = y0;
        x1[j] = y1;
        x2[j] = y2;
        x3[j] = y3;
      }
      k0 += kW32A;
      k1 += kW32B;
    }
    for (int j = 0; j < 4; ++j) {
      out[4 * j + 0] = x0[j];
      out[4 * j + 1] = x1[j];
      out[4 * j + 2] = x2[j];
      out[4 * j + 3] = x3[j];
    }
  }
};

/// Maps two 32-bit words to a double uniform on the open interval (0, 1)
/// with 53 significant bits.
inline double uniform53(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits =
      ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;  // 53 bits
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

/// A stream of random variates addressed by index. Stateless: variate i of
/// stream (seed, stream_id) is always the same number.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream_id)
      : seed_(seed), stream_id_(stream_id) {}

  /// Uniform(0,1) variate number i of this stream.
  double uniform(std::uint64_t i) const {
    const auto b = Philox4x32::block(seed_, stream_id_, i);
    return uniform53(b[0], b[1]);
  }

  /// Standard normal variate number i of this stream (inverse-CDF transform,
  /// so antithetic pairing by u -> 1-u maps to exact negation).
  double normal(std::uint64_t i) const { return inverse_normal_cdf(uniform(i)); }

  /// Fills out[0 .. count) with normal(start), ..., normal(start + count - 1),
  /// bit-identical to the per-call form but several times faster because the
  /// counter blocks are generated four at a time.
  void fill_normals(std::uint64_t start, std::size_t count, double* out) const {
    std::size_t i = 0;
    std::uint32_t words[16];
    for (; i + 4 <= count; i += 4) {
      Philox4x32::block4(seed_, stream_id_, start + i, words);
      for (int j = 0; j < 4; ++j) {
        out[i + j] =
            inverse_normal_cdf(uniform53(words[4 * j], words[4 * j + 1]));
      }
    }
    for (; i < count; ++i) out[i] = normal(start + i);
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
};

}  // namespace smallcost

#endif  // SMALLCOST_RNG_HPP_
