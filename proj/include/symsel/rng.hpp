#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace symsel {

// Philox4x32-10 counter-based generator (Salmon et al., Random123).
//
// The 64-bit key carries the user seed; the upper 64 bits of the counter
// carry a stream id, so every (seed, stream) pair is an independent
// substream. Monte Carlo trials use stream = trial index, which makes
// results independent of how trials are scheduled across threads.
class Philox4x32 {
public:
  using result_type = std::uint32_t;
  using counter_type = std::array<std::uint32_t, 4>;
  using key_type = std::array<std::uint32_t, 2>;

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  Philox4x32(std::uint64_t seed, std::uint64_t stream)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        ctr_{0, 0, static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)} {}

  result_type operator()() {
    if (pos_ == 4) {
      block_ = bijection(ctr_, key_);
      if (++ctr_[0] == 0) ++ctr_[1];
      pos_ = 0;
    }
    return block_[pos_++];
  }

  // The raw keyed bijection; exposed for known-answer tests.
  static counter_type bijection(counter_type ctr, key_type key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kW0;
        key[1] += kW1;
      }
      const std::uint64_t p0 = std::uint64_t{kM0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kM1} * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

private:
  static constexpr std::uint32_t kM0 = 0xD2511F53u;
  static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kW0 = 0x9E3779B9u;
  static constexpr std::uint32_t kW1 = 0xBB67AE85u;

  key_type key_;
  counter_type ctr_;
  counter_type block_{};
  int pos_ = 4;
};

// Stream ids for two-level substreams, e.g. (sweep point, trial).
constexpr std::uint64_t substream(std::uint32_t outer, std::uint32_t inner) {
  return (std::uint64_t{outer} << 32) | inner;
}

}  // namespace symsel
