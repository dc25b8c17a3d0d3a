#include "seqgp/rng.hpp"

#include <cmath>

namespace seqgp {

std::uint64_t rng_word(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
  return mix64(seed ^ mix64(stream ^ mix64(counter)));
}

double rng_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
  return static_cast<double>(rng_word(seed, stream, counter) >> 11) * 0x1.0p-53;
}

std::uint64_t rng_index(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter,
                        std::uint64_t n) {
  // 128-bit multiply-shift; bias is negligible for the n used here.
  const std::uint64_t w = rng_word(seed, stream, counter);
  return static_cast<std::uint64_t>((static_cast<__uint128_t>(w) * n) >> 64);
}

double NormalStream::next() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_;
  }
  // Box-Muller on two counter words; u1 is shifted into (0, 1] so the log
  // is always finite.
  const double u1 = 1.0 - rng_uniform(seed_, stream_, counter_++);
  const double u2 = rng_uniform(seed_, stream_, counter_++);
  const double mag = std::sqrt(-2.0 * std::log(u1));
  const double ang = 2.0 * M_PI * u2;
  cached_ = mag * std::sin(ang);
  has_cached_ = true;
  return mag * std::cos(ang);
}

}  // namespace seqgp
