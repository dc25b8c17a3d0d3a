// Counter-based random number generation. Every draw is a pure function of
// (seed, stream, counter), so per-sample substreams are reproducible
// independent of scheduling and a resumed run replays the same randomness.
#pragma once

#include <cstdint>

namespace seqgp {

/// SplitMix64 finalizer; bijective 64-bit mix.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// FNV-1a hash of a label, for deriving stable stream ids from names.
constexpr std::uint64_t stream_id(const char* label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char* p = label; *p; ++p) h = (h ^ static_cast<unsigned char>(*p)) * 0x100000001b3ULL;
  return h;
}

std::uint64_t rng_word(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter);

/// Uniform in [0, 1) with 53 random bits.
double rng_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter);

/// Uniform index in {0, ..., n-1}.
std::uint64_t rng_index(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter,
                        std::uint64_t n);

/// Standard normal draws from one (seed, stream) pair, generated in counter
/// order via Box-Muller. Cheap to construct; holds only the counter state.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t stream)
      : seed_(seed), stream_(stream) {}

  double next();

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace seqgp
