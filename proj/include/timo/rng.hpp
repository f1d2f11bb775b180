#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace timo {

/// 64-bit FNV-1a hash; used to derive named sub-streams and config fingerprints.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

/// SplitMix64 generator (Steele, Lea & Flood 2014 constants).
///
/// Every random draw in the project flows from one 64-bit seed through this type, so the
/// streams are reproducible from any language:
///   next():    state += 0x9e3779b97f4a7c15; z = mix(state)
///   uniform(): (next() >> 11) * 2^-53, in [0, 1)
///   normal():  Box-Muller on u1 = 1 - uniform(), u2 = uniform(); the cosine branch is
///              returned first and the sine branch is cached for the following call
///   below(n):  rejection sampling on next() to remove modulo bias
///   stream(name): new generator seeded with mix(seed ^ fnv1a64(name)), where seed is the
///              value this generator was constructed with (independent of draws made so far)
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : seed_(seed), state_(seed) {}

  static std::uint64_t mix(std::uint64_t z);

  std::uint64_t next();
  double uniform();
  double normal();
  std::uint64_t below(std::uint64_t n);

  SplitMix64 stream(std::string_view name) const;
  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// `count` distinct indices from [0, n) by partial Fisher-Yates, returned in ascending order.
std::vector<std::size_t> sample_without_replacement(SplitMix64& rng, std::size_t n, std::size_t count);

}  // namespace timo
