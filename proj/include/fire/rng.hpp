#pragma once

#include <cstdint>
#include <string_view>

namespace fire {

/// Counter-based generator: the i-th draw is a pure function of (key, i),
/// the SplitMix64 output sequence for seed `key`. Child streams are derived
/// from the key alone, so splitting never depends on how many values the
/// parent has produced.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : key_(seed) {}

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform integer in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  /// Standard normal (Box-Muller, one value per two uniforms).
  double normal();

  Rng split(std::string_view name) const;
  Rng split(std::uint64_t index) const;

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace fire
