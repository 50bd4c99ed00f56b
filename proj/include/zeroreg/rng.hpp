#pragma once

#include <cstdint>
#include <limits>

namespace zeroreg {

/// Counter-based generator: output i of a stream is SplitMix64 applied to
/// (key + i * golden). Streams are identified by (seed, stream id), so any
/// component can derive an independent, reproducible stream without sharing
/// state. Satisfies UniformRandomBitGenerator.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(mix(seed ^ mix(stream + 0x632be59bd9b4e019ULL))) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix(key_ + kGolden * ++counter_); }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Child stream keyed by this stream's key and `id`; leaves this stream untouched.
  CounterRng derive(std::uint64_t id) const { return CounterRng(key_, id); }

  std::uint64_t counter() const { return counter_; }

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z += kGolden;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace zeroreg
