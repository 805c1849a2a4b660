#pragma once

#include <cstdint>

namespace pemlab {

// Counter-based generator: the i-th draw of stream (seed, stream) is a pure
// function of (seed, stream, i), so any sub-computation can derive its own
// reproducible stream without sharing state.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(mix(seed ^ mix(stream + 0x632be59bd9b4e019ULL))) {}

  std::uint64_t next() { return mix(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

  // Uniform in [0, bound); bound must be positive.
  std::uint64_t below(std::uint64_t bound) {
    const auto wide = static_cast<unsigned __int128>(next()) * bound;
    return static_cast<std::uint64_t>(wide >> 64);
  }

  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  CounterRng fork(std::uint64_t stream) const { return CounterRng(key_, stream + 1); }

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace pemlab
