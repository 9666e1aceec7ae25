#pragma once

#include <cmath>
#include <cstdint>

namespace sketchdfo {

/// Counter-based generator: draw i of stream `key` is mix(key + i * golden),
/// the SplitMix64 finalizer. Any draw can be reproduced from (key, counter),
/// and independent streams come from split().
class CounterRng {
 public:
  struct State {
    std::uint64_t key = 0;
    std::uint64_t counter = 0;
    friend bool operator==(const State&, const State&) = default;
  };

  CounterRng() = default;
  explicit CounterRng(std::uint64_t seed) : state_{mix(seed ^ 0x6a09e667f3bcc909ULL), 0} {}
  explicit CounterRng(State s) : state_(s) {}

  State state() const { return state_; }

  std::uint64_t next_u64() { return mix(state_.key + kGolden * ++state_.counter); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Standard normal; consumes two draws.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  /// Independent stream derived from this stream's key.
  CounterRng split(std::uint64_t stream) const {
    return CounterRng(State{mix(state_.key ^ mix(stream + kGolden)), 0});
  }

 private:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  State state_{};
};

}  // namespace sketchdfo
