#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace owleye {

/// Deterministic random source. The engine is std::mt19937_64, whose output
/// stream is fixed by the C++ standard, and every distribution here is
/// implemented from raw 64-bit draws, so identical seeds produce identical
/// streams on every platform.
///
/// Sub-streams are derived with splitmix64 over (seed, stream, index); each
/// pipeline step draws from its own stream id, so inserting a new step never
/// perturbs the randomness of existing ones.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  /// Independent generator for a (stream, index) pair derived from this seed.
  Rng derive(std::uint64_t stream, std::uint64_t index = 0) const;

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer on [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);

  /// Standard normal via Box-Muller (second value of each pair is cached).
  double normal();

  /// k distinct indices from [0, n), in draw order (partial Fisher-Yates).
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  /// Well-known stream ids; one per randomized pipeline step.
  enum Stream : std::uint64_t {
    kParamInit = 1,
    kProjection = 2,
    kDictSample = 3,
    kTripletPairs = 4,
    kPseudoSupport = 5,
    kInjection = 6,
    kDiagnostics = 7,
    kTrial = 8,
    kSynthesis = 9,
  };

private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

/// splitmix64 mixing step; the basis of Rng::derive.
std::uint64_t splitmix64(std::uint64_t x);

}  // namespace owleye
