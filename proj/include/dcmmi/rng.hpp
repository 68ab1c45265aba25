#pragma once

#include <cstdint>
#include <random>

namespace dcmmi {

// Deterministic random source with explicit variate transforms.
//
// std::mt19937_64 raw output is specified by the standard, so results are
// identical across platforms; the usual distribution adapters are not, which
// is why the uniform and normal transforms are spelled out here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double next_unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  // Standard normal via Box-Muller; caches the second variate of each pair.
  double next_normal();

  // Bernoulli(p) draw consuming exactly one uniform.
  bool next_bernoulli(double p) { return next_unit() < p; }

  // SplitMix64-style finalizer used to derive independent per-replication
  // streams from (seed, stream index) without coupling them.
  static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream);

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace dcmmi
