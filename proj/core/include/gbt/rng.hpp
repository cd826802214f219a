#pragma once

#include <cstdint>
#include <string_view>

namespace gbt {

// Deterministic generator (xoshiro256**) with named substreams. Every
// consumer derives its own substream from (root seed, label), so adding or
// reordering one consumer never shifts the draws seen by another. All
// distributions are implemented here rather than with std::<distribution>
// types, whose output is not pinned across standard libraries.
class Rng {
public:
  Rng() : Rng(0) {}
  explicit Rng(uint64_t seed);

  // Independent stream identified by a label, e.g. "init/enc.s0.l.att.wq".
  Rng substream(std::string_view label) const;
  Rng substream(std::string_view label, uint64_t index) const;

  uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double next_unit();
  // Uniform integer in [0, n), unbiased. n must be > 0.
  uint64_t below(uint64_t n);
  // Standard normal via the polar method.
  double normal();
  // Normal(0, sigma) with rejection outside +-clip*sigma.
  double trunc_normal(double sigma, double clip);

  uint64_t root_seed() const { return root_; }

private:
  uint64_t root_;
  uint64_t s_[4];

  void seed_state(uint64_t seed);
};

}  // namespace gbt
