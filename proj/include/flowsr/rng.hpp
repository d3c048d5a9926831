// Copyright (C) 2026 the flowsr authors
// SPDX-License-Identifier: Apache-2.0
#ifndef FLOWSR_RNG_HPP
#define FLOWSR_RNG_HPP

#include <cstdint>
#include <initializer_list>

namespace flowsr {

// xoshiro256++ with splitmix64 seeding. Self-contained so that streams are
// bit-reproducible across standard libraries and platforms. fork() derives
// an independent substream from a list of counters, which keeps per-sample
// and per-stage randomness stable under reordering and parallel execution.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0x9e3779b97f4a7c15ULL);

  uint64_t next_u64();

  // uniform in [0, 1)
  double uniform();
  double uniform(double lo, double hi);
  // standard normal via Box-Muller (deterministic, no cached spare)
  double normal();
  double normal(double mean, double stddev);
  // integer in [0, n)
  uint64_t below(uint64_t n);

  // independent substream keyed by (seed, tags...)
  Rng fork(std::initializer_list<uint64_t> tags) const;
  Rng fork(uint64_t a) const { return fork({a}); }
  Rng fork(uint64_t a, uint64_t b) const { return fork({a, b}); }
  Rng fork(uint64_t a, uint64_t b, uint64_t c) const { return fork({a, b, c}); }

  uint64_t seed() const { return seed_; }

 private:
  uint64_t seed_ = 0;
  uint64_t s_[4] = {0, 0, 0, 0};
};

}  // namespace flowsr

#endif  // FLOWSR_RNG_HPP
