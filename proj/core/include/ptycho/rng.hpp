#pragma once

#include <cstdint>
#include <random>

namespace ptycho {

/// Seedable random generator with bit-portable output streams.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard, so identical seeds give identical draws on every platform.
/// Poisson sampling is implemented here (inversion for small means, PTRS
/// transformed rejection for large means) instead of relying on
/// std::poisson_distribution, whose algorithm is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform double in [0, 1) from the top 53 bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Poisson draw with the given mean (mean >= 0).
  long poisson(double mean);

 private:
  long poisson_inversion(double mean);
  long poisson_ptrs(double mean);

  std::mt19937_64 gen_;
};

}  // namespace ptycho
