#include "ptycho/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace ptycho {

long Rng::poisson(double mean) {
  if (mean < 0.0 || !std::isfinite(mean)) throw std::invalid_argument("poisson: mean must be finite and >= 0");
  if (mean == 0.0) return 0;
  if (mean <= 30.0) return poisson_inversion(mean);
  return poisson_ptrs(mean);
}

// Knuth multiplication method; needs ~mean+1 uniforms, fine for mean <= 30.
long Rng::poisson_inversion(double mean) {
  const double limit = std::exp(-mean);
  long k = 0;
  double prod = 1.0;
  do {
    ++k;
    prod *= uniform();
  } while (prod > limit);
  return k - 1;
}

// Hoermann's PTRS transformed-rejection sampler for mean > 30.
long Rng::poisson_ptrs(double mean) {
  const double slam = std::sqrt(mean);
  const double loglam = std::log(mean);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double v_r = 0.9277 - 3.6224 / (b - 2.0);

  for (;;) {
    const double u = uniform() - 0.5;
    const double v = uniform();
    const double us = 0.5 - std::abs(u);
    const double kf = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= v_r) return static_cast<long>(kf);
    if (kf < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
        kf * loglam - mean - std::lgamma(kf + 1.0)) {
      return static_cast<long>(kf);
    }
  }
}

}  // namespace ptycho
