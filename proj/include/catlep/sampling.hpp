#ifndef CATLEP_SAMPLING_HPP
#define CATLEP_SAMPLING_HPP

// Seeded random parameter draws for property sweeps.

#include <cstdint>
#include <random>

#include "catlep/detail/math.hpp"
#include "catlep/params.hpp"

namespace catlep {

/// Sweep box: kappa in [1e-3, 1e-1], eps in [0, 0.1], delta in [-0.2, 0.2],
/// |eps2| in [0.2, 2], theta in [0, 2pi), all in units of kappa2.
struct ParamBox {
  double kappa_lo{1e-3}, kappa_hi{1e-1};
  double eps_lo{0.0}, eps_hi{0.1};
  double delta_lo{-0.2}, delta_hi{0.2};
  double eps2_lo{0.2}, eps2_hi{2.0};
};

class ParamSampler {
 public:
  explicit ParamSampler(std::uint64_t seed, ParamBox box = {}) : rng_(seed), box_(box) {}

  SystemParams operator()() {
    const double kappa = uniform(box_.kappa_lo, box_.kappa_hi);
    const double eps = uniform(box_.eps_lo, box_.eps_hi);
    const double delta = uniform(box_.delta_lo, box_.delta_hi);
    const double eps2 = uniform(box_.eps2_lo, box_.eps2_hi);
    const double theta = uniform(0.0, detail::two_pi<double>());
    return SystemParams::make(kappa, 1.0, eps, delta, eps2, theta);
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  // Drawn from raw 53-bit integers so the stream is identical across standard libraries.
  double uniform(double lo, double hi) {
    const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
  }

  std::mt19937_64 rng_;
  ParamBox box_;
};

}  // namespace catlep

#endif  // CATLEP_SAMPLING_HPP
