#ifndef CATLEP_RESULTANT_TOPOLOGY_HPP
#define CATLEP_RESULTANT_TOPOLOGY_HPP

// Resultant vector (R1, R2) of the reduced cubic, its winding number along
// closed loops in the (eps, delta) plane, and zero-level contours.

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "catlep/contours.hpp"
#include "catlep/detail/math.hpp"
#include "catlep/error.hpp"
#include "catlep/logical_liouvillian.hpp"
#include "catlep/params.hpp"

namespace catlep {

template <class Real = double>
struct BasicResultantPair {
  Real r1{0};
  Real r2{0};
  /// Largest imaginary part dropped when forming r1, r2 from complex eigenvalues.
  Real imag_residual{0};
};

using ResultantPair = BasicResultantPair<double>;

/// R1 = -(E2-E3)^2 (E2-E4)^2 (E3-E4)^2,
/// R2 = -8 (E2+E3-2E4)(E2+E4-2E3)(E3+E4-2E2).
/// R1 vanishes on second-order exceptional points, R1 = R2 = 0 on third-order ones.
template <class Real>
inline BasicResultantPair<Real> resultants(const BasicSpectrum<Real>& s) {
  using std::abs;
  const auto& e2 = s.e[1];
  const auto& e3 = s.e[2];
  const auto& e4 = s.e[3];
  const auto d23 = e2 - e3;
  const auto d24 = e2 - e4;
  const auto d34 = e3 - e4;
  const auto prod = d23 * d24 * d34;
  const auto r1 = -(prod * prod);
  const auto r2 = std::complex<Real>(Real(-8), Real(0)) * (e2 + e3 - Real(2) * e4) *
                  (e2 + e4 - Real(2) * e3) * (e3 + e4 - Real(2) * e2);
  BasicResultantPair<Real> out;
  out.r1 = r1.real();
  out.r2 = r2.real();
  out.imag_residual = abs(r1.imag()) > abs(r2.imag()) ? abs(r1.imag()) : abs(r2.imag());
  return out;
}

/// The same pair written through the cubic invariants: R1 = 108 (q^2 + m^3), R2 = 432 q.
template <class Real>
inline BasicResultantPair<Real> resultants_from_invariants(const Real& q, const Real& m) {
  return {Real(108) * (q * q + m * m * m), Real(432) * q, Real(0)};
}

template <class Real>
inline BasicResultantPair<Real> resultants_at(const BasicSystemParams<Real>& params,
                                              const BasicCatManifold<Real>& manifold) {
  return resultants(closed_form_spectrum(params, manifold));
}

inline ResultantPair resultants_at(const SystemParams& params) {
  return resultants_at(params, derive_cat_manifold(params));
}

/// Context for evaluations in the (eps, delta) plane: everything but eps and delta.
struct PlaneContext {
  SystemParams base;
  CatManifold manifold;

  static PlaneContext from(const SystemParams& params) {
    return {params, derive_cat_manifold(params)};
  }

  ResultantPair at(double eps, double delta) const {
    return resultants_at(base.at(std::abs(eps), delta), manifold);
  }
};

/// Ellipse (eps, delta)(phi) = center + (r_eps cos(phi), r_delta sin(phi)),
/// traversed counterclockwise for orientation +1.
struct LoopSpec {
  double center_eps{0.0};
  double center_delta{0.0};
  double radius_eps{0.0};
  double radius_delta{0.0};
  int samples{64};
  int orientation{+1};

  void validate() const {
    if (!(radius_eps > 0.0) || !(radius_delta > 0.0) || !std::isfinite(radius_eps) ||
        !std::isfinite(radius_delta)) {
      throw Error(Errc::invalid_argument, "loop radii must be positive and finite");
    }
    if (!std::isfinite(center_eps) || !std::isfinite(center_delta)) {
      throw Error(Errc::invalid_argument, "loop center must be finite");
    }
    if (samples < 16) throw Error(Errc::invalid_argument, "loops need at least 16 samples");
    if (orientation != 1 && orientation != -1) {
      throw Error(Errc::invalid_argument, "orientation must be +1 or -1");
    }
  }

  Point2 point(double phi) const {
    const double a = orientation * phi;
    return {center_eps + radius_eps * std::cos(a), center_delta + radius_delta * std::sin(a)};
  }
};

enum class WindingConfidence { exact, refined, failed };

inline const char* to_string(WindingConfidence c) {
  switch (c) {
    case WindingConfidence::exact: return "exact";
    case WindingConfidence::refined: return "refined";
    case WindingConfidence::failed: return "failed";
  }
  return "failed";
}

struct WindingResult {
  int w{0};
  WindingConfidence confidence{WindingConfidence::failed};
  int samples_used{0};
  double fractional{0.0};
  /// min ||R|| / max ||R|| along the loop at the final sampling.
  double min_r_norm{0.0};
  std::string diagnostic;
};

namespace detail {

struct LoopSamples {
  std::vector<double> r1;
  std::vector<double> r2;
};

inline LoopSamples sample_loop(const LoopSpec& loop, const PlaneContext& ctx, int n) {
  LoopSamples s;
  s.r1.resize(n);
  s.r2.resize(n);
  for (int k = 0; k < n; ++k) {
    const double phi = detail::two_pi<double>() * k / n;
    const Point2 pt = loop.point(phi);
    const auto r = ctx.at(pt.x, pt.y);
    s.r1[k] = r.r1;
    s.r2[k] = r.r2;
  }
  return s;
}

struct WindingSum {
  double turns{0.0};
  double max_step{0.0};
  double min_norm{0.0};
};

// Sum of principal angle increments of (R1/s1, R2/s2); the winding number is
// unchanged by the positive rescaling of each component.
inline WindingSum sum_angles(const LoopSamples& s) {
  const std::size_t n = s.r1.size();
  double s1 = 0.0, s2 = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    s1 = std::max(s1, std::abs(s.r1[k]));
    s2 = std::max(s2, std::abs(s.r2[k]));
  }
  if (s1 == 0.0) s1 = 1.0;
  if (s2 == 0.0) s2 = 1.0;
  WindingSum out;
  double max_norm = 0.0;
  double min_norm = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) {
    const double nrm = std::hypot(s.r1[k], s.r2[k]);
    max_norm = std::max(max_norm, nrm);
    min_norm = std::min(min_norm, nrm);
  }
  out.min_norm = max_norm > 0.0 ? min_norm / max_norm : 0.0;
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t next = (k + 1) % n;
    const std::complex<double> a(s.r1[k] / s1, s.r2[k] / s2);
    const std::complex<double> b(s.r1[next] / s1, s.r2[next] / s2);
    const double step = std::arg(b * std::conj(a));
    out.max_step = std::max(out.max_step, std::abs(step));
    total += step;
  }
  out.turns = total / detail::two_pi<double>();
  return out;
}

}  // namespace detail

/// Winding estimate at exactly loop.samples points, no refinement.
inline double winding_estimate(const LoopSpec& loop, const PlaneContext& ctx) {
  loop.validate();
  return detail::sum_angles(detail::sample_loop(loop, ctx, loop.samples)).turns;
}

/// Integer winding number of (R1, R2) along the loop. Sampling is doubled until
/// two consecutive estimates agree and round within 0.05 of an integer.
inline WindingResult winding_number(const LoopSpec& loop, const PlaneContext& ctx) {
  loop.validate();
  constexpr int kMaxSamples = 1 << 20;
  constexpr double kGrazeFloor = 1e-12;
  WindingResult out;
  int n = loop.samples;
  bool have_previous = false;
  long previous = 0;
  int rounds = 0;
  while (n <= kMaxSamples) {
    const auto sum = detail::sum_angles(detail::sample_loop(loop, ctx, n));
    out.samples_used = n;
    out.fractional = sum.turns;
    out.min_r_norm = sum.min_norm;
    if (sum.min_norm < kGrazeFloor) {
      out.confidence = WindingConfidence::failed;
      out.diagnostic = "resultant vector nearly vanishes on the loop (loop grazes an exceptional point)";
      return out;
    }
    const long rounded = std::lround(sum.turns);
    const bool integral = std::abs(sum.turns - static_cast<double>(rounded)) < 0.05;
    // Unwrapping is trusted only when every increment stays well below pi.
    const bool resolved = sum.max_step < 0.5 * detail::pi<double>();
    if (integral && resolved && have_previous && rounded == previous) {
      out.w = static_cast<int>(rounded);
      out.confidence = rounds <= 1 ? WindingConfidence::exact : WindingConfidence::refined;
      return out;
    }
    have_previous = integral && resolved;
    previous = rounded;
    ++rounds;
    if (n > kMaxSamples / 2) break;
    n *= 2;
  }
  out.confidence = WindingConfidence::failed;
  out.diagnostic = "adaptive refinement exceeded 2^20 samples";
  return out;
}

struct TrajectoryPoint {
  double phi{0.0};
  double r1n{0.0};
  double r2n{0.0};
};

/// Normalized resultant vector R / ||R|| along the loop.
inline std::vector<TrajectoryPoint> trajectory(const LoopSpec& loop, const PlaneContext& ctx) {
  loop.validate();
  std::vector<TrajectoryPoint> out;
  out.reserve(static_cast<std::size_t>(loop.samples) + 1);
  for (int k = 0; k <= loop.samples; ++k) {
    const double phi = detail::two_pi<double>() * k / loop.samples;
    const Point2 pt = loop.point(phi);
    const auto r = ctx.at(pt.x, pt.y);
    const double nrm = std::hypot(r.r1, r.r2);
    if (!(nrm > 0.0)) {
      throw Error(Errc::numerical_failure, "resultant vector vanishes on the loop");
    }
    out.push_back({phi, r.r1 / nrm, r.r2 / nrm});
  }
  return out;
}

struct GridSpec {
  double eps_lo{0.0};
  double eps_hi{1.0};
  int eps_count{401};
  double delta_lo{0.0};
  double delta_hi{1.0};
  int delta_count{401};

  void validate() const {
    if (eps_count < 2 || delta_count < 2) {
      throw Error(Errc::invalid_argument, "grid counts must be >= 2");
    }
    if (!std::isfinite(eps_lo) || !std::isfinite(eps_hi) || !std::isfinite(delta_lo) ||
        !std::isfinite(delta_hi) || !(eps_hi > eps_lo) || !(delta_hi > delta_lo)) {
      throw Error(Errc::invalid_argument, "grid ranges must be finite and non-empty");
    }
  }

  std::vector<double> eps_nodes() const { return linspace(eps_lo, eps_hi, eps_count); }
  std::vector<double> delta_nodes() const { return linspace(delta_lo, delta_hi, delta_count); }

  static std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) v[k] = lo + (hi - lo) * k / (n - 1);
    return v;
  }
};

enum class Component { r1, r2 };

inline const char* to_string(Component c) { return c == Component::r1 ? "R1" : "R2"; }

struct ResultantGrid {
  GridField r1;
  GridField r2;
};

/// R1 and R2 on every grid node. Eps enters only through eps^2, so negative eps
/// nodes mirror the positive half-plane.
inline ResultantGrid evaluate_grid(const GridSpec& grid, const PlaneContext& ctx) {
  grid.validate();
  ResultantGrid out;
  out.r1.xs = out.r2.xs = grid.eps_nodes();
  out.r1.ys = out.r2.ys = grid.delta_nodes();
  const std::size_t n = out.r1.xs.size() * out.r1.ys.size();
  out.r1.values.resize(n);
  out.r2.values.resize(n);
  for (std::size_t j = 0; j < out.r1.ys.size(); ++j) {
    for (std::size_t i = 0; i < out.r1.xs.size(); ++i) {
      const auto r = ctx.at(out.r1.xs[i], out.r1.ys[j]);
      out.r1.values[j * out.r1.xs.size() + i] = r.r1;
      out.r2.values[j * out.r1.xs.size() + i] = r.r2;
    }
  }
  return out;
}

inline std::vector<Polyline> zero_contours(const GridSpec& grid, Component which,
                                           const PlaneContext& ctx) {
  const auto fields = evaluate_grid(grid, ctx);
  return marching_squares(which == Component::r1 ? fields.r1 : fields.r2);
}

}  // namespace catlep

#endif  // CATLEP_RESULTANT_TOPOLOGY_HPP
