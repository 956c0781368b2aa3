#ifndef CATLEP_PARAMS_HPP
#define CATLEP_PARAMS_HPP

// Physical parameters of the driven-dissipative oscillator and the derived
// cat-qubit manifold. All rates are expressed in units of the engineered
// two-photon loss rate kappa2 unless a caller keeps absolute units on purpose.

#include <array>
#include <cmath>
#include <complex>
#include <string>

#include "catlep/detail/math.hpp"
#include "catlep/error.hpp"

namespace catlep {

template <class Real = double>
struct BasicSystemParams {
  Real kappa{0};     ///< single-photon loss rate
  Real kappa2{1};    ///< engineered two-photon loss rate
  Real eps{0};       ///< single-photon drive strength (real)
  Real delta{0};     ///< detuning of the single-photon drive
  Real eps2_mag{0};  ///< two-photon drive magnitude |eps2|
  Real theta{0};     ///< two-photon drive phase, eps2 = |eps2| exp(-i theta), in [0, 2pi)

  /// Checked constructor: validates the invariants and reduces theta modulo 2pi.
  static BasicSystemParams make(Real kappa, Real kappa2, Real eps, Real delta, Real eps2_mag,
                                Real theta) {
    BasicSystemParams p{kappa, kappa2, eps, delta, eps2_mag, theta};
    p.validate();
    p.theta = detail::reduce_angle(p.theta);
    return p;
  }

  /// Build from absolute rates (any common unit, e.g. Hz); divides through by kappa2.
  static BasicSystemParams from_absolute(Real kappa, Real kappa2, Real eps, Real delta,
                                         Real eps2_mag, Real theta) {
    if (!(kappa2 > Real(0))) {
      throw Error(Errc::invalid_argument, "kappa2 must be positive");
    }
    return make(kappa / kappa2, Real(1), eps / kappa2, delta / kappa2, eps2_mag / kappa2, theta);
  }

  void validate() const {
    auto finite = [](const Real& x) {
      using std::isfinite;
      return static_cast<bool>(isfinite(x));
    };
    if (!finite(kappa) || !finite(kappa2) || !finite(eps) || !finite(delta) ||
        !finite(eps2_mag) || !finite(theta)) {
      throw Error(Errc::invalid_argument, "parameters must be finite");
    }
    if (!(kappa2 > Real(0))) throw Error(Errc::invalid_argument, "kappa2 must be positive");
    if (kappa < Real(0)) throw Error(Errc::invalid_argument, "kappa must be non-negative");
    if (eps < Real(0)) throw Error(Errc::invalid_argument, "eps must be non-negative");
    if (eps2_mag < Real(0)) throw Error(Errc::invalid_argument, "eps2_mag must be non-negative");
  }

  /// Same parameters with the drive point (eps, delta) replaced.
  BasicSystemParams at(Real eps_new, Real delta_new) const {
    BasicSystemParams p = *this;
    p.eps = eps_new;
    p.delta = delta_new;
    return p;
  }

  std::complex<Real> eps2() const {
    using std::cos;
    using std::sin;
    return {eps2_mag * cos(theta), -eps2_mag * sin(theta)};
  }

  template <class Other>
  BasicSystemParams<Other> cast() const {
    return {Other(kappa), Other(kappa2), Other(eps), Other(delta), Other(eps2_mag), Other(theta)};
  }
};

using SystemParams = BasicSystemParams<double>;

/// p^{-j} + p^{j} (sign > 0) or p^{-j} - p^{j} (sign < 0).
///
/// The difference is evaluated as p^{-j} (1 - p^{2j}) with 1 - p^{2j} taken
/// from expm1, so it keeps full relative accuracy as p -> 1.
template <class Real>
inline Real p_combination(const Real& p, int j, int sign) {
  using std::log;
  using std::pow;
  if (!(p > Real(0)) || p > Real(1)) {
    throw Error(Errc::invalid_argument, "p_combination requires 0 < p <= 1");
  }
  if (j <= 0) throw Error(Errc::invalid_argument, "p_combination requires j > 0");
  const Real inv = pow(p, -j);
  if (sign >= 0) return inv + pow(p, j);
  return -inv * detail::real_expm1(Real(2 * j) * log(p));
}

template <class Real = double>
struct BasicCatManifold {
  std::complex<Real> alpha;
  Real alpha_mag{0};
  Real phi_alpha{0};
  Real p{0};
  /// log p, kept separately so that 1 - p^k stays accurate for large |alpha|.
  Real log_p{0};
  /// p_j^{+} and p_j^{-} for j = 2, 4, 6.
  std::array<Real, 3> p_plus{};
  std::array<Real, 3> p_minus{};

  Real pp(int j) const { return p_plus.at(index(j)); }
  Real pm(int j) const { return p_minus.at(index(j)); }

  /// 1 - p^{2k}, accurate near p = 1.
  Real one_minus_p_pow(int two_k) const {
    return -detail::real_expm1(Real(two_k) * log_p);
  }

 private:
  static std::size_t index(int j) {
    if (j != 2 && j != 4 && j != 6) {
      throw Error(Errc::invalid_argument, "p combinations are tabulated for j = 2, 4, 6");
    }
    return static_cast<std::size_t>(j / 2 - 1);
  }
};

using CatManifold = BasicCatManifold<double>;

/// Manifold for a given cat amplitude magnitude and drive phase.
template <class Real>
inline BasicCatManifold<Real> cat_manifold_from_amplitude(const Real& alpha_mag, const Real& theta) {
  using std::cos;
  using std::exp;
  using std::log;
  using std::pow;
  using std::sin;
  using std::sqrt;
  if (!(alpha_mag > Real(0))) {
    throw Error(Errc::degenerate_manifold, "cat amplitude must be positive (alpha = 0 is degenerate)");
  }
  BasicCatManifold<Real> m;
  m.alpha_mag = alpha_mag;
  m.phi_alpha = Real(3) * detail::pi<Real>() / Real(4) - detail::reduce_angle(theta) / Real(2);
  m.alpha = std::complex<Real>(alpha_mag * cos(m.phi_alpha), alpha_mag * sin(m.phi_alpha));
  // p^2 = (1 - e^{-2|a|^2}) / (1 + e^{-2|a|^2}) = tanh(|a|^2)
  const Real x = alpha_mag * alpha_mag;
  const Real e = exp(Real(-2) * x);
  m.log_p = detail::real_log1p(Real(-2) * e / (Real(1) + e)) / Real(2);
  m.p = exp(m.log_p);
  for (int j = 2, k = 0; j <= 6; j += 2, ++k) {
    const Real inv = exp(-Real(j) * m.log_p);
    m.p_plus[k] = inv + exp(Real(j) * m.log_p);
    m.p_minus[k] = -inv * detail::real_expm1(Real(2 * j) * m.log_p);
  }
  return m;
}

template <class Real>
inline BasicCatManifold<Real> derive_cat_manifold(const BasicSystemParams<Real>& params) {
  using std::sqrt;
  params.validate();
  if (!(params.eps2_mag > Real(0))) {
    throw Error(Errc::degenerate_manifold, "eps2_mag = 0 gives alpha = 0; p is undefined");
  }
  return cat_manifold_from_amplitude<Real>(sqrt(Real(2) * params.eps2_mag / params.kappa2),
                                           params.theta);
}

/// Replaces p by 1/p (relabels the two cat states). Used to check the p <-> 1/p symmetry.
template <class Real>
inline BasicCatManifold<Real> with_inverted_p(BasicCatManifold<Real> m) {
  using std::exp;
  m.log_p = -m.log_p;
  m.p = exp(m.log_p);
  for (auto& v : m.p_minus) v = -v;
  return m;
}

/// kappa_conf = 4 |alpha|^2 kappa2.
template <class Real>
inline Real confinement_rate(const BasicSystemParams<Real>& params,
                             const BasicCatManifold<Real>& manifold) {
  return Real(4) * manifold.alpha_mag * manifold.alpha_mag * params.kappa2;
}

struct AdiabaticElimination {
  std::complex<double> eps2;
  double kappa2{0};
  bool regime_ok{false};
};

/// Effective two-photon drive and loss after eliminating a lossy buffer mode
/// coupled through g2 (a^2 b^dag + h.c.) and driven with amplitude eps_d.
inline AdiabaticElimination adiabatic_elimination(double g2, std::complex<double> eps_d,
                                                  double kappa_b, double alpha_mag_hint) {
  if (!(g2 > 0.0)) throw Error(Errc::invalid_argument, "g2 must be positive");
  if (!(kappa_b > 0.0)) throw Error(Errc::invalid_argument, "kappa_b must be positive");
  if (alpha_mag_hint < 0.0) throw Error(Errc::invalid_argument, "alpha hint must be non-negative");
  AdiabaticElimination out;
  out.eps2 = std::complex<double>(0.0, -2.0) * g2 * eps_d / kappa_b;
  out.kappa2 = 4.0 * g2 * g2 / kappa_b;
  out.regime_ok = kappa_b >= 8.0 * g2 * alpha_mag_hint;
  return out;
}

}  // namespace catlep

#endif  // CATLEP_PARAMS_HPP
