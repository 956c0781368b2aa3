#ifndef CATLEP_DETAIL_MATH_HPP
#define CATLEP_DETAIL_MATH_HPP

// Scalar helpers that work for double and for extended-precision types found
// by argument-dependent lookup (e.g. boost::multiprecision::float128).

#include <cmath>
#include <type_traits>

namespace catlep::detail {

template <class Real>
inline Real pi() {
  using std::atan;
  return Real(4) * atan(Real(1));
}

template <class Real>
inline Real two_pi() {
  return Real(2) * pi<Real>();
}

/// Real cube root with the sign of the argument.
template <class Real>
inline Real real_cbrt(const Real& x) {
  if constexpr (std::is_floating_point_v<Real>) {
    return std::cbrt(x);
  } else {
    using std::abs;
    using std::exp;
    using std::log;
    if (x == Real(0)) return Real(0);
    Real r = exp(log(abs(x)) / Real(3));
    r -= (r * r * r - abs(x)) / (Real(3) * r * r);
    return x < Real(0) ? -r : r;
  }
}

template <class Real>
inline Real square(const Real& x) {
  return x * x;
}

/// expm1 and log1p for builtin types, Kahan's compensated forms otherwise.
template <class Real>
inline Real real_expm1(const Real& x) {
  if constexpr (std::is_floating_point_v<Real>) {
    return std::expm1(x);
  } else {
    using std::exp;
    using std::log;
    const Real u = exp(x);
    if (u == Real(1)) return x;
    const Real um1 = u - Real(1);
    if (um1 == Real(-1)) return Real(-1);
    return um1 * x / log(u);
  }
}

template <class Real>
inline Real real_log1p(const Real& x) {
  if constexpr (std::is_floating_point_v<Real>) {
    return std::log1p(x);
  } else {
    using std::log;
    const Real u = Real(1) + x;
    if (u == Real(1)) return x;
    return log(u) * x / (u - Real(1));
  }
}

/// Reduce an angle into [0, 2pi).
template <class Real>
inline Real reduce_angle(const Real& theta) {
  using std::floor;
  const Real period = two_pi<Real>();
  Real r = theta - period * floor(theta / period);
  if (r >= period) r -= period;
  if (r < Real(0)) r += period;
  return r;
}

}  // namespace catlep::detail

#endif  // CATLEP_DETAIL_MATH_HPP
