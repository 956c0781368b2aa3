#ifndef CATLEP_LOGICAL_LIOUVILLIAN_HPP
#define CATLEP_LOGICAL_LIOUVILLIAN_HPP

// Liouvillian of the driven cat qubit projected onto span{|C+>, |C->}.
//
// Density matrices are vectorized row-major in the basis
//   (|C+><C+|, |C+><C-|, |C-><C+|, |C-><C-|),
// with the convention a|C+> = alpha p |C->, a|C-> = alpha p^{-1} |C+>.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <array>
#include <cmath>
#include <complex>

#include "catlep/detail/math.hpp"
#include "catlep/error.hpp"
#include "catlep/numeric_spectrum.hpp"
#include "catlep/params.hpp"

namespace catlep {

struct LogicalVector {
  Vector4c v = Vector4c::Zero();

  static LogicalVector cat_plus() { return {Vector4c(1.0, 0.0, 0.0, 0.0)}; }
  static LogicalVector cat_minus() { return {Vector4c(0.0, 0.0, 0.0, 1.0)}; }
  static LogicalVector maximally_mixed() { return {Vector4c(0.5, 0.0, 0.0, 0.5)}; }

  /// From a 2x2 density matrix in the (C+, C-) basis.
  static LogicalVector from_matrix(const Eigen::Matrix2cd& rho) {
    return {Vector4c(rho(0, 0), rho(0, 1), rho(1, 0), rho(1, 1))};
  }

  Eigen::Matrix2cd matrix() const {
    Eigen::Matrix2cd rho;
    rho << v(0), v(1), v(2), v(3);
    return rho;
  }

  cplx trace() const { return v(0) + v(3); }

  /// Largest violation of V2 = conj(V3) and real populations.
  double hermiticity_defect() const {
    return std::max({std::abs(v(1) - std::conj(v(2))), std::abs(v(0).imag()),
                     std::abs(v(3).imag())});
  }

  /// Hermitian, unit trace and positive semidefinite within tol.
  bool is_physical(double tol = 1e-9) const {
    if (hermiticity_defect() > tol) return false;
    if (std::abs(trace() - 1.0) > tol) return false;
    const double a = v(0).real();
    const double d = v(3).real();
    const double det = a * d - std::norm(v(1));
    return a >= -tol && d >= -tol && det >= -tol;
  }
};

struct LogicalLiouvillian {
  Matrix4c m = Matrix4c::Zero();
  SystemParams params;
  CatManifold manifold;

  LogicalVector apply(const LogicalVector& x) const { return {m * x.v}; }
};

/// Entry-by-entry transcription of the projected 4x4 Liouvillian.
inline LogicalLiouvillian build_matrix(const SystemParams& params, const CatManifold& manifold) {
  params.validate();
  const double k = params.kappa;
  const double e = params.eps;
  const double d = params.delta;
  const double a2 = manifold.alpha_mag * manifold.alpha_mag;
  const double p = manifold.p;
  const double p2 = p * p;
  const cplx alpha = manifold.alpha;
  const cplx alpha_c = std::conj(alpha);
  const cplx i{0.0, 1.0};

  // x = i eps (alpha p + alpha* / p), y = i eps (alpha* p + alpha / p)
  const cplx x = i * e * (alpha * p + alpha_c / p);
  const cplx y = i * e * (alpha_c * p + alpha / p);
  const double decay = 0.5 * k * a2 * manifold.pp(2);
  const double shift = d * a2 * manifold.pm(2);

  LogicalLiouvillian out;
  out.params = params;
  out.manifold = manifold;
  auto& m = out.m;
  m << -k * a2 * p2, x, -y, k * a2 / p2,
       y, i * shift - decay, k * a2, -y,
       -x, k * a2, -i * shift - decay, x,
       k * a2 * p2, -x, y, -k * a2 / p2;
  return out;
}

inline LogicalLiouvillian build_matrix(const SystemParams& params) {
  return build_matrix(params, derive_cat_manifold(params));
}

template <class Real = double>
struct BasicSpectrum {
  /// E1 = 0, E2 (real), E3, E4.
  std::array<std::complex<Real>, 4> e{};
  std::complex<Real> eta_plus{};
  std::complex<Real> eta_minus{};
  Real q{0};
  Real m_coef{0};
  /// Common shift -(2/3) kappa |alpha|^2 p_2^+, one third of the trace.
  Real offset{0};
};

using Spectrum = BasicSpectrum<double>;

template <class Real>
struct CubicInvariants {
  Real q{0};
  Real m{0};
};

/// q and m of the depressed cubic x^3 + 3 m x - 2 q whose roots are E_k - offset.
template <class Real>
inline CubicInvariants<Real> cubic_invariants(const BasicSystemParams<Real>& params,
                                              const BasicCatManifold<Real>& manifold) {
  using std::sin;
  const Real a2 = manifold.alpha_mag * manifold.alpha_mag;
  const Real a4 = a2 * a2;
  const Real k = params.kappa;
  const Real k2 = k * k;
  const Real e2 = params.eps * params.eps;
  const Real d2 = params.delta * params.delta;
  const Real s = sin(params.theta);
  const Real p2 = manifold.pp(2);
  const Real p4 = manifold.pp(4);
  const Real p6 = manifold.pp(6);

  CubicInvariants<Real> out;
  out.q = a2 * k / Real(216) *
          (-a4 * (Real(36) * d2 + k2) * p6 + Real(72) * a2 * e2 * p4 +
           (Real(36) * a4 * d2 + Real(33) * a4 * k2 - Real(576) * e2 * a2 * s) * p2 +
           Real(1008) * a2 * e2);
  out.m = (a4 * (Real(12) * d2 - k2) * p4 + Real(48) * a2 * e2 * p2 - Real(96) * e2 * a2 * s -
           a4 * (Real(24) * d2 + Real(14) * k2)) /
          Real(36);
  return out;
}

/// Closed-form eigenvalues through Cardano's formula.
///
/// The cube roots are paired so that eta_+ eta_- = -m and E2 is real. The
/// larger-magnitude root is taken first and the partner is recovered from the
/// pairing constraint, which avoids cancellation in q - sqrt(q^2 + m^3).
template <class Real>
inline BasicSpectrum<Real> closed_form_spectrum(const BasicSystemParams<Real>& params,
                                                const BasicCatManifold<Real>& manifold) {
  using std::atan2;
  using std::cos;
  using std::sqrt;
  using C = std::complex<Real>;
  BasicSpectrum<Real> s;
  const auto inv = cubic_invariants(params, manifold);
  s.q = inv.q;
  s.m_coef = inv.m;
  s.offset = Real(-2) / Real(3) * params.kappa * manifold.alpha_mag * manifold.alpha_mag *
             manifold.pp(2);

  const Real q = inv.q;
  const Real m = inv.m;
  const Real disc = q * q + m * m * m;
  const Real half_sqrt3 = sqrt(Real(3)) / Real(2);
  s.e[0] = C(Real(0), Real(0));

  if (disc >= Real(0)) {
    const Real root = sqrt(disc);
    const Real big = q >= Real(0) ? q + root : q - root;
    const Real eta_big = detail::real_cbrt(big);
    const Real eta_small = eta_big != Real(0) ? -m / eta_big : Real(0);
    const Real ep = q >= Real(0) ? eta_big : eta_small;
    const Real em = q >= Real(0) ? eta_small : eta_big;
    s.eta_plus = C(ep, Real(0));
    s.eta_minus = C(em, Real(0));
    const Real sum = ep + em;
    const Real diff = ep - em;
    s.e[1] = C(s.offset + sum, Real(0));
    s.e[2] = C(s.offset - sum / Real(2), half_sqrt3 * diff);
    s.e[3] = C(s.offset - sum / Real(2), -half_sqrt3 * diff);
  } else {
    // Three real roots: q + i sqrt(-disc) has modulus (-m)^{3/2}.
    const Real r = sqrt(-m);
    const Real phi = atan2(sqrt(-disc), q) / Real(3);
    const Real two_thirds_pi = Real(2) * detail::pi<Real>() / Real(3);
    using std::sin;
    s.eta_plus = C(r * cos(phi), r * sin(phi));
    s.eta_minus = C(r * cos(phi), -r * sin(phi));
    s.e[1] = C(s.offset + Real(2) * r * cos(phi), Real(0));
    s.e[2] = C(s.offset + Real(2) * r * cos(phi + two_thirds_pi), Real(0));
    s.e[3] = C(s.offset + Real(2) * r * cos(phi - two_thirds_pi), Real(0));
  }
  return s;
}

inline Spectrum closed_form_spectrum(const SystemParams& params) {
  return closed_form_spectrum(params, derive_cat_manifold(params));
}

inline NumericSpectrum numeric_spectrum(const LogicalLiouvillian& L) {
  return numeric_spectrum(L.m);
}

/// Time evolution V(t) = sum_k c_k exp(E_k t) V_k. When the eigenvector basis is
/// ill-conditioned (near an exceptional point) the propagator falls back to the
/// matrix exponential of L t, which stays valid at and beyond the EP.
class LogicalPropagator {
 public:
  static constexpr double kConditionThreshold = 1e8;

  enum class Route { eigen_expansion, matrix_exponential };

  explicit LogicalPropagator(const LogicalLiouvillian& L) : m_(L.m) {
    spectrum_ = numeric_spectrum(m_);
    route_ = spectrum_.eigvec_condition > kConditionThreshold ? Route::matrix_exponential
                                                              : Route::eigen_expansion;
    if (route_ == Route::eigen_expansion) {
      for (int k = 0; k < 4; ++k) vecs_.col(k) = spectrum_.right_eigenvectors[k];
      lu_ = vecs_.fullPivLu();
    }
  }

  Route route() const { return route_; }
  double eigvec_condition() const { return spectrum_.eigvec_condition; }
  const NumericSpectrum& spectrum() const { return spectrum_; }

  LogicalVector operator()(const LogicalVector& v0, double t) const {
    if (!(t >= 0.0)) throw Error(Errc::invalid_argument, "propagation time must be >= 0");
    if (!v0.is_physical()) {
      throw Error(Errc::invalid_argument, "initial vector does not encode a physical state");
    }
    if (t == 0.0) return v0;
    if (route_ == Route::matrix_exponential) {
      const Matrix4c lt = m_ * t;
      return {lt.exp() * v0.v};
    }
    const Vector4c c = lu_.solve(v0.v);
    Vector4c out = Vector4c::Zero();
    for (int k = 0; k < 4; ++k) {
      out += c(k) * std::exp(spectrum_.eigenvalues[k] * t) * vecs_.col(k);
    }
    return {out};
  }

 private:
  Matrix4c m_;
  NumericSpectrum spectrum_;
  Route route_{Route::eigen_expansion};
  Matrix4c vecs_ = Matrix4c::Identity();
  Eigen::FullPivLU<Matrix4c> lu_;
};

inline LogicalVector propagate(const LogicalLiouvillian& L, const LogicalVector& v0, double t) {
  return LogicalPropagator(L)(v0, t);
}

/// Unit-trace kernel vector of L. Singular values below 1e-12 ||L|| count as
/// kernel directions; a kernel of dimension other than one is an error.
inline LogicalVector steady_state(const LogicalLiouvillian& L) {
  Eigen::JacobiSVD<Matrix4c> svd(L.m, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double tol = 1e-12 * sv(0);
  int kernel_dim = 0;
  for (int k = 0; k < 4; ++k) {
    if (sv(k) <= tol) ++kernel_dim;
  }
  if (kernel_dim != 1) {
    throw Error(Errc::degenerate_kernel,
                "steady-state kernel has dimension " + std::to_string(kernel_dim));
  }
  Vector4c v = svd.matrixV().col(3);
  const cplx tr = v(0) + v(3);
  if (std::abs(tr) < 1e-300) {
    throw Error(Errc::numerical_failure, "kernel vector is traceless");
  }
  return {v / tr};
}

}  // namespace catlep

#endif  // CATLEP_LOGICAL_LIOUVILLIAN_HPP
