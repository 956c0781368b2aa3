#ifndef CATLEP_EP_LOCATOR_HPP
#define CATLEP_EP_LOCATOR_HPP

// Analytic loci of the Liouvillian exceptional points and their numerical
// verification through the resultant pair.

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "catlep/detail/math.hpp"
#include "catlep/error.hpp"
#include "catlep/params.hpp"
#include "catlep/resultant_topology.hpp"

namespace catlep {

/// |Delta| of the second-order EP on the eps = 0 axis: kappa / p_2^-.
template <class Real>
inline Real lep2_zero_drive(const BasicSystemParams<Real>& params,
                            const BasicCatManifold<Real>& manifold) {
  if (params.kappa == Real(0)) return Real(0);
  if (!(manifold.pm(2) > Real(0))) {
    throw Error(Errc::divergent, "p = 1: the eps = 0 LEP2 moves to infinite detuning");
  }
  return params.kappa / manifold.pm(2);
}

template <class Real = double>
struct BasicLep3Locus {
  Real eps_abs{0};
  Real delta_abs{0};
  Real d_theta{0};
  bool exists{false};
};

using Lep3Locus = BasicLep3Locus<double>;

/// Below this the denominator D_theta is treated as vanishing.
inline constexpr double kDivergenceThreshold = 1e-12;

/// D_theta = (1+p^4)^2 + 4p^4 - 4p^2(1+p^4) sin(theta), evaluated in the
/// equivalent form (1-p^2)^4 + 4p^2(1+p^4)(1 - sin(theta)).
template <class Real>
inline Real lep3_denominator(const BasicCatManifold<Real>& manifold, const Real& theta) {
  using std::sin;
  const Real p2 = manifold.p * manifold.p;
  const Real p4 = p2 * p2;
  const Real omp2 = manifold.one_minus_p_pow(2);
  return omp2 * omp2 * omp2 * omp2 + Real(4) * p2 * (Real(1) + p4) * (Real(1) - sin(theta));
}

/// Third-order EP (triple coalescence of the nonzero eigenvalues) at drive
/// phase theta. Returns |eps| and |Delta|; the LEP3s sit at (+-eps, +-Delta).
template <class Real>
inline BasicLep3Locus<Real> lep3_locus(const BasicCatManifold<Real>& manifold, const Real& theta,
                                       const Real& kappa) {
  using std::sin;
  using std::sqrt;
  if (!(kappa > Real(0))) throw Error(Errc::invalid_argument, "lep3_locus requires kappa > 0");
  BasicLep3Locus<Real> out;
  const Real p2 = manifold.p * manifold.p;
  const Real p4 = p2 * p2;
  const Real p8 = p4 * p4;
  const Real p12 = p8 * p4;
  const Real p16 = p8 * p8;
  const Real a2 = manifold.alpha_mag * manifold.alpha_mag;
  const Real s = sin(theta);
  const Real d = lep3_denominator(manifold, theta);
  out.d_theta = d;
  const Real omp4 = manifold.one_minus_p_pow(4);
  if (!(d > Real(kDivergenceThreshold)) || omp4 == Real(0)) {
    out.exists = false;
    return out;
  }
  const Real one_p4 = Real(1) + p4;
  const Real eps2 = one_p4 * one_p4 * one_p4 * kappa * kappa * a2 / (Real(54) * p2 * d);
  const Real bracket = (Real(1) + Real(148) * p4 + Real(726) * p8 + Real(148) * p12 + p16) -
                       Real(4) * p2 * one_p4 * (Real(5) + Real(118) * p4 + Real(5) * p8) * s;
  const Real delta2 = kappa * kappa / (Real(108) * omp4 * omp4 * d) * bracket;
  if (delta2 < Real(0) || eps2 < Real(0)) {
    out.exists = false;
    return out;
  }
  out.eps_abs = sqrt(eps2);
  out.delta_abs = sqrt(delta2);
  out.exists = true;
  return out;
}

template <class Real = double>
struct BasicLep3Point {
  Real eps_abs{0};
  Real delta_abs{0};
};

/// Simplified locus for real alpha (theta = 3pi/2).
template <class Real>
inline BasicLep3Point<Real> lep3_real_alpha(const BasicCatManifold<Real>& manifold,
                                            const Real& kappa) {
  using std::abs;
  using std::sqrt;
  const Real omp2 = manifold.one_minus_p_pow(2);
  if (omp2 == Real(0)) {
    throw Error(Errc::divergent, "p = 1: the real-alpha LEP3 detuning is singular");
  }
  const Real p = manifold.p;
  const Real p2 = p * p;
  const Real p4 = p2 * p2;
  const Real opp2 = Real(1) + p2;
  const Real a = Real(1) + p4;
  const Real b = p4 + Real(6) * p2 + Real(1);
  BasicLep3Point<Real> out;
  out.eps_abs = sqrt(Real(6)) * kappa * manifold.alpha_mag * a * sqrt(a) /
                (Real(18) * p * opp2 * opp2);
  // (p^2 - 1) < 0 for p < 1; the magnitude is returned.
  out.delta_abs = abs(sqrt(Real(3)) * kappa * b * sqrt(b) / (Real(18) * omp2 * opp2 * opp2));
  return out;
}

struct Lep3Refinement {
  double eps{0.0};
  double delta{0.0};
  /// max(|R1| / s1, |R2| / s2) with s1, s2 the largest |R1|, |R2| on a ring of
  /// radius 0.4 (|eps0|, |delta0|) around the initial point.
  double residual{std::numeric_limits<double>::infinity()};
  int iterations{0};
  bool converged{false};
  int eps_sign{0};
  int delta_sign{0};
  std::string diagnostic;
};

namespace detail {

struct ResultantScale {
  double r1{1.0};
  double r2{1.0};
};

inline ResultantScale ring_scale(const PlaneContext& ctx, double eps0, double delta0) {
  ResultantScale s{0.0, 0.0};
  LoopSpec ring{eps0, delta0, 0.4 * std::abs(eps0), 0.4 * std::abs(delta0), 64, 1};
  for (int k = 0; k < ring.samples; ++k) {
    const Point2 pt = ring.point(detail::two_pi<double>() * k / ring.samples);
    const auto r = ctx.at(pt.x, pt.y);
    s.r1 = std::max(s.r1, std::abs(r.r1));
    s.r2 = std::max(s.r2, std::abs(r.r2));
  }
  if (!(s.r1 > 0.0)) s.r1 = 1.0;
  if (!(s.r2 > 0.0)) s.r2 = 1.0;
  return s;
}

}  // namespace detail

/// Damped Newton iteration driving (R1, R2) to zero.
///
/// R1 vanishes to second order at a third-order EP, so the raw Jacobian of
/// (R1, R2) is singular there. The iteration runs on the invertible
/// reparametrization (q, m) = (R2 / 432, cbrt(R1 / 108 - q^2)) of the same
/// pair, with a central finite-difference Jacobian and step halving until the
/// residual decreases.
inline Lep3Refinement refine_lep3(double eps0, double delta0, const PlaneContext& ctx,
                                  int max_iterations = 100) {
  Lep3Refinement out;
  if (!std::isfinite(eps0) || !std::isfinite(delta0) || eps0 == 0.0 || delta0 == 0.0) {
    throw Error(Errc::invalid_argument, "refine_lep3 needs a finite, off-axis starting point");
  }
  const auto scale = detail::ring_scale(ctx, eps0, delta0);
  const double se = std::abs(eps0);
  const double sd = std::abs(delta0);
  const double q_scale = scale.r2 / 432.0;
  const double m_scale = std::cbrt(scale.r1 / 108.0);

  auto residual_of = [&](double e, double d) {
    const auto r = ctx.at(e, d);
    return std::max(std::abs(r.r1) / scale.r1, std::abs(r.r2) / scale.r2);
  };
  auto map = [&](double u, double v) {
    const auto r = ctx.at(u * se, v * sd);
    const double q = r.r2 / 432.0;
    const double m = std::cbrt(r.r1 / 108.0 - q * q);
    return Eigen::Vector2d(q / q_scale, m / m_scale);
  };

  constexpr double kTarget = 1e-13;
  constexpr double kFd = 1e-7;
  double u = eps0 / se;
  double v = delta0 / sd;
  Eigen::Vector2d f = map(u, v);
  out.residual = residual_of(u * se, v * sd);

  int it = 0;
  for (; it < max_iterations && out.residual > kTarget; ++it) {
    Eigen::Matrix2d jac;
    jac.col(0) = (map(u + kFd, v) - map(u - kFd, v)) / (2.0 * kFd);
    jac.col(1) = (map(u, v + kFd) - map(u, v - kFd)) / (2.0 * kFd);
    const double det = jac.determinant();
    if (!std::isfinite(det) || std::abs(det) < 1e-300) {
      out.diagnostic = "singular Jacobian";
      break;
    }
    const Eigen::Vector2d step = -jac.partialPivLu().solve(f);
    double lambda = 1.0;
    bool accepted = false;
    for (int halving = 0; halving < 40; ++halving, lambda *= 0.5) {
      const double un = u + lambda * step(0);
      const double vn = v + lambda * step(1);
      const Eigen::Vector2d fn = map(un, vn);
      if (fn.allFinite() && fn.norm() < f.norm()) {
        u = un;
        v = vn;
        f = fn;
        accepted = true;
        break;
      }
    }
    out.residual = residual_of(u * se, v * sd);
    if (!accepted) {
      out.diagnostic = "line search stalled";
      ++it;
      break;
    }
    if (lambda * step.norm() < 1e-15) {
      ++it;
      break;
    }
  }

  out.iterations = it;
  out.eps = u * se;
  out.delta = v * sd;
  out.eps_sign = out.eps > 0.0 ? 1 : (out.eps < 0.0 ? -1 : 0);
  out.delta_sign = out.delta > 0.0 ? 1 : (out.delta < 0.0 ? -1 : 0);
  out.converged = out.residual <= 1e-8;
  if (!out.converged && out.diagnostic.empty()) {
    out.diagnostic = "no convergence after " + std::to_string(it) + " iterations";
  }
  return out;
}

/// Normalization reference for LEP3 coordinates: the locus at (|alpha0|, theta0).
struct NormalizationReference {
  double alpha0_mag{std::sqrt(2.0 * 0.93)};
  double theta0{1.5 * M_PI};

  Lep3Locus locus(double kappa) const {
    const auto m = cat_manifold_from_amplitude(alpha0_mag, theta0);
    auto loc = lep3_locus(m, theta0, kappa);
    if (!loc.exists) {
      throw Error(Errc::invalid_argument, "no LEP3 exists at the normalization reference");
    }
    return loc;
  }
};

enum class SweepVariable { theta, eps2_ratio };

struct SweepSpec {
  SweepVariable variable{SweepVariable::theta};
  double from{0.0};
  double to{2.0 * M_PI};
  int count{721};

  void validate() const {
    if (count < 1) throw Error(Errc::invalid_argument, "sweep count must be >= 1");
    if (!std::isfinite(from) || !std::isfinite(to)) {
      throw Error(Errc::invalid_argument, "sweep range must be finite");
    }
    if (variable == SweepVariable::eps2_ratio && !(std::min(from, to) > 0.0)) {
      throw Error(Errc::invalid_argument, "|eps2|/kappa2 sweep must stay positive");
    }
  }
};

struct SweepRow {
  double value{0.0};
  double eps_abs{0.0};
  double delta_abs{0.0};
  double eps_norm{0.0};
  double delta_norm{0.0};
  bool exists{false};
};

/// LEP3 coordinates along a sweep of theta (at fixed |alpha0|) or of |eps2|/kappa2
/// (at fixed theta0), normalized to the reference locus.
inline std::vector<SweepRow> lep3_sweep(const SweepSpec& sweep, const NormalizationReference& ref,
                                        double kappa) {
  sweep.validate();
  const auto ref_locus = ref.locus(kappa);
  std::vector<SweepRow> rows;
  rows.reserve(static_cast<std::size_t>(sweep.count));
  for (int k = 0; k < sweep.count; ++k) {
    const double value =
        sweep.count == 1 ? sweep.from : sweep.from + (sweep.to - sweep.from) * k / (sweep.count - 1);
    double alpha_mag = ref.alpha0_mag;
    double theta = ref.theta0;
    if (sweep.variable == SweepVariable::theta) {
      theta = value;
    } else {
      alpha_mag = std::sqrt(2.0 * value);
    }
    const auto m = cat_manifold_from_amplitude(alpha_mag, theta);
    const auto loc = lep3_locus(m, detail::reduce_angle(theta), kappa);
    SweepRow row;
    row.value = value;
    row.exists = loc.exists;
    if (loc.exists) {
      row.eps_abs = loc.eps_abs;
      row.delta_abs = loc.delta_abs;
      row.eps_norm = loc.eps_abs / ref_locus.eps_abs;
      row.delta_norm = loc.delta_abs / ref_locus.delta_abs;
    } else {
      row.eps_abs = row.delta_abs = row.eps_norm = row.delta_norm =
          std::numeric_limits<double>::quiet_NaN();
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace catlep

#endif  // CATLEP_EP_LOCATOR_HPP
