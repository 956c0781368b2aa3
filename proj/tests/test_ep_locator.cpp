#include <gtest/gtest.h>

#include "catlep/ep_locator.hpp"

using namespace catlep;

namespace {

constexpr double kKappa = 6.48e-3;

SystemParams reference_params(double theta = 1.5 * M_PI) {
  return SystemParams::make(kKappa, 1.0, 0.0, 0.0, 0.93, theta);
}

double nonzero_spread(const Spectrum& s) {
  return std::max({std::abs(s.e[1] - s.e[2]), std::abs(s.e[1] - s.e[3]), std::abs(s.e[2] - s.e[3])});
}

}  // namespace

TEST(Lep2ZeroDrive, ReferenceValue) {
  const auto p = SystemParams::make(1.0, 1.0, 0.0, 0.0, 0.93, 1.5 * M_PI);
  const auto m = derive_cat_manifold(p);
  EXPECT_NEAR(lep2_zero_drive(p, m), 10.31, 5e-3);
  EXPECT_NEAR(lep2_zero_drive(p, m), 1.0 / 0.0969928, 1e-4);
}

TEST(Lep2ZeroDrive, HermitianLimit) {
  const auto p = SystemParams::make(0.0, 1.0, 0.0, 0.0, 0.93, 0.0);
  EXPECT_EQ(lep2_zero_drive(p, derive_cat_manifold(p)), 0.0);
}

TEST(Lep2ZeroDrive, DivergentAtPEqualOne) {
  const auto p = SystemParams::make(1.0, 1.0, 0.0, 0.0, 400.0, 0.0);
  const auto m = derive_cat_manifold(p);
  ASSERT_EQ(m.p, 1.0);
  try {
    lep2_zero_drive(p, m);
    FAIL() << "expected divergence";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::divergent);
  }
}

TEST(Lep2ZeroDrive, CoherencePairCoalesces) {
  for (int k = 0; k < 8; ++k) {
    const double theta = k * M_PI / 4.0;
    const auto p = reference_params(theta);
    const auto m = derive_cat_manifold(p);
    const double d = lep2_zero_drive(p, m);
    EXPECT_NEAR(d, lep2_zero_drive(reference_params(), derive_cat_manifold(reference_params())),
                1e-15);
    const auto s = closed_form_spectrum(p.at(0.0, d), m);
    // R1 vanishes at the coalescence; compare with its size slightly off.
    const auto at = resultants(s);
    const auto off = resultants(closed_form_spectrum(p.at(0.0, 1.01 * d), m));
    EXPECT_LT(std::abs(at.r1), 1e-8 * std::abs(off.r1));
    const auto n = numeric_spectrum(build_matrix(p.at(0.0, d), m));
    EXPECT_LT(n.min_eigvec_angle, 1e-3);
  }
}

TEST(Lep3Locus, ReferencePoint) {
  const auto m = cat_manifold_from_amplitude(std::sqrt(1.86), 1.5 * M_PI);
  const auto loc = lep3_locus(m, 1.5 * M_PI, kKappa);
  ASSERT_TRUE(loc.exists);
  EXPECT_NEAR(loc.eps_abs, 8.51392e-4, 1e-9);
  EXPECT_NEAR(loc.delta_abs, 0.0727432, 1e-7);
  EXPECT_NEAR(loc.eps_abs / kKappa, 0.131, 1e-3);
  EXPECT_NEAR(loc.delta_abs / kKappa, 11.2, 0.05);
}

TEST(Lep3Locus, RequiresPositiveKappa) {
  const auto m = cat_manifold_from_amplitude(1.0, 0.0);
  EXPECT_THROW(lep3_locus(m, 0.0, 0.0), Error);
}

TEST(Lep3Locus, TripleCoalescenceOnTheLocus) {
  for (double theta : {0.0, 0.7, 1.25 * M_PI, 1.5 * M_PI, 5.9}) {
    for (double e2 : {0.4, 0.93, 1.7}) {
      const auto p = SystemParams::make(kKappa, 1.0, 0.0, 0.0, e2, theta);
      const auto m = derive_cat_manifold(p);
      const auto loc = lep3_locus(m, p.theta, kKappa);
      ASSERT_TRUE(loc.exists);
      // eps enters only through eps^2, so the two delta signs cover all four LEP3s.
      for (double sd : {-1.0, 1.0}) {
        const auto at = p.at(loc.eps_abs, sd * loc.delta_abs);
        // Double precision resolves a triple root only to about cbrt(eps) relative,
        // so compare with the splitting one percent off the locus.
        const double spread = nonzero_spread(closed_form_spectrum(at, m));
        const double off = nonzero_spread(closed_form_spectrum(p.at(1.01 * loc.eps_abs, sd * loc.delta_abs), m));
        EXPECT_LT(spread, 2e-3 * kKappa) << theta << " " << e2;
        EXPECT_LT(spread, 0.05 * off) << theta << " " << e2;
        EXPECT_LT(numeric_spectrum(build_matrix(at, m)).min_eigvec_angle, 1e-2);
      }
    }
  }
}

TEST(Lep3Locus, NonExistenceAtHalfPi) {
  const auto m = cat_manifold_from_amplitude(std::sqrt(1.86), 0.5 * M_PI);
  EXPECT_FALSE(lep3_locus(m, 0.5 * M_PI, kKappa).exists);
  // Large amplitude drives D_theta to zero.
  const auto big = cat_manifold_from_amplitude(6.0, 0.5 * M_PI);
  const auto loc = lep3_locus(big, 0.5 * M_PI, kKappa);
  EXPECT_FALSE(loc.exists);
  EXPECT_LE(loc.d_theta, kDivergenceThreshold);
}

TEST(Lep3Locus, EpsDivergesApproachingHalfPi) {
  const auto m0 = cat_manifold_from_amplitude(std::sqrt(1.86), 0.0);
  double prev = 0.0;
  for (double off : {0.3, 0.1, 0.03, 0.02}) {
    const double theta = 0.5 * M_PI - off;
    const auto loc = lep3_locus(cat_manifold_from_amplitude(std::sqrt(1.86), theta), theta, kKappa);
    ASSERT_TRUE(loc.exists);
    EXPECT_GT(loc.eps_abs, prev);
    prev = loc.eps_abs;
  }
  EXPECT_GT(prev, 50.0 * lep3_locus(m0, 1.5 * M_PI, kKappa).eps_abs);
}

TEST(Lep3Locus, TwoPiPeriodic) {
  for (int k = 0; k < 64; ++k) {
    const double theta = 2.0 * M_PI * k / 64.0;
    const auto m = cat_manifold_from_amplitude(1.2, theta);
    const auto a = lep3_locus(m, theta, kKappa);
    const auto b = lep3_locus(cat_manifold_from_amplitude(1.2, theta + 2.0 * M_PI),
                              theta + 2.0 * M_PI, kKappa);
    EXPECT_EQ(a.exists, b.exists);
    if (a.exists) {
      EXPECT_NEAR(a.eps_abs, b.eps_abs, 1e-12 * a.eps_abs);
      EXPECT_NEAR(a.delta_abs, b.delta_abs, 1e-12 * a.delta_abs);
    }
  }
}

TEST(Lep3RealAlpha, AgreesWithGeneralLocus) {
  for (int k = 0; k < 60; ++k) {
    const double p_target = 0.3 + (0.999 - 0.3) * k / 59.0;
    // Invert p^2 = tanh(|alpha|^2).
    const double a = std::sqrt(std::atanh(p_target * p_target));
    const auto m = cat_manifold_from_amplitude(a, 1.5 * M_PI);
    const auto general = lep3_locus(m, 1.5 * M_PI, kKappa);
    const auto special = lep3_real_alpha(m, kKappa);
    ASSERT_TRUE(general.exists);
    EXPECT_NEAR(special.eps_abs / general.eps_abs, 1.0, 1e-12) << "p = " << m.p;
    EXPECT_NEAR(special.delta_abs / general.delta_abs, 1.0, 1e-12) << "p = " << m.p;
  }
}

TEST(Lep3RealAlpha, DivergentAtPEqualOne) {
  const auto m = cat_manifold_from_amplitude(30.0, 1.5 * M_PI);
  EXPECT_THROW(lep3_real_alpha(m, kKappa), Error);
}

TEST(RefineLep3, StaysOnAnalyticPoint) {
  const auto ctx = PlaneContext::from(reference_params());
  const auto loc = lep3_locus(ctx.manifold, 1.5 * M_PI, kKappa);
  for (double se : {-1.0, 1.0}) {
    for (double sd : {-1.0, 1.0}) {
      const auto r = refine_lep3(se * loc.eps_abs, sd * loc.delta_abs, ctx);
      EXPECT_TRUE(r.converged) << r.diagnostic;
      EXPECT_LT(r.residual, 1e-8);
      EXPECT_NEAR(r.eps, se * loc.eps_abs, 1e-6 * loc.eps_abs);
      EXPECT_NEAR(r.delta, sd * loc.delta_abs, 1e-6 * loc.delta_abs);
      EXPECT_EQ(r.eps_sign, static_cast<int>(se));
      EXPECT_EQ(r.delta_sign, static_cast<int>(sd));
    }
  }
}

TEST(RefineLep3, ConvergesFromPerturbedStart) {
  const auto ctx = PlaneContext::from(reference_params(1.25 * M_PI));
  const auto loc = lep3_locus(ctx.manifold, ctx.base.theta, kKappa);
  const auto r = refine_lep3(0.8 * loc.eps_abs, 1.1 * loc.delta_abs, ctx);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.eps / loc.eps_abs, 1.0, 1e-6);
  EXPECT_NEAR(r.delta / loc.delta_abs, 1.0, 1e-6);
}

TEST(RefineLep3, FarStartIsFlaggedOrLandsOnALocus) {
  const auto ctx = PlaneContext::from(reference_params());
  const auto loc = lep3_locus(ctx.manifold, 1.5 * M_PI, kKappa);
  const auto r = refine_lep3(10.0 * loc.eps_abs, loc.delta_abs, ctx);
  if (r.converged) {
    EXPECT_NEAR(std::abs(r.eps) / loc.eps_abs, 1.0, 1e-6);
    EXPECT_NEAR(std::abs(r.delta) / loc.delta_abs, 1.0, 1e-6);
  } else {
    EXPECT_FALSE(r.diagnostic.empty());
  }
}

TEST(RefineLep3, NoFixedPointAtHalfPi) {
  const auto ctx = PlaneContext::from(reference_params(0.5 * M_PI));
  const auto ref = lep3_locus(cat_manifold_from_amplitude(std::sqrt(1.86), 1.5 * M_PI),
                              1.5 * M_PI, kKappa);
  const auto r = refine_lep3(ref.eps_abs, ref.delta_abs, ctx);
  EXPECT_FALSE(r.converged);
  EXPECT_FALSE(r.diagnostic.empty());
}

TEST(RefineLep3, RejectsAxisStart) {
  const auto ctx = PlaneContext::from(reference_params());
  EXPECT_THROW(refine_lep3(0.0, 0.07, ctx), Error);
  EXPECT_THROW(refine_lep3(1e-3, NAN, ctx), Error);
}

TEST(Lep3Sweep, SelfNormalization) {
  const NormalizationReference ref;
  const auto rows = lep3_sweep({SweepVariable::theta, 1.5 * M_PI, 1.5 * M_PI, 1}, ref, kKappa);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_NEAR(rows[0].eps_norm, 1.0, 1e-14);
  EXPECT_NEAR(rows[0].delta_norm, 1.0, 1e-14);
  const auto e2 = lep3_sweep({SweepVariable::eps2_ratio, 0.93, 0.93, 1}, ref, kKappa);
  EXPECT_NEAR(e2[0].eps_norm, 1.0, 1e-12);
  EXPECT_NEAR(e2[0].delta_norm, 1.0, 1e-12);
}

TEST(Lep3Sweep, PhaseControl) {
  const NormalizationReference ref;
  const auto rows = lep3_sweep({SweepVariable::theta, 0.0, 1.25 * M_PI, 2}, ref, kKappa);
  EXPECT_NEAR(rows[0].eps_norm, 1.41, 0.02);
  EXPECT_NEAR(rows[0].delta_norm, 1.0, 0.02);
  EXPECT_NEAR(rows[1].eps_norm, 1.08, 0.02);
  EXPECT_NEAR(rows[1].delta_norm, 1.0, 0.02);
  const auto half = lep3_sweep({SweepVariable::theta, 0.5 * M_PI, 0.5 * M_PI, 1}, ref, kKappa);
  EXPECT_FALSE(half[0].exists);
  EXPECT_TRUE(std::isnan(half[0].eps_norm));
}

TEST(Lep3Sweep, MonotoneInDriveStrength) {
  const auto rows =
      lep3_sweep({SweepVariable::eps2_ratio, 0.3, 2.0, 171}, NormalizationReference{}, kKappa);
  for (std::size_t k = 1; k < rows.size(); ++k) {
    ASSERT_TRUE(rows[k].exists);
    EXPECT_GT(rows[k].eps_norm, rows[k - 1].eps_norm);
    EXPECT_GT(rows[k].delta_norm, rows[k - 1].delta_norm);
    EXPECT_GT(rows[k].delta_norm / rows[k].eps_norm, rows[k - 1].delta_norm / rows[k - 1].eps_norm);
  }
}

TEST(Lep3Sweep, DeltaDipsNearHalfPi) {
  const auto rows =
      lep3_sweep({SweepVariable::theta, 0.0, 2.0 * M_PI, 721}, NormalizationReference{}, kKappa);
  double min_delta = 1e300;
  double at = 0.0;
  for (const auto& r : rows) {
    if (r.exists && r.delta_norm < min_delta) {
      min_delta = r.delta_norm;
      at = r.value;
    }
  }
  EXPECT_NEAR(at, 0.5 * M_PI, 0.02 * M_PI);
  EXPECT_LT(min_delta, 0.5);
}

TEST(Lep3Sweep, Validation) {
  const NormalizationReference ref;
  EXPECT_THROW(lep3_sweep({SweepVariable::theta, 0.0, 1.0, 0}, ref, kKappa), Error);
  EXPECT_THROW(lep3_sweep({SweepVariable::eps2_ratio, 0.0, 1.0, 10}, ref, kKappa), Error);
  EXPECT_THROW(lep3_sweep({SweepVariable::theta, 0.0, INFINITY, 10}, ref, kKappa), Error);
  const NormalizationReference none{std::sqrt(1.86), 0.5 * M_PI};
  EXPECT_THROW(none.locus(kKappa), Error);
}
