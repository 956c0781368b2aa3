#include <gtest/gtest.h>

#include <cmath>

#include "catlep/fock_engine.hpp"
#include "catlep/params.hpp"

using namespace catlep;

namespace {

void expect_errc(Errc code, auto&& fn) {
  try {
    fn();
    ADD_FAILURE() << "expected error " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

}  // namespace

TEST(SystemParams, ReducesThetaModuloTwoPi) {
  const auto p = SystemParams::make(0.0, 1.0, 0.0, 0.0, 1.0, 2.0 * M_PI + 0.25);
  EXPECT_NEAR(p.theta, 0.25, 1e-12);
  const auto q = SystemParams::make(0.0, 1.0, 0.0, 0.0, 1.0, -0.5 * M_PI);
  EXPECT_NEAR(q.theta, 1.5 * M_PI, 1e-12);
}

TEST(SystemParams, RejectsInvalidRates) {
  expect_errc(Errc::invalid_argument, [] { SystemParams::make(-1e-3, 1.0, 0.0, 0.0, 1.0, 0.0); });
  expect_errc(Errc::invalid_argument, [] { SystemParams::make(0.0, 0.0, 0.0, 0.0, 1.0, 0.0); });
  expect_errc(Errc::invalid_argument, [] { SystemParams::make(0.0, 1.0, -0.1, 0.0, 1.0, 0.0); });
  expect_errc(Errc::invalid_argument, [] { SystemParams::make(0.0, 1.0, 0.0, 0.0, -1.0, 0.0); });
  expect_errc(Errc::invalid_argument, [] { SystemParams::make(NAN, 1.0, 0.0, 0.0, 1.0, 0.0); });
}

TEST(SystemParams, AbsoluteUnitsDivideByKappa2) {
  const double k2 = 2.16e6;
  const auto p = SystemParams::from_absolute(14e3, k2, 15e3, 1e4, 2e6, 1.5 * M_PI);
  EXPECT_DOUBLE_EQ(p.kappa2, 1.0);
  EXPECT_NEAR(p.kappa, 14e3 / k2, 1e-18);
  EXPECT_NEAR(p.eps2_mag, 2e6 / k2, 1e-15);
  EXPECT_NEAR(p.delta, 1e4 / k2, 1e-18);
}

TEST(SystemParams, Eps2CarriesNegativePhase) {
  const auto p = SystemParams::make(0.0, 1.0, 0.0, 0.0, 2.0, 0.5 * M_PI);
  EXPECT_NEAR(p.eps2().real(), 0.0, 1e-15);
  EXPECT_NEAR(p.eps2().imag(), -2.0, 1e-15);
}

TEST(CatManifold, ReferencePoint) {
  const auto m = derive_cat_manifold(SystemParams::make(0.0, 1.0, 0.0, 0.0, 0.93, 1.5 * M_PI));
  EXPECT_NEAR(m.alpha_mag, 1.3638182, 1e-6);
  EXPECT_NEAR(m.phi_alpha, 0.0, 1e-15);
  EXPECT_NEAR(m.alpha.imag(), 0.0, 1e-15);
  EXPECT_NEAR(m.p, 0.97605268, 1e-8);
}

TEST(CatManifold, ImaginaryAlphaAtHalfPi) {
  const auto m = derive_cat_manifold(SystemParams::make(0.0, 1.0, 0.0, 0.0, 0.4, 0.5 * M_PI));
  EXPECT_NEAR(m.phi_alpha, 0.5 * M_PI, 1e-15);
  EXPECT_NEAR(m.alpha.real(), 0.0, 1e-15);
}

TEST(CatManifold, ZeroDriveIsDegenerate) {
  expect_errc(Errc::degenerate_manifold, [] {
    derive_cat_manifold(SystemParams::make(0.0, 1.0, 0.0, 0.0, 0.0, 0.0));
  });
}

TEST(CatManifold, AmplitudeIdentity) {
  for (double e2 : {1e-3, 0.2, 0.93, 2.0, 17.5}) {
    for (double k2 : {0.5, 1.0, 3.0}) {
      const auto p = SystemParams::make(0.0, k2, 0.0, 0.0, e2, 0.0);
      const auto m = derive_cat_manifold(p);
      EXPECT_NEAR(m.alpha_mag * m.alpha_mag * k2 / (2.0 * e2), 1.0, 1e-12);
    }
  }
}

TEST(CatManifold, PStrictlyIncreasingOnGrid) {
  double prev = 0.0;
  for (int k = 0; k < 100; ++k) {
    const double a = 0.1 + 3.9 * k / 99.0;
    const auto m = cat_manifold_from_amplitude(a, 0.0);
    EXPECT_GT(m.p, prev) << "at |alpha| = " << a;
    EXPECT_LT(m.p, 1.0);
    prev = m.p;
  }
}

TEST(CatManifold, PhaseRelation) {
  for (int k = 0; k < 32; ++k) {
    const double theta = 2.0 * M_PI * k / 32.0;
    const auto m = cat_manifold_from_amplitude(1.0, theta);
    const double r = std::remainder(m.phi_alpha + theta / 2.0 - 0.75 * M_PI, M_PI);
    EXPECT_NEAR(r, 0.0, 1e-12);
  }
}

TEST(CatManifold, PCombinationsBounds) {
  for (double a : {0.3, 1.0, 1.3638, 2.5, 4.0}) {
    const auto m = cat_manifold_from_amplitude(a, 0.0);
    for (int j : {2, 4, 6}) {
      EXPECT_GE(m.pp(j), 2.0);
      EXPECT_GT(m.pm(j), 0.0);
      EXPECT_NEAR(m.pp(j), std::pow(m.p, -j) + std::pow(m.p, j), 1e-12 * m.pp(j));
    }
  }
}

TEST(CatManifold, PMinusKeepsRelativeAccuracyNearOne) {
  // p^2 = tanh(x) gives p^{-2} - p^2 = 2 / sinh(2x) exactly.
  for (double a : {2.0, 3.0, 4.0, 5.0}) {
    const auto m = cat_manifold_from_amplitude(a, 0.0);
    const double expected = 2.0 / std::sinh(2.0 * a * a);
    EXPECT_NEAR(m.pm(2) / expected, 1.0, 1e-12) << "|alpha| = " << a;
  }
}

TEST(PCombination, SymmetricPoint) {
  EXPECT_DOUBLE_EQ(p_combination(1.0, 2, +1), 2.0);
  EXPECT_DOUBLE_EQ(p_combination(1.0, 2, -1), 0.0);
}

TEST(PCombination, ReferenceValue) {
  EXPECT_NEAR(p_combination(0.97605268, 2, -1), 0.0969928, 1e-7);
}

TEST(PCombination, RejectsOutOfRange) {
  expect_errc(Errc::invalid_argument, [] { p_combination(0.0, 2, 1); });
  expect_errc(Errc::invalid_argument, [] { p_combination(1.2, 2, 1); });
  expect_errc(Errc::invalid_argument, [] { p_combination(0.5, 0, 1); });
}

TEST(ConfinementRate, Values) {
  const auto unit = SystemParams::make(0.0, 1.0, 0.0, 0.0, 0.5, 0.0);
  EXPECT_NEAR(confinement_rate(unit, derive_cat_manifold(unit)), 4.0, 1e-14);
  const auto ref = SystemParams::make(0.0, 1.0, 0.0, 0.0, 0.93, 1.5 * M_PI);
  EXPECT_NEAR(confinement_rate(ref, derive_cat_manifold(ref)), 7.44, 1e-12);
}

TEST(AdiabaticElimination, ZeroDrive) {
  const auto r = adiabatic_elimination(1.0, 0.0, 4.0, 0.0);
  EXPECT_EQ(r.eps2, std::complex<double>(0.0, 0.0));
  EXPECT_DOUBLE_EQ(r.kappa2, 1.0);
}

TEST(AdiabaticElimination, DirectSubstitution) {
  const auto r = adiabatic_elimination(1.0, {0.0, 1.0}, 2.0, 0.0);
  EXPECT_NEAR(r.eps2.real(), 1.0, 1e-15);
  EXPECT_NEAR(r.eps2.imag(), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(r.kappa2, 2.0);
}

TEST(AdiabaticElimination, RegimeFlag) {
  EXPECT_FALSE(adiabatic_elimination(1.0, 0.0, 2.0, 1.0).regime_ok);
  EXPECT_TRUE(adiabatic_elimination(1.0, 0.0, 8.0, 1.0).regime_ok);
  expect_errc(Errc::invalid_argument, [] { adiabatic_elimination(0.0, 0.0, 1.0, 1.0); });
  expect_errc(Errc::invalid_argument, [] { adiabatic_elimination(1.0, 0.0, -1.0, 1.0); });
}

TEST(CatManifold, PMatchesFockOracle) {
  for (int k = 0; k <= 25; ++k) {
    const double a = 0.5 + 2.5 * k / 25.0;
    for (double theta : {0.0, 1.1, 1.5 * M_PI}) {
      const auto m = cat_manifold_from_amplitude(a, theta);
      const int dim = required_dimension(a);
      const VectorXc plus = cat_state(m.alpha, Parity::even, dim);
      const VectorXc minus = cat_state(m.alpha, Parity::odd, dim);
      const MatrixXc op = annihilation(dim).m;
      const cplx ratio = minus.dot(op * plus) / m.alpha;
      EXPECT_NEAR(ratio.real(), m.p, 1e-8) << "|alpha| = " << a;
      EXPECT_NEAR(ratio.imag(), 0.0, 1e-8);
    }
  }
}
