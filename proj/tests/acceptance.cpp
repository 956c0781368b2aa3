// Acceptance suite: one PASS/FAIL line per criterion. Tolerances are fixed here.

#include <boost/math/constants/constants.hpp>
#include <boost/multiprecision/float128.hpp>

#include <chrono>
#include <cstdio>
#include <string>
#include <thread>

#include "catlep/catlep.hpp"

using namespace catlep;
using Quad = boost::multiprecision::float128;

namespace {

constexpr double kKappa = 6.48e-3;
constexpr std::uint64_t kSeed = 2024;
constexpr int kDraws = 10000;

int failures = 0;

void report(int id, const char* title, bool ok, const std::string& detail) {
  std::printf("[%s] %2d %s: %s\n", ok ? "PASS" : "FAIL", id, title, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double scale_of(const std::array<cplx, 4>& e) {
  double s = 0.0;
  for (auto z : e) s = std::max(s, std::abs(z));
  return s;
}

std::array<cplx, 4> conjugated(std::array<cplx, 4> e) {
  for (auto& z : e) z = std::conj(z);
  return e;
}

SystemParams reference_base() { return SystemParams::make(kKappa, 1.0, 0.0, 0.0, 0.93, 1.5 * M_PI); }

void closed_form_vs_numeric() {
  const auto t0 = std::chrono::steady_clock::now();
  ParamSampler draw(kSeed);
  double worst = 0.0;
  for (int k = 0; k < kDraws; ++k) {
    const auto p = draw();
    const auto m = derive_cat_manifold(p);
    const auto cf = closed_form_spectrum(p, m);
    const auto ns = numeric_spectrum(build_matrix(p, m));
    worst = std::max(worst, multiset_distance(cf.e, ns.eigenvalues) / scale_of(cf.e));
  }
  const double dt = seconds_since(t0);
  report(1, "closed form vs numeric spectrum", worst < 1e-10 && dt < 10.0,
         fmt("%d draws, max rel deviation %.2e (< 1e-10), %.2f s (< 10 s)", kDraws, worst, dt));
}

void lep3_reproduction() {
  const auto ctx = PlaneContext::from(reference_base());
  const auto loc = NormalizationReference{}.locus(kKappa);
  const auto r = refine_lep3(loc.eps_abs, loc.delta_abs, ctx);
  const double shift = std::hypot(r.eps / loc.eps_abs - 1.0, r.delta / loc.delta_abs - 1.0);

  // A triple root splits like the cube root of the input error, so the
  // coalescence is measured in quad precision.
  const Quad kappa = Quad("6.48e-3");
  const Quad theta = Quad(3) * boost::math::constants::pi<Quad>() / Quad(2);
  const auto base_q = BasicSystemParams<Quad>::make(kappa, Quad(1), Quad(0), Quad(0), Quad("0.93"), theta);
  const auto man_q = derive_cat_manifold(base_q);
  const auto loc_q = lep3_locus(man_q, theta, kappa);
  const auto s_q = closed_form_spectrum(base_q.at(loc_q.eps_abs, loc_q.delta_abs), man_q);
  Quad spread_q = 0;
  for (int a = 1; a < 4; ++a)
    for (int b = a + 1; b < 4; ++b) spread_q = std::max(spread_q, Quad(abs(s_q.e[a] - s_q.e[b])));
  const double spread = static_cast<double>(spread_q / kappa);

  const auto s = closed_form_spectrum(ctx.base.at(loc.eps_abs, loc.delta_abs), ctx.manifold);
  double spread_d = 0.0;
  for (int a = 1; a < 4; ++a)
    for (int b = a + 1; b < 4; ++b) spread_d = std::max(spread_d, std::abs(s.e[a] - s.e[b]));
  const auto ns = numeric_spectrum(build_matrix(ctx.base.at(loc.eps_abs, loc.delta_abs), ctx.manifold));

  const bool ok = r.converged && r.residual < 1e-8 && shift < 1e-6 && spread < 1e-6;
  report(2, "LEP3 reproduction at the reference point", ok,
         fmt("refined residual %.2e (< 1e-8), shift from analytic %.1e, quad spread %.2e kappa (< 1e-6), "
             "double spread %.1e kappa, min eigenvector angle %.1e",
             r.residual, shift, spread, spread_d / kKappa, ns.min_eigvec_angle));
}

void phase_control() {
  const NormalizationReference ref;
  const auto base = ref.locus(kKappa);
  auto at = [&](double theta) {
    return lep3_locus(cat_manifold_from_amplitude(ref.alpha0_mag, theta), theta, kKappa);
  };
  const auto z = at(0.0);
  const auto f = at(1.25 * M_PI);
  const auto h = at(0.5 * M_PI);
  const double ez = z.eps_abs / base.eps_abs, dz = z.delta_abs / base.delta_abs;
  const double ef = f.eps_abs / base.eps_abs, df = f.delta_abs / base.delta_abs;
  const bool ok = z.exists && f.exists && std::abs(ez - 1.41) <= 0.02 && std::abs(ef - 1.08) <= 0.02 &&
                  std::abs(dz - 1.0) <= 0.02 && std::abs(df - 1.0) <= 0.02 && !h.exists;
  report(3, "phase control of the LEP3", ok,
         fmt("theta=0 (%.4f, %.4f), theta=5pi/4 (%.4f, %.4f), theta=pi/2 %s", ez, dz, ef, df,
             h.exists ? "exists" : "absent"));
}

void winding_numbers() {
  const auto ctx = PlaneContext::from(reference_base());
  const auto loc = NormalizationReference{}.locus(kKappa);
  bool ok = true;
  std::string detail;
  double slowest = 0.0;
  for (double shift : {1.0, 1.5}) {
    detail += shift == 1.0 ? "enclosing loop w =" : "; displaced loop w =";
    for (int n : {64, 256, 1024, 4096}) {
      const LoopSpec loop{shift * loc.eps_abs, loc.delta_abs, 0.4 * loc.eps_abs, 0.4 * loc.delta_abs, n, 1};
      const auto t0 = std::chrono::steady_clock::now();
      const auto w = winding_number(loop, ctx);
      slowest = std::max(slowest, seconds_since(t0));
      const int expected = shift == 1.0 ? 1 : 0;
      ok = ok && w.confidence != WindingConfidence::failed && std::abs(w.w) == expected;
      if (shift == 1.0) ok = ok && w.w == -1;
      detail += fmt(" %d", w.w);
    }
  }
  ok = ok && slowest < 1.0;
  report(4, "winding numbers", ok, detail + fmt(" (samples 64..4096); slowest loop %.3f s (< 1 s)", slowest));
}

void zero_drive_lep2() {
  double worst = 0.0, spread = 0.0, d_first = 0.0;
  for (int k = 0; k < 8; ++k) {
    const double theta = k * M_PI / 4;
    const auto base = SystemParams::make(kKappa, 1.0, 0.0, 0.0, 0.93, theta);
    const auto ctx = PlaneContext::from(base);
    const double d = lep2_zero_drive(base, ctx.manifold);
    // R1 at eps = 0 is proportional to (E3 - E4)^2 and changes sign at the coalescence.
    double lo = 0.5 * d, hi = 1.5 * d;
    const bool lo_sign = ctx.at(0.0, lo).r1 > 0.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * d; ++it) {
      const double mid = 0.5 * (lo + hi);
      ((ctx.at(0.0, mid).r1 > 0.0) == lo_sign ? lo : hi) = mid;
    }
    const double found = 0.5 * (lo + hi);
    worst = std::max(worst, std::abs(found - d) / d);
    if (k == 0) d_first = found;
    spread = std::max(spread, std::abs(found - d_first) / d_first);
  }
  report(5, "zero-drive LEP2", worst < 1e-8 && spread < 1e-8,
         fmt("bisection vs kappa/p2- max rel %.2e (< 1e-8), spread over 8 phases %.2e (< 1e-8)", worst, spread));
}

struct ConservationTally {
  double max_hermiticity{0.0};
  double max_trace{0.0};
  double min_eigenvalue{std::numeric_limits<double>::infinity()};
  double max_parity_drift{0.0};

  void add(const EvolveResult& r) {
    for (std::size_t k = 0; k < r.states.size(); ++k) {
      max_hermiticity = std::max(max_hermiticity, r.records[k].hermiticity_correction);
      max_trace = std::max(max_trace, r.records[k].trace_correction);
      min_eigenvalue = std::min(min_eigenvalue, diagnose(r.states[k]).min_eigenvalue);
    }
  }

  void add(const Fig4Conservation& c) {
    max_hermiticity = std::max(max_hermiticity, c.max_hermiticity_correction);
    max_trace = std::max(max_trace, c.max_trace_correction);
    min_eigenvalue = std::min(min_eigenvalue, c.min_eigenvalue);
  }

  void add_parity(const EvolveResult& r, double expected) {
    for (const auto& s : r.states) max_parity_drift = std::max(max_parity_drift, std::abs(parity_expectation(s) - expected));
  }
};

void fidelity_validation(ConservationTally& tally) {
  Fig4Spec spec;
  spec.threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = validate_fig4(spec);
  const double dt = seconds_since(t0);
  tally.add(r.conservation);
  const bool min_ok = r.min_fidelity >= 0.9917;
  const bool final_ok = 1.0 - r.min_final_fidelity <= 1e-3;
  const bool doubling_ok = r.doubling_change < 1e-6;
  const bool time_ok = dt < 300.0;
  report(6, "projected vs full Lindblad fidelity", min_ok && final_ok && doubling_ok && time_ok,
         fmt("min F %.6f at (Delta/Delta_ref %.2f, kappa2 t %.1f) (>= 0.9917) %s; final-time min F %.6f "
             "(1 - F <= 1e-3) %s; dim %d vs %d change %.2e (< 1e-6) %s; %.0f s (< 300 s) %s",
             r.min_fidelity, r.argmin_delta_norm, r.argmin_t, min_ok ? "ok" : "NOT MET", r.min_final_fidelity,
             final_ok ? "ok" : "NOT MET", r.dim, r.dim_doubled, r.doubling_change, doubling_ok ? "ok" : "NOT MET",
             dt, time_ok ? "ok" : "NOT MET"));
}

void stabilization(ConservationTally& tally) {
  const auto p = SystemParams::make(0.0, 1.0, 0.0, 0.0, 0.93, 1.5 * M_PI);
  const auto man = derive_cat_manifold(p);
  const int dim = required_dimension(man.alpha_mag);
  const double t_end = 20.0 / confinement_rate(p, man);
  std::vector<double> times;
  for (int k = 0; k <= 40; ++k) times.push_back(t_end * k / 40);
  const auto full = build_full_liouvillian(p, dim);
  const CatEmbedding embed(man.alpha, dim);
  const auto even = evolve(full, DensityMatrix::fock(0, dim), times);
  const auto odd = evolve(full, DensityMatrix::fock(1, dim), times);
  tally.add(even);
  tally.add(odd);
  tally.add_parity(even, 1.0);
  tally.add_parity(odd, -1.0);
  const double fe = fidelity(even.states.back(), DensityMatrix::pure(embed.plus()));
  const double fo = fidelity(odd.states.back(), DensityMatrix::pure(embed.minus()));
  report(7, "stabilization onto the cat states", fe > 0.999 && fo > 0.999,
         fmt("t = 20/kappa_conf = %.3f: vacuum -> C+ F %.6f, |1> -> C- F %.6f (> 0.999)", t_end, fe, fo));
}

void conservation(const ConservationTally& t) {
  const bool ok = t.max_trace <= 1e-8 && t.max_hermiticity <= 1e-10 && t.min_eigenvalue >= -1e-8 &&
                  t.max_parity_drift <= 1e-8;
  report(8, "conservation over all acceptance runs", ok,
         fmt("trace correction %.1e (<= 1e-8), Hermiticity correction %.1e (<= 1e-10), min eigenvalue %.1e "
             "(>= -1e-8), parity drift %.1e (<= 1e-8)",
             t.max_trace, t.max_hermiticity, t.min_eigenvalue, t.max_parity_drift));
}

void spectral_symmetry() {
  ParamSampler draw(kSeed);
  double inverted = 0.0, conj = 0.0, max_re = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < kDraws; ++k) {
    const auto p = draw();
    const auto m = derive_cat_manifold(p);
    const auto s = closed_form_spectrum(p, m);
    const double sc = scale_of(s.e);
    const auto flipped = numeric_spectrum(build_matrix(p, with_inverted_p(m)));
    inverted = std::max(inverted, multiset_distance(s.e, flipped.eigenvalues) / sc);
    conj = std::max(conj, multiset_distance(s.e, conjugated(s.e)) / sc);
    for (auto z : s.e) max_re = std::max(max_re, z.real() / sc);
  }
  const bool ok = inverted < 1e-10 && conj < 1e-10 && max_re <= 1e-12;
  report(9, "spectral symmetries", ok,
         fmt("p -> 1/p %.1e (< 1e-10), conjugation closure %.1e (< 1e-10), max Re E / |E| %.1e (<= 1e-12)",
             inverted, conj, max_re));
}

void sweeps() {
  const NormalizationReference ref;
  const auto amp = lep3_sweep({SweepVariable::eps2_ratio, 0.3, 2.0, 171}, ref, kKappa);
  bool monotone = true;
  for (std::size_t k = 1; k < amp.size(); ++k) {
    monotone = monotone && amp[k].exists && amp[k].eps_norm > amp[k - 1].eps_norm &&
               amp[k].delta_norm > amp[k - 1].delta_norm;
  }

  const int per_turn = 2000;
  const auto th = lep3_sweep({SweepVariable::theta, 0.0, 4.0 * M_PI, 2 * per_turn + 1}, ref, kKappa);
  double peak = 0.0, peak_at = 0.0, dip = std::numeric_limits<double>::infinity(), dip_at = 0.0;
  for (int k = 0; k < per_turn; ++k) {
    const auto& r = th[k];
    if (!r.exists) continue;
    if (r.eps_norm > peak) peak = r.eps_norm, peak_at = r.value;
    if (r.delta_norm < dip) dip = r.delta_norm, dip_at = r.value;
  }
  double periodic = 0.0;
  bool same_existence = true;
  for (int k = 0; k <= per_turn; ++k) {
    const auto& a = th[k];
    const auto& b = th[k + per_turn];
    same_existence = same_existence && a.exists == b.exists;
    if (a.exists && b.exists) {
      periodic = std::max(periodic, std::abs(a.eps_norm - b.eps_norm) / a.eps_norm);
      periodic = std::max(periodic, std::abs(a.delta_norm - b.delta_norm) / a.delta_norm);
    }
  }
  const bool peak_ok = peak > 50.0 && std::abs(peak_at - 0.5 * M_PI) < 0.05 * M_PI;
  const bool dip_ok = dip < 0.5 && std::abs(dip_at - 0.5 * M_PI) < 0.05 * M_PI;
  const bool ok = monotone && peak_ok && dip_ok && same_existence && periodic < 1e-12;
  report(10, "LEP3 sweeps", ok,
         fmt("|eps2| in [0.3, 2] monotone %s; theta: max eps_norm %.1f at %.4f pi, min delta_norm %.3f at "
             "%.4f pi, 2pi periodicity %.1e (< 1e-12)",
             monotone ? "yes" : "no", peak, peak_at / M_PI, dip, dip_at / M_PI, periodic));
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  ConservationTally tally;
  try {
    closed_form_vs_numeric();
    lep3_reproduction();
    phase_control();
    winding_numbers();
    zero_drive_lep2();
    fidelity_validation(tally);
    stabilization(tally);
    conservation(tally);
    spectral_symmetry();
    sweeps();
  } catch (const std::exception& e) {
    std::printf("[FAIL] aborted: %s\n", e.what());
    return 1;
  }
  std::printf("%d of 10 criteria failed (%.0f s)\n", failures, seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
