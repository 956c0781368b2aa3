#ifndef CATLEP_TOOLS_APP_HPP
#define CATLEP_TOOLS_APP_HPP

// Command-line front end. Kept in a header so the test suite can drive it
// in-process through run().

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "catlep/catlep.hpp"

namespace catlep::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kIo = 3, kNumerical = 4 };

inline int exit_code_for(Errc code) {
  switch (code) {
    case Errc::invalid_argument:
    case Errc::degenerate_manifold:
    case Errc::insufficient_dimension:
      return kUsage;
    case Errc::io_failure:
      return kIo;
    case Errc::divergent:
    case Errc::degenerate_kernel:
    case Errc::numerical_failure:
      return kNumerical;
  }
  return kNumerical;
}

using json = nlohmann::ordered_json;

/// Shortest round-trip decimal form; '.' separator regardless of locale.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::vector<std::string>& header) { row_strings(header); }

  template <class... Cells>
  void row(const Cells&... cells) {
    bool first = true;
    ((emit(cells, first)), ...);
    text_ += '\n';
  }

  const std::string& str() const { return text_; }

 private:
  void row_strings(const std::vector<std::string>& cells) {
    for (std::size_t k = 0; k < cells.size(); ++k) {
      if (k) text_ += ',';
      text_ += cells[k];
    }
    text_ += '\n';
  }

  void emit(double v, bool& first) { sep(first), text_ += format_number(v); }
  void emit(int v, bool& first) { sep(first), text_ += std::to_string(v); }
  void emit(std::size_t v, bool& first) { sep(first), text_ += std::to_string(v); }
  void emit(bool v, bool& first) { sep(first), text_ += v ? "true" : "false"; }
  void emit(const char* v, bool& first) { sep(first), text_ += v; }
  void emit(const std::string& v, bool& first) { sep(first), text_ += v; }
  void sep(bool& first) {
    if (!first) text_ += ',';
    first = false;
  }

  std::string text_;
};

inline void write_text(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(Errc::io_failure, "cannot open output file '" + path + "'");
  f << text;
  f.flush();
  if (!f) throw Error(Errc::io_failure, "write to '" + path + "' failed");
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

inline json pair(cplx z) { return json::array({z.real(), z.imag()}); }

inline json params_json(const SystemParams& p) {
  return json{{"kappa", p.kappa}, {"kappa2", p.kappa2}, {"eps", p.eps},
              {"delta", p.delta}, {"eps2_mag", p.eps2_mag}, {"theta", p.theta}};
}

/// Parameter values as they arrive from the config file and flags, before
/// normalization to kappa2 = 1.
struct RawParams {
  std::optional<double> kappa, kappa2, eps, delta, eps2_mag, theta;
};

struct RunConfig {
  SystemParams params;
  NormalizationReference reference{};
  std::uint64_t seed{0};
  int threads{1};
};

struct FileConfig {
  bool absolute_hz{false};
  RawParams raw;
  std::optional<NormalizationReference> reference;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

inline FileConfig load_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::io_failure, "cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_argument, "config is not valid JSON: " + std::string(e.what()));
  }
  if (!j.is_object()) throw Error(Errc::invalid_argument, "config must be a JSON object");

  FileConfig cfg;
  if (!j.contains("units")) {
    throw Error(Errc::invalid_argument, "config needs a \"units\" field (normalized | absolute_hz)");
  }
  auto number = [&](const json& v, const std::string& key) {
    if (!v.is_number()) throw Error(Errc::invalid_argument, "config field '" + key + "' must be a number");
    return v.get<double>();
  };
  for (const auto& [key, v] : j.items()) {
    if (key == "units") {
      if (!v.is_string()) throw Error(Errc::invalid_argument, "units must be a string");
      const auto u = v.get<std::string>();
      if (u == "normalized") {
        cfg.absolute_hz = false;
      } else if (u == "absolute_hz") {
        cfg.absolute_hz = true;
      } else {
        throw Error(Errc::invalid_argument, "units must be \"normalized\" or \"absolute_hz\"");
      }
    } else if (key == "kappa") {
      cfg.raw.kappa = number(v, key);
    } else if (key == "kappa2") {
      cfg.raw.kappa2 = number(v, key);
    } else if (key == "eps") {
      cfg.raw.eps = number(v, key);
    } else if (key == "delta") {
      cfg.raw.delta = number(v, key);
    } else if (key == "eps2_mag") {
      cfg.raw.eps2_mag = number(v, key);
    } else if (key == "theta") {
      cfg.raw.theta = number(v, key);
    } else if (key == "reference") {
      if (!v.is_object()) throw Error(Errc::invalid_argument, "reference must be an object");
      NormalizationReference ref;
      for (const auto& [rk, rv] : v.items()) {
        if (rk == "alpha0_mag") {
          ref.alpha0_mag = number(rv, rk);
        } else if (rk == "theta0") {
          ref.theta0 = number(rv, rk);
        } else {
          throw Error(Errc::invalid_argument, "unknown reference field '" + rk + "'");
        }
      }
      cfg.reference = ref;
    } else if (key == "seed") {
      if (!v.is_number_unsigned()) throw Error(Errc::invalid_argument, "seed must be a non-negative integer");
      cfg.seed = v.get<std::uint64_t>();
    } else if (key == "threads") {
      if (!v.is_number_integer()) throw Error(Errc::invalid_argument, "threads must be an integer");
      cfg.threads = v.get<int>();
    } else {
      throw Error(Errc::invalid_argument, "unknown config field '" + key + "'");
    }
  }
  if (cfg.absolute_hz && !cfg.raw.kappa2) {
    throw Error(Errc::invalid_argument, "absolute_hz config must give kappa2");
  }
  if (!cfg.absolute_hz && cfg.raw.kappa2 && *cfg.raw.kappa2 != 1.0) {
    throw Error(Errc::invalid_argument, "normalized config has kappa2 = 1 by definition");
  }
  return cfg;
}

/// Defaults are the validation-figure operating point at zero detuning.
inline SystemParams default_params() {
  return SystemParams::make(6.48e-3, 1.0, 6.94e-3, 0.0, 0.93, 1.5 * M_PI);
}

inline SystemParams resolve_params(const FileConfig* file, const RawParams& flags, bool flags_absolute) {
  SystemParams p = default_params();
  double kappa = p.kappa, eps = p.eps, delta = p.delta, eps2 = p.eps2_mag, theta = p.theta;

  auto apply = [&](const RawParams& raw, double scale) {
    if (raw.kappa) kappa = *raw.kappa / scale;
    if (raw.eps) eps = *raw.eps / scale;
    if (raw.delta) delta = *raw.delta / scale;
    if (raw.eps2_mag) eps2 = *raw.eps2_mag / scale;
    if (raw.theta) theta = *raw.theta;
  };

  std::optional<double> kappa2_hz;
  if (file) {
    if (file->absolute_hz) {
      kappa2_hz = *file->raw.kappa2;
      if (!(*kappa2_hz > 0.0)) throw Error(Errc::invalid_argument, "kappa2 must be positive");
      apply(file->raw, *kappa2_hz);
    } else {
      apply(file->raw, 1.0);
    }
  }
  if (flags_absolute) {
    if (flags.kappa2) kappa2_hz = *flags.kappa2;
    if (!kappa2_hz) {
      throw Error(Errc::invalid_argument, "--absolute-hz needs --kappa2 or an absolute_hz config");
    }
    if (!(*kappa2_hz > 0.0)) throw Error(Errc::invalid_argument, "kappa2 must be positive");
    apply(flags, *kappa2_hz);
  } else {
    if (flags.kappa2) {
      throw Error(Errc::invalid_argument, "--kappa2 is only meaningful with --absolute-hz");
    }
    apply(flags, 1.0);
  }
  return SystemParams::make(kappa, 1.0, eps, delta, eps2, theta);
}

namespace detail {

inline double spectral_scale(const std::array<cplx, 4>& e) {
  double s = 0.0;
  for (auto z : e) s = std::max(s, std::abs(z));
  return s;
}

inline std::array<cplx, 4> conjugated(std::array<cplx, 4> e) {
  for (auto& z : e) z = std::conj(z);
  return e;
}

inline double rel(double num, double scale) { return scale > 0.0 ? num / scale : num; }

}  // namespace detail

struct Common {
  std::string config_path;
  std::string out_path;
  std::string format;
  std::uint64_t seed{0};
  int threads{1};
  bool absolute_hz{false};
  RawParams flags;
};

inline std::string pick_format(const Common& c, const char* fallback) {
  const std::string f = c.format.empty() ? fallback : c.format;
  if (f != "csv" && f != "json") throw Error(Errc::invalid_argument, "--format must be csv or json");
  return f;
}

inline int cmd_spectrum(const RunConfig& cfg, const Common& c, int sweep_samples, std::ostream& out) {
  const auto& p = cfg.params;
  const auto manifold = derive_cat_manifold(p);
  const auto L = build_matrix(p, manifold);
  const auto s = closed_form_spectrum(p, manifold);
  const auto r = resultants(s);
  const double scale = detail::spectral_scale(s.e);
  cplx sum{0.0, 0.0};
  for (auto z : s.e) sum += z;
  const cplx tr = L.m.trace();
  const double trace_check = std::abs(sum - tr) / std::max({std::abs(tr), scale, 1e-300});
  const double conj_check = detail::rel(multiset_distance(s.e, detail::conjugated(s.e)), scale);

  json sweep;
  if (sweep_samples > 0) {
    ParamSampler sampler(cfg.seed);
    double worst = 0.0, worst_conj = 0.0, max_re = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < sweep_samples; ++k) {
      const auto q = sampler();
      const auto m = derive_cat_manifold(q);
      const auto cf = closed_form_spectrum(q, m);
      const auto ns = numeric_spectrum(build_matrix(q, m));
      const double sc = detail::spectral_scale(cf.e);
      worst = std::max(worst, detail::rel(multiset_distance(cf.e, ns.eigenvalues), sc));
      worst_conj = std::max(worst_conj, detail::rel(multiset_distance(cf.e, detail::conjugated(cf.e)), sc));
      for (auto z : cf.e) max_re = std::max(max_re, z.real() / std::max(sc, 1e-300));
    }
    sweep = json{{"seed", cfg.seed},
                 {"samples", sweep_samples},
                 {"max_rel_deviation", worst},
                 {"max_conjugation_defect", worst_conj},
                 {"max_rel_real_part", max_re}};
  }

  if (pick_format(c, "json") == "json") {
    json j{{"params", params_json(p)}};
    json ev = json::array();
    for (auto z : s.e) ev.push_back(pair(z));
    j["eigenvalues"] = ev;
    j["q"] = s.q;
    j["m"] = s.m_coef;
    j["R1"] = r.r1;
    j["R2"] = r.r2;
    j["trace_check"] = trace_check;
    j["conjugation_check"] = conj_check;
    if (sweep_samples > 0) j["sweep"] = sweep;
    write_text(c.out_path, dump(j), out);
  } else {
    CsvWriter w({"quantity", "re", "im"});
    for (int k = 0; k < 4; ++k) w.row("E" + std::to_string(k + 1), s.e[k].real(), s.e[k].imag());
    w.row("q", s.q, 0.0);
    w.row("m", s.m_coef, 0.0);
    w.row("R1", r.r1, 0.0);
    w.row("R2", r.r2, 0.0);
    w.row("trace_check", trace_check, 0.0);
    w.row("conjugation_check", conj_check, 0.0);
    if (sweep_samples > 0) {
      w.row("sweep_max_rel_deviation", sweep["max_rel_deviation"].get<double>(), 0.0);
      w.row("sweep_max_conjugation_defect", sweep["max_conjugation_defect"].get<double>(), 0.0);
      w.row("sweep_max_rel_real_part", sweep["max_rel_real_part"].get<double>(), 0.0);
    }
    write_text(c.out_path, w.str(), out);
  }
  return kOk;
}

struct ContourArgs {
  std::optional<double> eps_lo, eps_hi, delta_lo, delta_hi;
  double window{2.0};
  int eps_count{401};
  int delta_count{401};
};

inline int cmd_contours(const RunConfig& cfg, const Common& c, const ContourArgs& a, std::ostream& out) {
  const auto ref = cfg.reference.locus(cfg.params.kappa);
  if (!(a.window > 0.0)) throw Error(Errc::invalid_argument, "--window must be positive");
  GridSpec grid;
  grid.eps_lo = a.eps_lo.value_or(-a.window * ref.eps_abs);
  grid.eps_hi = a.eps_hi.value_or(a.window * ref.eps_abs);
  grid.delta_lo = a.delta_lo.value_or(-a.window * ref.delta_abs);
  grid.delta_hi = a.delta_hi.value_or(a.window * ref.delta_abs);
  grid.eps_count = a.eps_count;
  grid.delta_count = a.delta_count;
  grid.validate();

  const auto ctx = PlaneContext::from(cfg.params);
  const auto fields = evaluate_grid(grid, ctx);
  const auto r1 = marching_squares(fields.r1);
  const auto r2 = marching_squares(fields.r2);
  // Merge crossings closer than a tenth of a grid cell, in normalized units.
  std::vector<Polyline> r1n = r1, r2n = r2;
  for (auto* set : {&r1n, &r2n}) {
    for (auto& line : *set) {
      for (auto& pt : line.points) {
        pt.x /= ref.eps_abs;
        pt.y /= ref.delta_abs;
      }
    }
  }
  const double cell = std::min((grid.eps_hi - grid.eps_lo) / ref.eps_abs / (grid.eps_count - 1),
                               (grid.delta_hi - grid.delta_lo) / ref.delta_abs / (grid.delta_count - 1));
  const auto crossings = intersections(r1n, r2n, 0.1 * cell);

  if (pick_format(c, "csv") == "csv") {
    CsvWriter w({"contour_id", "which", "eps", "delta"});
    std::size_t id = 0;
    for (const auto* set : {&r1, &r2}) {
      const char* which = set == &r1 ? "R1" : "R2";
      for (const auto& line : *set) {
        for (const auto& pt : line.points) w.row(id, which, pt.x, pt.y);
        if (line.closed && !line.points.empty()) w.row(id, which, line.points.front().x, line.points.front().y);
        ++id;
      }
    }
    write_text(c.out_path, w.str(), out);
  } else {
    json lines = json::array();
    std::size_t id = 0;
    for (const auto* set : {&r1, &r2}) {
      const char* which = set == &r1 ? "R1" : "R2";
      for (const auto& line : *set) {
        json pts = json::array();
        for (const auto& pt : line.points) pts.push_back(json::array({pt.x, pt.y}));
        lines.push_back(json{{"contour_id", id++}, {"which", which}, {"closed", line.closed}, {"points", pts}});
      }
    }
    json xs = json::array();
    for (const auto& pt : crossings) {
      xs.push_back(json{{"eps", pt.x * ref.eps_abs},
                        {"delta", pt.y * ref.delta_abs},
                        {"eps_norm", pt.x},
                        {"delta_norm", pt.y}});
    }
    // Crossings near a cusp of R1 are biased; polish each onto the exact coalescence.
    json refined = json::array();
    std::vector<Point2> seen;
    for (const auto& pt : crossings) {
      Lep3Refinement r;
      try {
        r = refine_lep3(pt.x * ref.eps_abs, pt.y * ref.delta_abs, ctx);
      } catch (const Error&) {
        continue;
      }
      if (!r.converged) continue;
      const Point2 q{r.eps / ref.eps_abs, r.delta / ref.delta_abs};
      const bool dup = std::any_of(seen.begin(), seen.end(), [&](const Point2& s) {
        return std::hypot(s.x - q.x, s.y - q.y) < 1e-6;
      });
      if (dup) continue;
      seen.push_back(q);
      refined.push_back(json{{"eps", r.eps},
                             {"delta", r.delta},
                             {"eps_norm", q.x},
                             {"delta_norm", q.y},
                             {"residual", r.residual}});
    }
    json j{{"params", params_json(cfg.params)},
           {"reference", {{"eps_abs", ref.eps_abs}, {"delta_abs", ref.delta_abs}}},
           {"grid",
            {{"eps_lo", grid.eps_lo}, {"eps_hi", grid.eps_hi}, {"eps_count", grid.eps_count},
             {"delta_lo", grid.delta_lo}, {"delta_hi", grid.delta_hi}, {"delta_count", grid.delta_count}}},
           {"contours", lines},
           {"intersections", xs},
           {"lep3_points", refined}};
    write_text(c.out_path, dump(j), out);
  }
  return kOk;
}

struct WindingArgs {
  std::string preset;
  std::optional<double> center_eps, center_delta, radius_eps, radius_delta;
  int samples{64};
  std::string orientation{"ccw"};
};

inline LoopSpec resolve_loop(const RunConfig& cfg, const WindingArgs& a) {
  const bool custom = a.center_eps || a.center_delta || a.radius_eps || a.radius_delta;
  LoopSpec loop;
  if (custom) {
    if (!a.preset.empty()) throw Error(Errc::invalid_argument, "--loop cannot be combined with explicit loop geometry");
    if (!(a.center_eps && a.center_delta && a.radius_eps && a.radius_delta)) {
      throw Error(Errc::invalid_argument,
                  "custom loops need --center-eps, --center-delta, --radius-eps and --radius-delta");
    }
    loop = {*a.center_eps, *a.center_delta, *a.radius_eps, *a.radius_delta, a.samples, 1};
  } else {
    const auto ref = cfg.reference.locus(cfg.params.kappa);
    const std::string preset = a.preset.empty() ? "enclosing" : a.preset;
    double shift;
    if (preset == "enclosing") {
      shift = 1.0;
    } else if (preset == "displaced") {
      shift = 1.5;
    } else {
      throw Error(Errc::invalid_argument, "--loop must be enclosing or displaced");
    }
    loop = {shift * ref.eps_abs, ref.delta_abs, 0.4 * ref.eps_abs, 0.4 * ref.delta_abs, a.samples, 1};
  }
  if (a.orientation == "ccw") {
    loop.orientation = 1;
  } else if (a.orientation == "cw") {
    loop.orientation = -1;
  } else {
    throw Error(Errc::invalid_argument, "--orientation must be ccw or cw");
  }
  loop.validate();
  return loop;
}

inline int cmd_winding(const RunConfig& cfg, const Common& c, const WindingArgs& a, std::ostream& out) {
  const LoopSpec loop = resolve_loop(cfg, a);
  const auto ctx = PlaneContext::from(cfg.params);
  const auto res = winding_number(loop, ctx);
  const bool failed = res.confidence == WindingConfidence::failed;

  if (pick_format(c, "json") == "json") {
    json j{{"loop",
            {{"center_eps", loop.center_eps}, {"center_delta", loop.center_delta},
             {"radius_eps", loop.radius_eps}, {"radius_delta", loop.radius_delta},
             {"orientation", loop.orientation == 1 ? "ccw" : "cw"}}},
           {"samples_used", res.samples_used},
           {"w", res.w},
           {"min_R_norm", res.min_r_norm},
           {"confidence", to_string(res.confidence)},
           {"fractional", res.fractional}};
    if (!res.diagnostic.empty()) j["diagnostic"] = res.diagnostic;
    write_text(c.out_path, dump(j), out);
  } else {
    LoopSpec traced = loop;
    traced.samples = std::max(loop.samples, res.samples_used);
    CsvWriter w({"phi", "r1_norm", "r2_norm"});
    if (!failed) {
      for (const auto& pt : trajectory(traced, ctx)) w.row(pt.phi, pt.r1n, pt.r2n);
    }
    write_text(c.out_path, w.str(), out);
  }
  if (!c.out_path.empty()) {
    out << "w = " << res.w << " (" << to_string(res.confidence) << ", " << res.samples_used << " samples)\n";
  }
  if (failed) throw Error(Errc::numerical_failure, res.diagnostic);
  return kOk;
}

inline int cmd_lep3(const RunConfig& cfg, const Common& c, std::ostream& out) {
  const auto& p = cfg.params;
  const auto manifold = derive_cat_manifold(p);
  const auto loc = lep3_locus(manifold, p.theta, p.kappa);
  const auto ref = cfg.reference.locus(p.kappa);
  const double lep2 = lep2_zero_drive(p, manifold);

  std::optional<Lep3Refinement> refined;
  double spread = std::numeric_limits<double>::quiet_NaN();
  if (loc.exists) {
    refined = refine_lep3(loc.eps_abs, loc.delta_abs, PlaneContext::from(p));
    const auto s = closed_form_spectrum(p.at(loc.eps_abs, loc.delta_abs), manifold);
    spread = std::max({std::abs(s.e[1] - s.e[2]), std::abs(s.e[1] - s.e[3]), std::abs(s.e[2] - s.e[3])}) / p.kappa;
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double eps_norm = loc.exists ? loc.eps_abs / ref.eps_abs : nan;
  const double delta_norm = loc.exists ? loc.delta_abs / ref.delta_abs : nan;

  if (pick_format(c, "json") == "json") {
    json j{{"params", params_json(p)},
           {"alpha_mag", manifold.alpha_mag},
           {"p", manifold.p},
           {"exists", loc.exists},
           {"d_theta", loc.d_theta},
           {"eps_abs", loc.exists ? loc.eps_abs : nan},
           {"delta_abs", loc.exists ? loc.delta_abs : nan},
           {"eps_norm", eps_norm},
           {"delta_norm", delta_norm},
           {"coalescence_spread_over_kappa", spread},
           {"lep2_zero_drive_delta", lep2}};
    if (refined) {
      j["refined"] = json{{"eps", refined->eps},
                          {"delta", refined->delta},
                          {"residual", refined->residual},
                          {"iterations", refined->iterations},
                          {"converged", refined->converged}};
    }
    write_text(c.out_path, dump(j), out);
  } else {
    CsvWriter w({"theta", "exists", "eps_abs", "delta_abs", "eps_norm", "delta_norm", "d_theta",
                 "refined_eps", "refined_delta", "residual", "converged", "lep2_zero_drive_delta"});
    w.row(p.theta, loc.exists, loc.exists ? loc.eps_abs : nan, loc.exists ? loc.delta_abs : nan, eps_norm,
          delta_norm, loc.d_theta, refined ? refined->eps : nan, refined ? refined->delta : nan,
          refined ? refined->residual : nan, refined ? refined->converged : false, lep2);
    write_text(c.out_path, w.str(), out);
  }
  if (refined && !refined->converged) {
    throw Error(Errc::numerical_failure, "LEP3 refinement failed: " + refined->diagnostic);
  }
  return kOk;
}

struct SweepArgs {
  std::string variable{"theta"};
  std::optional<double> from, to;
  std::optional<int> count;
};

inline int cmd_sweep(const RunConfig& cfg, const Common& c, const SweepArgs& a, std::ostream& out) {
  SweepSpec spec;
  if (a.variable == "theta") {
    spec = {SweepVariable::theta, 0.0, 2.0 * M_PI, 721};
  } else if (a.variable == "eps2") {
    spec = {SweepVariable::eps2_ratio, 0.3, 2.0, 171};
  } else {
    throw Error(Errc::invalid_argument, "--var must be theta or eps2");
  }
  if (a.from) spec.from = *a.from;
  if (a.to) spec.to = *a.to;
  if (a.count) spec.count = *a.count;
  const auto rows = lep3_sweep(spec, cfg.reference, cfg.params.kappa);

  if (pick_format(c, "csv") == "csv") {
    CsvWriter w({"sweep_var", "eps_abs", "delta_abs", "eps_norm", "delta_norm", "exists"});
    for (const auto& r : rows) w.row(r.value, r.eps_abs, r.delta_abs, r.eps_norm, r.delta_norm, r.exists);
    write_text(c.out_path, w.str(), out);
  } else {
    json arr = json::array();
    for (const auto& r : rows) {
      arr.push_back(json{{"sweep_var", r.value},
                         {"eps_abs", r.eps_abs},
                         {"delta_abs", r.delta_abs},
                         {"eps_norm", r.eps_norm},
                         {"delta_norm", r.delta_norm},
                         {"exists", r.exists}});
    }
    json j{{"variable", a.variable}, {"kappa", cfg.params.kappa}, {"rows", arr}};
    write_text(c.out_path, dump(j), out);
  }
  return kOk;
}

struct ValidateArgs {
  double delta_lo{0.0};
  double delta_hi{1.0};
  int delta_count{21};
  double t_hi{20.0};
  int t_count{201};
  int dim{0};
  bool no_doubling{false};
  double rel_tol{1e-9};
  double abs_tol{1e-12};
};

inline json fig4_summary(const Fig4Result& r) {
  return json{{"min_fidelity", r.min_fidelity},
              {"argmin", {{"delta_norm", r.argmin_delta_norm}, {"kappa2_t", r.argmin_t}}},
              {"min_final_fidelity", r.min_final_fidelity},
              {"delta_ref", r.delta_ref},
              {"dim", r.dim},
              {"dim_doubled_check",
               {{"dim", r.dim_doubled},
                {"max_change", r.doubling_change},
                {"ran", r.dim_doubled > 0}}},
              {"conservation",
               {{"max_hermiticity_correction", r.conservation.max_hermiticity_correction},
                {"max_trace_correction", r.conservation.max_trace_correction},
                {"min_eigenvalue", r.conservation.min_eigenvalue}}}};
}

inline int cmd_validate(const RunConfig& cfg, const Common& c, const ValidateArgs& a, std::ostream& out) {
  Fig4Spec spec;
  spec.params = cfg.params;
  spec.reference = cfg.reference;
  spec.delta_norm_lo = a.delta_lo;
  spec.delta_norm_hi = a.delta_hi;
  spec.delta_count = a.delta_count;
  spec.t_hi = a.t_hi;
  spec.t_count = a.t_count;
  spec.dim = a.dim;
  spec.check_doubling = !a.no_doubling;
  spec.threads = cfg.threads;
  spec.evolve.rel_tol = a.rel_tol;
  spec.evolve.abs_tol = a.abs_tol;
  const auto r = validate_fig4(spec);

  if (pick_format(c, "csv") == "csv") {
    CsvWriter w({"delta_norm", "kappa2_t", "fidelity"});
    for (const auto& row : r.rows) w.row(row.delta_norm, row.kappa2_t, row.fidelity);
    write_text(c.out_path, w.str(), out);
    if (!c.out_path.empty()) out << dump(fig4_summary(r));
  } else {
    json j = fig4_summary(r);
    json rows = json::array();
    for (const auto& row : r.rows) rows.push_back(json::array({row.delta_norm, row.kappa2_t, row.fidelity}));
    j["columns"] = json::array({"delta_norm", "kappa2_t", "fidelity"});
    j["rows"] = rows;
    write_text(c.out_path, dump(j), out);
  }
  return kOk;
}

inline int cmd_params(const RunConfig& cfg, const Common& c, std::ostream& out) {
  const auto& p = cfg.params;
  const auto m = derive_cat_manifold(p);
  const auto ref = cfg.reference.locus(p.kappa);
  const double lep2 = lep2_zero_drive(p, m);
  const int dim = required_dimension(m.alpha_mag);
  const double kconf = confinement_rate(p, m);

  if (pick_format(c, "json") == "json") {
    json j{{"params", params_json(p)},
           {"manifold",
            {{"alpha", pair(m.alpha)}, {"alpha_mag", m.alpha_mag}, {"phi_alpha", m.phi_alpha},
             {"p", m.p}, {"p2_plus", m.pp(2)}, {"p2_minus", m.pm(2)}, {"p4_plus", m.pp(4)},
             {"p4_minus", m.pm(4)}, {"p6_plus", m.pp(6)}, {"p6_minus", m.pm(6)}}},
           {"kappa_conf", kconf},
           {"reference",
            {{"alpha0_mag", cfg.reference.alpha0_mag}, {"theta0", cfg.reference.theta0},
             {"eps_abs", ref.eps_abs}, {"delta_abs", ref.delta_abs}}},
           {"lep2_zero_drive_delta", lep2},
           {"fock_dim", dim}};
    write_text(c.out_path, dump(j), out);
  } else {
    CsvWriter w({"key", "value"});
    w.row("kappa", p.kappa);
    w.row("kappa2", p.kappa2);
    w.row("eps", p.eps);
    w.row("delta", p.delta);
    w.row("eps2_mag", p.eps2_mag);
    w.row("theta", p.theta);
    w.row("alpha_re", m.alpha.real());
    w.row("alpha_im", m.alpha.imag());
    w.row("alpha_mag", m.alpha_mag);
    w.row("p", m.p);
    w.row("p2_plus", m.pp(2));
    w.row("p2_minus", m.pm(2));
    w.row("kappa_conf", kconf);
    w.row("ref_eps_abs", ref.eps_abs);
    w.row("ref_delta_abs", ref.delta_abs);
    w.row("lep2_zero_drive_delta", lep2);
    w.row("fock_dim", dim);
    write_text(c.out_path, w.str(), out);
  }
  return kOk;
}

/// Parses argv and runs one subcommand. Returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Liouvillian exceptional points of a dissipative cat qubit"};
  app.fallthrough();
  app.require_subcommand(1);

  Common c;
  app.add_option("--config", c.config_path, "JSON config file");
  app.add_option("--out", c.out_path, "Output file (default: standard output)");
  app.add_option("--format", c.format, "csv or json (default depends on the subcommand)");
  auto* seed_opt = app.add_option("--seed", c.seed, "Seed for random sweeps");
  auto* threads_opt = app.add_option("--threads", c.threads, "Worker threads");
  app.add_flag("--absolute-hz", c.absolute_hz, "Numeric rate flags are in Hz (needs kappa2 in Hz)");

  double kappa = 0, kappa2 = 0, eps = 0, delta = 0, eps2 = 0, theta = 0, theta_pi = 0;
  auto* o_kappa = app.add_option("--kappa", kappa, "Single-photon loss rate");
  auto* o_kappa2 = app.add_option("--kappa2", kappa2, "Two-photon loss rate (with --absolute-hz)");
  auto* o_eps = app.add_option("--eps", eps, "Single-photon drive strength");
  auto* o_delta = app.add_option("--delta", delta, "Detuning");
  auto* o_eps2 = app.add_option("--eps2", eps2, "Two-photon drive magnitude |eps2|");
  auto* o_theta = app.add_option("--theta", theta, "Two-photon drive phase (radians)");
  auto* o_theta_pi = app.add_option("--theta-pi", theta_pi, "Two-photon drive phase in units of pi");
  o_theta->excludes(o_theta_pi);
  double ref_alpha = 0, ref_theta = 0;
  auto* o_ref_alpha = app.add_option("--ref-alpha", ref_alpha, "Normalization reference |alpha0|");
  auto* o_ref_theta = app.add_option("--ref-theta", ref_theta, "Normalization reference theta0 (radians)");

  auto* spectrum = app.add_subcommand("spectrum", "Eigenvalues, cubic invariants and resultants at one point");
  int sweep_samples = 0;
  spectrum->add_option("--sweep-samples", sweep_samples,
                       "Also compare closed form and numeric spectra over seeded random draws");

  auto* contours = app.add_subcommand("contours", "Zero contours of R1 and R2 in the (eps, delta) plane");
  ContourArgs ca;
  double c_eps_lo = 0, c_eps_hi = 0, c_delta_lo = 0, c_delta_hi = 0;
  auto* o_elo = contours->add_option("--eps-lo", c_eps_lo);
  auto* o_ehi = contours->add_option("--eps-hi", c_eps_hi);
  auto* o_dlo = contours->add_option("--delta-lo", c_delta_lo);
  auto* o_dhi = contours->add_option("--delta-hi", c_delta_hi);
  contours->add_option("--window", ca.window, "Half-width of the default window in reference units");
  contours->add_option("--eps-count", ca.eps_count);
  contours->add_option("--delta-count", ca.delta_count);

  auto* winding = app.add_subcommand("winding", "Winding number of (R1, R2) along an elliptic loop");
  WindingArgs wa;
  double w_ce = 0, w_cd = 0, w_re = 0, w_rd = 0;
  winding->add_option("--loop", wa.preset, "enclosing or displaced");
  auto* o_ce = winding->add_option("--center-eps", w_ce);
  auto* o_cd = winding->add_option("--center-delta", w_cd);
  auto* o_re = winding->add_option("--radius-eps", w_re);
  auto* o_rd = winding->add_option("--radius-delta", w_rd);
  winding->add_option("--samples", wa.samples, "Initial sample count");
  winding->add_option("--orientation", wa.orientation, "ccw or cw");

  auto* lep3 = app.add_subcommand("lep3", "Analytic and refined third-order exceptional point");

  auto* sweep = app.add_subcommand("sweep", "LEP3 coordinates along theta or |eps2|/kappa2");
  SweepArgs sa;
  double s_from = 0, s_to = 0;
  int s_count = 0;
  sweep->add_option("--var", sa.variable, "theta or eps2");
  auto* o_from = sweep->add_option("--from", s_from);
  auto* o_to = sweep->add_option("--to", s_to);
  auto* o_count = sweep->add_option("--count", s_count);

  auto* validate = app.add_subcommand("validate", "Full Lindblad vs projected dynamics fidelity surface");
  ValidateArgs va;
  validate->add_option("--delta-lo", va.delta_lo, "Lowest Delta / Delta_ref");
  validate->add_option("--delta-hi", va.delta_hi, "Highest Delta / Delta_ref");
  validate->add_option("--delta-count", va.delta_count);
  validate->add_option("--t-hi", va.t_hi, "Final kappa2 t");
  validate->add_option("--t-count", va.t_count);
  validate->add_option("--dim", va.dim, "Fock truncation (0 = automatic)");
  validate->add_flag("--no-doubling", va.no_doubling, "Skip the doubled-dimension convergence run");
  validate->add_option("--rel-tol", va.rel_tol);
  validate->add_option("--abs-tol", va.abs_tol);

  auto* params = app.add_subcommand("params", "Derived cat-manifold quantities and reference scales");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (o_kappa->count()) c.flags.kappa = kappa;
    if (o_kappa2->count()) c.flags.kappa2 = kappa2;
    if (o_eps->count()) c.flags.eps = eps;
    if (o_delta->count()) c.flags.delta = delta;
    if (o_eps2->count()) c.flags.eps2_mag = eps2;
    if (o_theta->count()) c.flags.theta = theta;
    if (o_theta_pi->count()) c.flags.theta = theta_pi * M_PI;

    std::optional<FileConfig> file;
    if (!c.config_path.empty()) file = load_config(c.config_path);

    RunConfig cfg;
    cfg.params = resolve_params(file ? &*file : nullptr, c.flags, c.absolute_hz);
    if (file && file->reference) cfg.reference = *file->reference;
    if (o_ref_alpha->count()) cfg.reference.alpha0_mag = ref_alpha;
    if (o_ref_theta->count()) cfg.reference.theta0 = ref_theta;
    if (!(cfg.reference.alpha0_mag > 0.0) || !std::isfinite(cfg.reference.theta0)) {
      throw Error(Errc::invalid_argument, "normalization reference needs |alpha0| > 0 and finite theta0");
    }
    cfg.seed = seed_opt->count() ? c.seed : (file && file->seed ? *file->seed : 0);
    cfg.threads = threads_opt->count() ? c.threads : (file && file->threads ? *file->threads : 1);
    if (cfg.threads < 1) throw Error(Errc::invalid_argument, "--threads must be >= 1");

    if (spectrum->parsed()) {
      if (sweep_samples < 0) throw Error(Errc::invalid_argument, "--sweep-samples must be >= 0");
      return cmd_spectrum(cfg, c, sweep_samples, out);
    }
    if (contours->parsed()) {
      if (o_elo->count()) ca.eps_lo = c_eps_lo;
      if (o_ehi->count()) ca.eps_hi = c_eps_hi;
      if (o_dlo->count()) ca.delta_lo = c_delta_lo;
      if (o_dhi->count()) ca.delta_hi = c_delta_hi;
      return cmd_contours(cfg, c, ca, out);
    }
    if (winding->parsed()) {
      if (o_ce->count()) wa.center_eps = w_ce;
      if (o_cd->count()) wa.center_delta = w_cd;
      if (o_re->count()) wa.radius_eps = w_re;
      if (o_rd->count()) wa.radius_delta = w_rd;
      return cmd_winding(cfg, c, wa, out);
    }
    if (lep3->parsed()) return cmd_lep3(cfg, c, out);
    if (sweep->parsed()) {
      if (o_from->count()) sa.from = s_from;
      if (o_to->count()) sa.to = s_to;
      if (o_count->count()) sa.count = s_count;
      return cmd_sweep(cfg, c, sa, out);
    }
    if (validate->parsed()) return cmd_validate(cfg, c, va, out);
    if (params->parsed()) return cmd_params(cfg, c, out);
  } catch (const Error& e) {
    err << "catlep: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "catlep: " << e.what() << "\n";
    return kNumerical;
  }
  return kUsage;
}

}  // namespace catlep::cli

#endif  // CATLEP_TOOLS_APP_HPP
