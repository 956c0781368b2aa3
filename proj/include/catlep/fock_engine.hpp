#ifndef CATLEP_FOCK_ENGINE_HPP
#define CATLEP_FOCK_ENGINE_HPP

// Full driven-dissipative oscillator in a truncated Fock basis: operators,
// states, the vectorized Lindblad generator, adaptive time evolution and the
// Uhlmann fidelity used to check the projected dynamics.
//
// Density matrices are vectorized row-major, vec(rho)[i * N + j] = rho(i, j),
// so that vec(A rho B) = (A kron B^T) vec(rho).

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <exception>
#include <limits>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "catlep/ep_locator.hpp"
#include "catlep/error.hpp"
#include "catlep/logical_liouvillian.hpp"
#include "catlep/params.hpp"

namespace catlep {

using MatrixXc = Eigen::MatrixXcd;
using VectorXc = Eigen::VectorXcd;
using RowMatrixXc = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using SparseSuperop = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;

struct FockOperator {
  int dim{0};
  MatrixXc m;
};

inline void check_dim(int dim) {
  if (dim < 2) throw Error(Errc::invalid_argument, "Fock dimension must be >= 2");
}

inline FockOperator annihilation(int dim) {
  check_dim(dim);
  FockOperator a{dim, MatrixXc::Zero(dim, dim)};
  for (int n = 1; n < dim; ++n) a.m(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

inline FockOperator number_operator(int dim) {
  check_dim(dim);
  FockOperator n{dim, MatrixXc::Zero(dim, dim)};
  for (int k = 0; k < dim; ++k) n.m(k, k) = static_cast<double>(k);
  return n;
}

/// exp(i pi a^dag a) = diag(+1, -1, +1, ...).
inline FockOperator parity_operator(int dim) {
  check_dim(dim);
  FockOperator p{dim, MatrixXc::Zero(dim, dim)};
  for (int k = 0; k < dim; ++k) p.m(k, k) = (k % 2 == 0) ? 1.0 : -1.0;
  return p;
}

inline constexpr double kTailTolerance = 1e-10;
inline constexpr int kGuardLevels = 10;

/// Poisson mass of a coherent state beyond level dim - 1.
inline double coherent_tail(double alpha_mag, int dim) {
  const double x = alpha_mag * alpha_mag;
  if (x == 0.0) return 0.0;
  // Log Poisson weights, accumulated to avoid overflow for large |alpha|.
  double log_w = -x;
  for (int n = 1; n < dim; ++n) log_w += std::log(x / n);
  double tail = 0.0;
  for (int n = dim; n < dim + 100000; ++n) {
    log_w += std::log(x / n);
    const double w = std::exp(log_w);
    tail += w;
    if (n > x && w < 1e-18 * tail) break;
  }
  return tail;
}

/// Smallest N with tail < 1e-10, plus guard levels for drive-induced leakage.
inline int required_dimension(double alpha_mag) {
  int n = 2;
  while (coherent_tail(alpha_mag, n) >= kTailTolerance) ++n;
  return n + kGuardLevels;
}

namespace detail {

inline void check_tail(double alpha_mag, int dim) {
  const double tail = coherent_tail(alpha_mag, dim);
  if (tail >= kTailTolerance) {
    throw Error(Errc::insufficient_dimension,
                "coherent-state tail mass " + std::to_string(tail) + " beyond dim " +
                    std::to_string(dim) + " exceeds 1e-10");
  }
}

inline VectorXc coherent_coefficients(cplx alpha, int dim) {
  VectorXc v(dim);
  v(0) = std::exp(-0.5 * std::norm(alpha));
  for (int n = 1; n < dim; ++n) v(n) = v(n - 1) * alpha / std::sqrt(static_cast<double>(n));
  return v;
}

}  // namespace detail

inline VectorXc coherent_state(cplx alpha, int dim) {
  check_dim(dim);
  detail::check_tail(std::abs(alpha), dim);
  VectorXc v = detail::coherent_coefficients(alpha, dim);
  return v / v.norm();
}

enum class Parity { even, odd };

/// N (|alpha> +- |-alpha>), built directly from the surviving Fock components.
inline VectorXc cat_state(cplx alpha, Parity parity, int dim) {
  check_dim(dim);
  if (alpha == cplx(0.0)) {
    throw Error(Errc::degenerate_manifold, "cat state needs alpha != 0");
  }
  detail::check_tail(std::abs(alpha), dim);
  VectorXc v = detail::coherent_coefficients(alpha, dim);
  const int keep = parity == Parity::even ? 0 : 1;
  for (int n = 0; n < dim; ++n) {
    if (n % 2 != keep) v(n) = 0.0;
  }
  return v / v.norm();
}

struct DensityMatrix {
  int dim{0};
  MatrixXc rho;

  static DensityMatrix pure(const VectorXc& psi) {
    return {static_cast<int>(psi.size()), psi * psi.adjoint()};
  }

  static DensityMatrix fock(int n, int dim) {
    check_dim(dim);
    if (n < 0 || n >= dim) throw Error(Errc::invalid_argument, "Fock level outside truncation");
    DensityMatrix d{dim, MatrixXc::Zero(dim, dim)};
    d.rho(n, n) = 1.0;
    return d;
  }
};

struct StateDiagnostics {
  double hermiticity{0.0};   ///< max |rho - rho^dag| entry
  double trace_error{0.0};   ///< |tr rho - 1|
  double min_eigenvalue{0.0};
};

inline StateDiagnostics diagnose(const DensityMatrix& d) {
  StateDiagnostics s;
  s.hermiticity = (d.rho - d.rho.adjoint()).cwiseAbs().maxCoeff();
  s.trace_error = std::abs(d.rho.trace() - 1.0);
  const MatrixXc h = 0.5 * (d.rho + d.rho.adjoint());
  Eigen::SelfAdjointEigenSolver<MatrixXc> es(h, Eigen::EigenvaluesOnly);
  s.min_eigenvalue = es.eigenvalues()(0);
  return s;
}

inline double parity_expectation(const DensityMatrix& d) {
  double s = 0.0;
  for (int n = 0; n < d.dim; ++n) s += ((n % 2 == 0) ? 1.0 : -1.0) * d.rho(n, n).real();
  return s;
}

inline VectorXc vectorize(const MatrixXc& rho) {
  const RowMatrixXc r = rho;
  return Eigen::Map<const VectorXc>(r.data(), r.size());
}

inline MatrixXc unvectorize(const VectorXc& v, int dim) {
  return Eigen::Map<const RowMatrixXc>(v.data(), dim, dim);
}

struct FullLiouvillian {
  int dim{0};
  SystemParams params;
  SparseSuperop L;

  VectorXc apply(const VectorXc& v) const { return L * v; }

  /// max_k |sum_i L[(i,i), k]|: violation of trace preservation.
  double trace_defect() const {
    Eigen::Matrix<cplx, 1, Eigen::Dynamic> acc = Eigen::Matrix<cplx, 1, Eigen::Dynamic>::Zero(L.cols());
    for (int i = 0; i < dim; ++i) {
      for (SparseSuperop::InnerIterator it(L, i * dim + i); it; ++it) acc(it.col()) += it.value();
    }
    return acc.size() ? acc.cwiseAbs().maxCoeff() : 0.0;
  }
};

namespace detail {

using Triplets = std::vector<Eigen::Triplet<cplx>>;

/// Appends scale * (A kron B) as triplets; exact zeros are skipped.
inline void add_kron(Triplets& out, const MatrixXc& a, const MatrixXc& b, cplx scale) {
  const int n = static_cast<int>(a.rows());
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const cplx av = a(i, j);
      if (av == cplx(0.0)) continue;
      for (int k = 0; k < n; ++k) {
        for (int l = 0; l < n; ++l) {
          const cplx bv = b(k, l);
          if (bv == cplx(0.0)) continue;
          out.emplace_back(i * n + k, j * n + l, scale * av * bv);
        }
      }
    }
  }
}

inline void add_dissipator(Triplets& out, const MatrixXc& g, const MatrixXc& id) {
  const MatrixXc gdg = g.adjoint() * g;
  add_kron(out, g, g.conjugate(), 1.0);
  add_kron(out, gdg, id, -0.5);
  add_kron(out, id, gdg.transpose(), -0.5);
}

}  // namespace detail

/// H = Delta a^dag a + eps2 a^dag^2 + eps2^* a^2 + eps (a + a^dag).
inline MatrixXc full_hamiltonian(const SystemParams& params, int dim) {
  const MatrixXc a = annihilation(dim).m;
  const MatrixXc ad = a.adjoint();
  const cplx e2 = params.eps2();
  return params.delta * (ad * a) + e2 * (ad * ad) + std::conj(e2) * (a * a) + params.eps * (a + ad);
}

/// -i (H kron 1 - 1 kron H^T) + sum over G in {sqrt(kappa) a, sqrt(kappa2) a^2} of
/// G kron G^* - 1/2 G^dag G kron 1 - 1/2 1 kron (G^T G^*).
inline FullLiouvillian build_full_liouvillian(const SystemParams& params, int dim) {
  params.validate();
  check_dim(dim);
  const MatrixXc id = MatrixXc::Identity(dim, dim);
  const MatrixXc a = annihilation(dim).m;
  const MatrixXc h = full_hamiltonian(params, dim);
  const cplx mi{0.0, -1.0};

  detail::Triplets trip;
  detail::add_kron(trip, h, id, mi);
  detail::add_kron(trip, id, h.transpose(), -mi);
  if (params.kappa > 0.0) detail::add_dissipator(trip, std::sqrt(params.kappa) * a, id);
  if (params.kappa2 > 0.0) detail::add_dissipator(trip, std::sqrt(params.kappa2) * (a * a), id);

  FullLiouvillian out;
  out.dim = dim;
  out.params = params;
  out.L.resize(dim * dim, dim * dim);
  out.L.setFromTriplets(trip.begin(), trip.end());
  out.L.prune(cplx(0.0));
  out.L.makeCompressed();
  return out;
}

/// Cat-basis matrix elements <C_j| L(|C_l><C_m|) |C_k> of the full generator,
/// ordered like the logical vectorization (++, +-, -+, --).
inline Matrix4c project_to_cat_basis(const FullLiouvillian& full, cplx alpha) {
  const VectorXc cp = cat_state(alpha, Parity::even, full.dim);
  const VectorXc cm = cat_state(alpha, Parity::odd, full.dim);
  const VectorXc basis[2] = {cp, cm};
  Matrix4c out;
  for (int l = 0; l < 2; ++l) {
    for (int m = 0; m < 2; ++m) {
      const MatrixXc rho = basis[l] * basis[m].adjoint();
      const MatrixXc img = unvectorize(full.apply(vectorize(rho)), full.dim);
      for (int j = 0; j < 2; ++j) {
        for (int k = 0; k < 2; ++k) {
          out(2 * j + k, 2 * l + m) = basis[j].dot(img * basis[k]);
        }
      }
    }
  }
  return out;
}

struct EvolveOptions {
  double rel_tol{1e-9};
  double abs_tol{1e-12};
  /// Largest re-Hermitization or trace correction accepted on an output.
  double correction_limit{1e-7};
  long max_steps{100000000};
};

struct OutputRecord {
  double t{0.0};
  double hermiticity_correction{0.0};
  double trace_correction{0.0};
};

struct EvolveResult {
  std::vector<DensityMatrix> states;
  std::vector<OutputRecord> records;
  long accepted_steps{0};
  long rejected_steps{0};
};

namespace detail {

// Dormand-Prince 5(4) tableau, error weights and dense-output coefficients.
struct Dopri5 {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                          a75 = -2187.0 / 6784, a76 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
  static constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                          d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                          d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
};

inline double weighted_rms(const VectorXc& e, const VectorXc& y0, const VectorXc& y1,
                           double rtol, double atol) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    const double sk = atol + rtol * std::max(std::abs(y0(i)), std::abs(y1(i)));
    const double r = std::abs(e(i)) / sk;
    acc += r * r;
  }
  return std::sqrt(acc / static_cast<double>(std::max<Eigen::Index>(e.size(), 1)));
}

}  // namespace detail

/// Adaptive Dormand-Prince 5(4) integration of d vec(rho)/dt = L vec(rho) with PI
/// step control and dense output at the requested times. Each output is
/// re-Hermitized and trace-renormalized; corrections above the limit are an error.
inline EvolveResult evolve(const FullLiouvillian& full, const DensityMatrix& rho0,
                           const std::vector<double>& t_grid, const EvolveOptions& opt = {}) {
  using C = detail::Dopri5;
  if (rho0.dim != full.dim) throw Error(Errc::invalid_argument, "state/generator dimension mismatch");
  if (t_grid.empty()) return {};
  if (!(t_grid.front() >= 0.0)) throw Error(Errc::invalid_argument, "time grid must start at t >= 0");
  for (std::size_t k = 1; k < t_grid.size(); ++k) {
    if (!(t_grid[k] >= t_grid[k - 1])) {
      throw Error(Errc::invalid_argument, "time grid must be ascending");
    }
  }
  if (!(opt.rel_tol > 0.0) || !(opt.abs_tol > 0.0)) {
    throw Error(Errc::invalid_argument, "tolerances must be positive");
  }

  const int n = full.dim;
  const auto& L = full.L;
  EvolveResult res;
  res.states.reserve(t_grid.size());
  res.records.reserve(t_grid.size());

  auto emit = [&](const VectorXc& y, double t) {
    const MatrixXc raw = unvectorize(y, n);
    const double herm = 0.5 * (raw - raw.adjoint()).cwiseAbs().maxCoeff();
    MatrixXc rho = 0.5 * (raw + raw.adjoint());
    const double tr = rho.trace().real();
    const double trace_corr = std::abs(raw.trace() - 1.0);
    if (herm > opt.correction_limit || trace_corr > opt.correction_limit || !(tr > 0.0)) {
      throw Error(Errc::numerical_failure,
                  "output correction above limit at t = " + std::to_string(t) +
                      " (hermiticity " + std::to_string(herm) + ", trace " +
                      std::to_string(trace_corr) + ")");
    }
    rho /= tr;
    res.states.push_back({n, std::move(rho)});
    res.records.push_back({t, herm, trace_corr});
  };

  VectorXc y = vectorize(rho0.rho);
  double t = 0.0;
  std::size_t next = 0;
  while (next < t_grid.size() && t_grid[next] == 0.0) emit(y, t_grid[next++]);
  if (next == t_grid.size()) return res;
  const double t_end = t_grid.back();

  const Eigen::Index sz = y.size();
  VectorXc k1 = L * y, k2(sz), k3(sz), k4(sz), k5(sz), k6(sz), k7(sz), tmp(sz), y_new(sz),
           err(sz);

  // Initial step from the ratio of state and derivative magnitudes.
  double h;
  {
    const VectorXc zero = VectorXc::Zero(sz);
    const double d0 = detail::weighted_rms(y, y, zero, opt.rel_tol, opt.abs_tol);
    const double d1 = detail::weighted_rms(k1, y, zero, opt.rel_tol, opt.abs_tol);
    h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h = std::min(h, t_end);
  }
  double err_old = 1e-4;
  bool last_rejected = false;
  long steps = 0;

  while (next < t_grid.size()) {
    if (++steps > opt.max_steps) {
      throw Error(Errc::numerical_failure,
                  "step budget exhausted at t = " + std::to_string(t));
    }
    if (h < 1e-14 * std::max(1.0, std::abs(t))) {
      throw Error(Errc::numerical_failure, "step size underflow at t = " + std::to_string(t));
    }
    h = std::min(h, t_end - t);

    tmp = y + h * C::a21 * k1;
    k2.noalias() = L * tmp;
    tmp = y + h * (C::a31 * k1 + C::a32 * k2);
    k3.noalias() = L * tmp;
    tmp = y + h * (C::a41 * k1 + C::a42 * k2 + C::a43 * k3);
    k4.noalias() = L * tmp;
    tmp = y + h * (C::a51 * k1 + C::a52 * k2 + C::a53 * k3 + C::a54 * k4);
    k5.noalias() = L * tmp;
    tmp = y + h * (C::a61 * k1 + C::a62 * k2 + C::a63 * k3 + C::a64 * k4 + C::a65 * k5);
    k6.noalias() = L * tmp;
    y_new = y + h * (C::a71 * k1 + C::a73 * k3 + C::a74 * k4 + C::a75 * k5 + C::a76 * k6);
    k7.noalias() = L * y_new;
    err = h * (C::e1 * k1 + C::e3 * k3 + C::e4 * k4 + C::e5 * k5 + C::e6 * k6 + C::e7 * k7);
    const double e = detail::weighted_rms(err, y, y_new, opt.rel_tol, opt.abs_tol);

    if (e <= 1.0) {
      const double t_new = (t_end - (t + h) < 1e-14 * std::max(1.0, t_end)) ? t_end : t + h;
      if (next < t_grid.size() && t_grid[next] <= t_new) {
        const VectorXc ydiff = y_new - y;
        const VectorXc bspl = h * k1 - ydiff;
        const VectorXc r4 = ydiff - h * k7 - bspl;
        const VectorXc r5 = h * (C::d1 * k1 + C::d3 * k3 + C::d4 * k4 + C::d5 * k5 +
                                 C::d6 * k6 + C::d7 * k7);
        while (next < t_grid.size() && t_grid[next] <= t_new) {
          const double th = h > 0.0 ? std::clamp((t_grid[next] - t) / h, 0.0, 1.0) : 1.0;
          const double th1 = 1.0 - th;
          tmp = y + th * (ydiff + th1 * (bspl + th * (r4 + th1 * r5)));
          emit(tmp, t_grid[next++]);
        }
      }
      t = t_new;
      y.swap(y_new);
      k1.swap(k7);
      ++res.accepted_steps;
      double scale = e == 0.0 ? 10.0 : 0.9 * std::pow(e, -0.17) * std::pow(err_old, 0.04);
      scale = std::clamp(scale, 0.2, 10.0);
      if (last_rejected) scale = std::min(scale, 1.0);
      h *= scale;
      err_old = std::max(e, 1e-4);
      last_rejected = false;
    } else {
      ++res.rejected_steps;
      h *= std::max(0.2, 0.9 * std::pow(e, -0.2));
      last_rejected = true;
    }
  }
  return res;
}

/// Unique steady state of a generator with kappa > 0. The kernel vector is
/// obtained from a sparse LU solve of L with one equation replaced by the
/// trace condition, followed by one step of iterative refinement; the result
/// must satisfy ||L vec(rho)||_1 < 1e-10.
inline DensityMatrix steady_state_full(const FullLiouvillian& full) {
  if (!(full.params.kappa > 0.0)) {
    throw Error(Errc::invalid_argument, "a unique full steady state needs kappa > 0");
  }
  const int n = full.dim;
  const Eigen::Index sz = static_cast<Eigen::Index>(n) * n;
  detail::Triplets trip;
  trip.reserve(static_cast<std::size_t>(full.L.nonZeros()) + static_cast<std::size_t>(n));
  for (Eigen::Index r = 1; r < sz; ++r) {
    for (SparseSuperop::InnerIterator it(full.L, r); it; ++it) {
      trip.emplace_back(static_cast<int>(r), static_cast<int>(it.col()), it.value());
    }
  }
  for (int i = 0; i < n; ++i) trip.emplace_back(0, i * n + i, cplx(1.0));
  Eigen::SparseMatrix<cplx> a(sz, sz);
  a.setFromTriplets(trip.begin(), trip.end());
  a.makeCompressed();

  Eigen::SparseLU<Eigen::SparseMatrix<cplx>> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success) {
    throw Error(Errc::degenerate_kernel, "bordered steady-state system is singular");
  }
  VectorXc b = VectorXc::Zero(sz);
  b(0) = 1.0;
  VectorXc x = lu.solve(b);
  const VectorXc r = b - a * x;
  x += lu.solve(r);

  MatrixXc rho = unvectorize(x, n);
  rho = 0.5 * (rho + rho.adjoint());
  rho /= rho.trace().real();
  const double residual = (full.L * vectorize(rho)).cwiseAbs().sum();
  if (!(residual < 1e-10)) {
    throw Error(Errc::numerical_failure,
                "steady-state residual " + std::to_string(residual) + " above 1e-10");
  }
  return {n, rho};
}

struct HermitianEigen {
  Eigen::VectorXd values;  ///< ascending
  MatrixXc vectors;        ///< orthonormal columns
};

inline HermitianEigen hermitian_eigendecomposition(const MatrixXc& h) {
  if (h.rows() != h.cols()) throw Error(Errc::invalid_argument, "matrix must be square");
  if (h.size() == 0) return {};
  const double defect = (h - h.adjoint()).cwiseAbs().maxCoeff();
  if (defect > 1e-8) {
    throw Error(Errc::invalid_argument,
                "matrix is not Hermitian (defect " + std::to_string(defect) + ")");
  }
  Eigen::SelfAdjointEigenSolver<MatrixXc> es(0.5 * (h + h.adjoint()));
  if (es.info() != Eigen::Success) {
    throw Error(Errc::numerical_failure, "Hermitian eigensolver did not converge");
  }
  return {es.eigenvalues(), es.eigenvectors()};
}

inline constexpr double kNegativeEigenvalueFloor = -1e-8;

namespace detail {

inline double clamp_eigenvalue(double v) {
  if (v < kNegativeEigenvalueFloor) {
    throw Error(Errc::numerical_failure,
                "density matrix eigenvalue " + std::to_string(v) + " below -1e-8");
  }
  return std::max(v, 0.0);
}

}  // namespace detail

/// Square root of a positive semidefinite Hermitian matrix.
inline MatrixXc psd_sqrt(const MatrixXc& h) {
  const auto eig = hermitian_eigendecomposition(h);
  Eigen::VectorXd s(eig.values.size());
  for (Eigen::Index k = 0; k < s.size(); ++k) s(k) = std::sqrt(detail::clamp_eigenvalue(eig.values(k)));
  return eig.vectors * s.asDiagonal() * eig.vectors.adjoint();
}

/// Uhlmann fidelity (tr sqrt(sqrt(r1) r2 sqrt(r1)))^2, clamped to [0, 1].
inline double fidelity(const DensityMatrix& r1, const DensityMatrix& r2) {
  if (r1.dim != r2.dim || r1.rho.rows() != r2.rho.rows()) {
    throw Error(Errc::invalid_argument, "fidelity: dimension mismatch");
  }
  const MatrixXc s = psd_sqrt(r1.rho);
  MatrixXc m = s * r2.rho * s;
  m = 0.5 * (m + m.adjoint());
  const auto eig = hermitian_eigendecomposition(m);
  // Eigenvalues at the roundoff level of the largest one are zero; their square
  // roots would otherwise add a bias of order sqrt(eps) per level.
  const double top = eig.values.size() ? eig.values.cwiseAbs().maxCoeff() : 0.0;
  const double floor = 4.0 * static_cast<double>(eig.values.size()) *
                       std::numeric_limits<double>::epsilon() * top;
  double acc = 0.0;
  for (Eigen::Index k = 0; k < eig.values.size(); ++k) {
    const double v = detail::clamp_eigenvalue(eig.values(k));
    if (v > floor) acc += std::sqrt(v);
  }
  return std::clamp(acc * acc, 0.0, 1.0);
}

/// Fock-space image of a logical density vector: sum_jk v_jk |C_j><C_k|.
class CatEmbedding {
 public:
  CatEmbedding(cplx alpha, int dim)
      : dim_(dim), plus_(cat_state(alpha, Parity::even, dim)),
        minus_(cat_state(alpha, Parity::odd, dim)) {}

  DensityMatrix operator()(const LogicalVector& v) const {
    if (v.hermiticity_defect() > 1e-9 || std::abs(v.trace() - 1.0) > 1e-9) {
      throw Error(Errc::invalid_argument, "logical vector must be Hermitian with unit trace");
    }
    MatrixXc rho = v.v(0) * plus_ * plus_.adjoint() + v.v(1) * plus_ * minus_.adjoint() +
                   v.v(2) * minus_ * plus_.adjoint() + v.v(3) * minus_ * minus_.adjoint();
    return {dim_, rho};
  }

  const VectorXc& plus() const { return plus_; }
  const VectorXc& minus() const { return minus_; }

 private:
  int dim_;
  VectorXc plus_;
  VectorXc minus_;
};

inline DensityMatrix embed_logical(const LogicalVector& v, cplx alpha, int dim) {
  return CatEmbedding(alpha, dim)(v);
}

struct Fig4Spec {
  SystemParams params = SystemParams::make(6.48e-3, 1.0, 6.94e-3, 0.0, 0.93, 1.5 * M_PI);
  NormalizationReference reference{};
  double delta_norm_lo{0.0};
  double delta_norm_hi{1.0};
  int delta_count{21};
  double t_lo{0.0};
  double t_hi{20.0};
  int t_count{201};
  /// 0 selects the dimension rule for the cat amplitude.
  int dim{0};
  bool check_doubling{true};
  int threads{1};
  EvolveOptions evolve{};

  void validate() const {
    params.validate();
    if (delta_count < 1 || t_count < 1) throw Error(Errc::invalid_argument, "grid counts must be >= 1");
    if (!(t_lo >= 0.0) || !(t_hi >= t_lo)) throw Error(Errc::invalid_argument, "bad time window");
    if (!(delta_norm_hi >= delta_norm_lo)) throw Error(Errc::invalid_argument, "bad detuning window");
    if (dim != 0 && dim < 2) throw Error(Errc::invalid_argument, "dim must be 0 or >= 2");
    if (threads < 1) throw Error(Errc::invalid_argument, "threads must be >= 1");
  }

  static std::vector<double> nodes(double lo, double hi, int count) {
    std::vector<double> out(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) out[k] = count == 1 ? lo : lo + (hi - lo) * k / (count - 1);
    return out;
  }
};

struct Fig4Row {
  double delta_norm{0.0};
  double kappa2_t{0.0};
  double fidelity{0.0};
};

struct Fig4Conservation {
  double max_hermiticity_correction{0.0};
  double max_trace_correction{0.0};
  double min_eigenvalue{std::numeric_limits<double>::infinity()};
};

struct Fig4Result {
  std::vector<Fig4Row> rows;
  double min_fidelity{1.0};
  double argmin_delta_norm{0.0};
  double argmin_t{0.0};
  /// Smallest fidelity at the last time over all detunings.
  double min_final_fidelity{1.0};
  double delta_ref{0.0};
  int dim{0};
  int dim_doubled{0};
  /// max |F(dim) - F(2 dim)| over the surface; NaN when the check was skipped.
  double doubling_change{std::numeric_limits<double>::quiet_NaN()};
  Fig4Conservation conservation;
};

namespace detail {

struct Fig4Surface {
  std::vector<double> fidelity;  // [delta][t]
  Fig4Conservation conservation;
};

template <class Fn>
inline void parallel_for(int count, int threads, Fn&& fn) {
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (int k = next++; k < count; k = next++) {
      try {
        fn(k);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = count;
      }
    }
  };
  const int n = std::max(1, std::min(threads, count));
  std::vector<std::thread> pool;
  for (int k = 1; k < n; ++k) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

inline Fig4Surface fig4_surface(const Fig4Spec& spec, const std::vector<double>& deltas,
                                const std::vector<double>& times, double delta_ref, int dim) {
  const auto manifold = derive_cat_manifold(spec.params);
  const CatEmbedding embed(manifold.alpha, dim);
  const DensityMatrix rho0 = DensityMatrix::pure(embed.plus());
  const std::size_t nt = times.size();
  Fig4Surface out;
  out.fidelity.assign(deltas.size() * nt, 0.0);
  std::vector<Fig4Conservation> cons(deltas.size());

  parallel_for(static_cast<int>(deltas.size()), spec.threads, [&](int k) {
    const SystemParams p = spec.params.at(spec.params.eps, deltas[k] * delta_ref);
    const auto full = build_full_liouvillian(p, dim);
    const auto run = evolve(full, rho0, times, spec.evolve);
    const LogicalPropagator prop(build_matrix(p, manifold));
    auto& c = cons[k];
    for (std::size_t j = 0; j < nt; ++j) {
      const auto& rec = run.records[j];
      c.max_hermiticity_correction = std::max(c.max_hermiticity_correction, rec.hermiticity_correction);
      c.max_trace_correction = std::max(c.max_trace_correction, rec.trace_correction);
      const auto eig = hermitian_eigendecomposition(run.states[j].rho);
      c.min_eigenvalue = std::min(c.min_eigenvalue, eig.values(0));
      const DensityMatrix rho_l = embed(prop(LogicalVector::cat_plus(), times[j]));
      out.fidelity[k * nt + j] = fidelity(run.states[j], rho_l);
    }
  });
  for (const auto& c : cons) {
    out.conservation.max_hermiticity_correction =
        std::max(out.conservation.max_hermiticity_correction, c.max_hermiticity_correction);
    out.conservation.max_trace_correction =
        std::max(out.conservation.max_trace_correction, c.max_trace_correction);
    out.conservation.min_eigenvalue = std::min(out.conservation.min_eigenvalue, c.min_eigenvalue);
  }
  return out;
}

}  // namespace detail

/// Fidelity surface between full Lindblad evolution and the projected dynamics
/// over (Delta / Delta_ref, kappa2 t), starting from the even cat state.
inline Fig4Result validate_fig4(const Fig4Spec& spec) {
  spec.validate();
  const auto manifold = derive_cat_manifold(spec.params);
  Fig4Result out;
  out.delta_ref = spec.reference.locus(spec.params.kappa).delta_abs;
  out.dim = spec.dim > 0 ? spec.dim : required_dimension(manifold.alpha_mag);
  const auto deltas = Fig4Spec::nodes(spec.delta_norm_lo, spec.delta_norm_hi, spec.delta_count);
  const auto times = Fig4Spec::nodes(spec.t_lo, spec.t_hi, spec.t_count);

  const auto surface = detail::fig4_surface(spec, deltas, times, out.delta_ref, out.dim);
  out.conservation = surface.conservation;
  const std::size_t nt = times.size();
  out.min_fidelity = std::numeric_limits<double>::infinity();
  out.min_final_fidelity = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < deltas.size(); ++k) {
    for (std::size_t j = 0; j < nt; ++j) {
      const double f = surface.fidelity[k * nt + j];
      out.rows.push_back({deltas[k], times[j], f});
      if (f < out.min_fidelity) {
        out.min_fidelity = f;
        out.argmin_delta_norm = deltas[k];
        out.argmin_t = times[j];
      }
    }
    out.min_final_fidelity = std::min(out.min_final_fidelity, surface.fidelity[k * nt + nt - 1]);
  }

  if (spec.check_doubling) {
    out.dim_doubled = 2 * out.dim;
    const auto doubled = detail::fig4_surface(spec, deltas, times, out.delta_ref, out.dim_doubled);
    double change = 0.0;
    for (std::size_t k = 0; k < surface.fidelity.size(); ++k) {
      change = std::max(change, std::abs(surface.fidelity[k] - doubled.fidelity[k]));
    }
    out.doubling_change = change;
    out.conservation.max_hermiticity_correction =
        std::max(out.conservation.max_hermiticity_correction,
                 doubled.conservation.max_hermiticity_correction);
    out.conservation.max_trace_correction =
        std::max(out.conservation.max_trace_correction, doubled.conservation.max_trace_correction);
    out.conservation.min_eigenvalue =
        std::min(out.conservation.min_eigenvalue, doubled.conservation.min_eigenvalue);
  }
  return out;
}

}  // namespace catlep

#endif  // CATLEP_FOCK_ENGINE_HPP
