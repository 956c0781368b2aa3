#ifndef CATLEP_NUMERIC_SPECTRUM_HPP
#define CATLEP_NUMERIC_SPECTRUM_HPP

// Eigen-decomposition of a dense 4x4 complex matrix that is independent of any
// closed-form eigenvalue expression: characteristic polynomial by determinant
// expansion, roots by Aberth-Ehrlich simultaneous iteration, eigenvectors by
// null-space extraction through an SVD.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

namespace catlep {

using cplx = std::complex<double>;
using Matrix4c = Eigen::Matrix<cplx, 4, 4>;
using Vector4c = Eigen::Matrix<cplx, 4, 1>;

namespace detail {

inline cplx det2(const Matrix4c& m, int r0, int r1, int c0, int c1) {
  return m(r0, c0) * m(r1, c1) - m(r0, c1) * m(r1, c0);
}

inline cplx det3(const Matrix4c& m, std::array<int, 3> r, std::array<int, 3> c) {
  return m(r[0], c[0]) * det2(m, r[1], r[2], c[1], c[2]) -
         m(r[0], c[1]) * det2(m, r[1], r[2], c[0], c[2]) +
         m(r[0], c[2]) * det2(m, r[1], r[2], c[0], c[1]);
}

inline cplx det4(const Matrix4c& m) {
  cplx d{0.0, 0.0};
  for (int c = 0; c < 4; ++c) {
    std::array<int, 3> cols{};
    for (int k = 0, idx = 0; k < 4; ++k) {
      if (k != c) cols[idx++] = k;
    }
    const cplx minor = det3(m, {1, 2, 3}, cols);
    d += ((c % 2 == 0) ? 1.0 : -1.0) * m(0, c) * minor;
  }
  return d;
}

}  // namespace detail

/// Coefficients c[0..4] of det(lambda I - M) = sum_k c[k] lambda^k, c[4] = 1.
/// Principal-minor expansion: c3 = -tr M, c2 = sum of 2x2 principal minors,
/// c1 = -sum of 3x3 principal minors, c0 = det M.
inline std::array<cplx, 5> characteristic_polynomial(const Matrix4c& m) {
  std::array<cplx, 5> c{};
  c[4] = 1.0;
  c[3] = -m.trace();
  cplx s2{0.0, 0.0};
  for (int i = 0; i < 4; ++i) {
    for (int j = i + 1; j < 4; ++j) s2 += detail::det2(m, i, j, i, j);
  }
  c[2] = s2;
  cplx s3{0.0, 0.0};
  for (int skip = 0; skip < 4; ++skip) {
    std::array<int, 3> idx{};
    for (int k = 0, n = 0; k < 4; ++k) {
      if (k != skip) idx[n++] = k;
    }
    s3 += detail::det3(m, idx, idx);
  }
  c[1] = -s3;
  c[0] = detail::det4(m);
  return c;
}

namespace detail {

inline void horner(std::span<const cplx> c, cplx z, cplx& value, cplx& deriv) {
  value = c.back();
  deriv = 0.0;
  for (std::size_t k = c.size() - 1; k-- > 0;) {
    deriv = deriv * z + value;
    value = value * z + c[k];
  }
}

}  // namespace detail

/// All roots of the monic polynomial sum_k c[k] z^k (c.back() == 1) by the
/// Aberth-Ehrlich method followed by Newton polishing.
inline std::vector<cplx> polynomial_roots(std::span<const cplx> c) {
  const std::size_t n = c.size() - 1;
  std::vector<cplx> z(n);
  if (n == 0) return z;

  // Fujiwara bound on root magnitudes.
  double bound = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double term = std::pow(std::abs(c[k]), 1.0 / static_cast<double>(n - k));
    bound = std::max(bound, term);
  }
  if (bound == 0.0) return z;  // z^n
  bound *= 2.0;

  const cplx center = -c[n - 1] / static_cast<double>(n);
  const double radius = std::max(bound * 0.5, std::abs(center) * 1e-3);
  for (std::size_t k = 0; k < n; ++k) {
    const double ang = 2.0 * M_PI * static_cast<double>(k) / static_cast<double>(n) + 0.4;
    z[k] = center + radius * cplx(std::cos(ang), std::sin(ang));
  }

  constexpr int kMaxIter = 500;
  const double eps = std::numeric_limits<double>::epsilon();
  for (int it = 0; it < kMaxIter; ++it) {
    bool done = true;
    for (std::size_t k = 0; k < n; ++k) {
      cplx value, deriv;
      detail::horner(c, z[k], value, deriv);
      if (value == cplx(0.0)) continue;
      const cplx ratio = value / deriv;
      cplx repulsion{0.0, 0.0};
      for (std::size_t j = 0; j < n; ++j) {
        if (j != k) repulsion += 1.0 / (z[k] - z[j]);
      }
      const cplx step = ratio / (1.0 - ratio * repulsion);
      if (std::isfinite(step.real()) && std::isfinite(step.imag())) {
        z[k] -= step;
        if (std::abs(step) > 4.0 * eps * (std::abs(z[k]) + bound * eps)) done = false;
      }
    }
    if (done) break;
  }

  for (auto& root : z) {
    for (int polish = 0; polish < 3; ++polish) {
      cplx value, deriv;
      detail::horner(c, root, value, deriv);
      if (deriv == cplx(0.0)) break;
      const cplx candidate = root - value / deriv;
      cplx v2, d2;
      detail::horner(c, candidate, v2, d2);
      if (std::abs(v2) < std::abs(value)) {
        root = candidate;
      } else {
        break;
      }
    }
  }
  return z;
}

namespace detail {

/// tr((z I - M)^{-1}) = sum_i 1 / (z - lambda_i), from an LU factorization of M.
inline bool log_derivative(const Matrix4c& m, cplx z, cplx& out) {
  const Eigen::PartialPivLU<Matrix4c> lu(z * Matrix4c::Identity() - m);
  if (!(lu.matrixLU().diagonal().cwiseAbs().minCoeff() > 1e-300)) return false;
  out = lu.inverse().trace();
  return std::isfinite(out.real()) && std::isfinite(out.imag());
}

/// Simultaneous (Aberth) refinement of the roots flagged in `active`, using the
/// matrix itself rather than the polynomial coefficients.
inline void polish_roots(const Matrix4c& m, std::vector<cplx>& z, const std::vector<bool>& active,
                         double scale) {
  for (int round = 0; round < 64; ++round) {
    bool moved = false;
    for (std::size_t k = 0; k < z.size(); ++k) {
      if (!active[k]) continue;
      cplx n;
      if (!log_derivative(m, z[k], n)) continue;
      cplx repulsion{0.0, 0.0};
      for (std::size_t j = 0; j < z.size(); ++j) {
        if (j != k) repulsion += 1.0 / (z[k] - z[j]);
      }
      const cplx step = 1.0 / (n - repulsion);
      if (!std::isfinite(step.real()) || !std::isfinite(step.imag())) continue;
      z[k] -= step;
      if (std::abs(step) > 1e-16 * scale) moved = true;
    }
    if (!moved) break;
  }
}

}  // namespace detail

struct NumericSpectrum {
  std::array<cplx, 4> eigenvalues{};
  std::array<Vector4c, 4> right_eigenvectors{};
  /// Smallest pairwise angle between normalized eigenvectors; -> 0 where eigenvectors coalesce.
  double min_eigvec_angle{0.0};
  /// Condition number of the (column-normalized) eigenvector matrix.
  double eigvec_condition{1.0};
  /// A cluster of equal eigenvalues has a null space of lower dimension than its multiplicity.
  bool defective{false};
};

/// Angle between two complex directions, insensitive to a global phase.
inline double direction_angle(const Vector4c& a, const Vector4c& b) {
  const Vector4c ua = a.normalized();
  const Vector4c ub = b.normalized();
  const cplx overlap = ua.dot(ub);
  const double perp = (ub - overlap * ua).norm();
  return std::atan2(perp, std::abs(overlap));
}

inline NumericSpectrum numeric_spectrum(const Matrix4c& m) {
  NumericSpectrum out;
  const auto coeffs = characteristic_polynomial(m);
  auto roots = polynomial_roots(coeffs);

  const double scale = std::max(m.cwiseAbs().rowwise().sum().maxCoeff(), 0.0);
  if (scale == 0.0) {
    for (int k = 0; k < 4; ++k) {
      out.eigenvalues[k] = 0.0;
      out.right_eigenvectors[k] = Vector4c::Unit(k);
    }
    out.min_eigvec_angle = M_PI / 2;
    return out;
  }

  // Polynomial coefficients carry cancellation error, so roots that are not
  // numerically repeated are refined against the matrix.
  {
    std::vector<bool> active(roots.size(), true);
    for (std::size_t k = 0; k < roots.size(); ++k) {
      for (std::size_t j = 0; j < roots.size(); ++j) {
        if (j != k && std::abs(roots[j] - roots[k]) <= 1e-10 * scale) active[k] = false;
      }
    }
    detail::polish_roots(m, roots, active, scale);
  }

  std::sort(roots.begin(), roots.end(), [](cplx a, cplx b) {
    if (a.real() != b.real()) return a.real() > b.real();
    return a.imag() > b.imag();
  });

  // Group numerically repeated eigenvalues.
  const double cluster_tol = 1e-7 * scale;
  const double null_tol = 1e-9 * scale;
  std::array<int, 4> cluster{};
  std::iota(cluster.begin(), cluster.end(), 0);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < i; ++j) {
      if (std::abs(roots[i] - roots[j]) <= cluster_tol) {
        cluster[i] = cluster[j];
        break;
      }
    }
  }

  std::array<bool, 4> assigned{};
  for (int i = 0; i < 4; ++i) {
    if (assigned[i]) continue;
    std::vector<int> members;
    cplx mean{0.0, 0.0};
    for (int j = 0; j < 4; ++j) {
      if (cluster[j] == cluster[i]) {
        members.push_back(j);
        mean += roots[j];
      }
    }
    mean /= static_cast<double>(members.size());
    const std::size_t k = members.size();

    Eigen::JacobiSVD<Matrix4c> svd(m - mean * Matrix4c::Identity(), Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    std::size_t null_dim = 0;
    for (int s = 0; s < 4; ++s) {
      if (sv(s) <= null_tol) ++null_dim;
    }

    if (k == 1) {
      out.eigenvalues[members[0]] = roots[members[0]];
      out.right_eigenvectors[members[0]] = svd.matrixV().col(3);
    } else if (null_dim >= k) {
      for (std::size_t r = 0; r < k; ++r) {
        out.eigenvalues[members[r]] = mean;
        out.right_eigenvectors[members[r]] = svd.matrixV().col(static_cast<int>(3 - r));
      }
    } else {
      // Close but possibly distinct roots: use each root's own null vector and
      // call the cluster defective only if those vectors coalesce.
      for (int member : members) {
        Eigen::JacobiSVD<Matrix4c> own(m - roots[member] * Matrix4c::Identity(),
                                       Eigen::ComputeFullV);
        out.eigenvalues[member] = roots[member];
        out.right_eigenvectors[member] = own.matrixV().col(3);
      }
      for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = 0; b < a; ++b) {
          if (direction_angle(out.right_eigenvectors[members[a]], out.right_eigenvectors[members[b]]) <
              1e-3) {
            out.defective = true;
          }
        }
      }
    }
    for (int member : members) assigned[member] = true;
  }

  double min_angle = M_PI / 2;
  Matrix4c vecs;
  for (int i = 0; i < 4; ++i) {
    out.right_eigenvectors[i].normalize();
    vecs.col(i) = out.right_eigenvectors[i];
    for (int j = 0; j < i; ++j) {
      min_angle = std::min(min_angle, direction_angle(out.right_eigenvectors[i],
                                                      out.right_eigenvectors[j]));
    }
  }
  out.min_eigvec_angle = min_angle;
  Eigen::JacobiSVD<Matrix4c> cond_svd(vecs);
  const auto& cs = cond_svd.singularValues();
  out.eigvec_condition = cs(3) > 0.0 ? cs(0) / cs(3) : std::numeric_limits<double>::infinity();
  return out;
}

/// Smallest, over all pairings, of the largest distance between paired entries.
inline double multiset_distance(std::array<cplx, 4> a, std::array<cplx, 4> b) {
  std::array<int, 4> perm{0, 1, 2, 3};
  double best = std::numeric_limits<double>::infinity();
  do {
    double worst = 0.0;
    for (int k = 0; k < 4; ++k) worst = std::max(worst, std::abs(a[k] - b[perm[k]]));
    best = std::min(best, worst);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace catlep

#endif  // CATLEP_NUMERIC_SPECTRUM_HPP
