#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "kprune/errors.hpp"
#include "kprune/types.hpp"

namespace kprune {

/// Symmetric matrix diag(d) + b b^T in factored form.
struct DiagPlusRankOne {
  Vector d;
  Vector b;
};

/// Full eigendecomposition, eigenvalues ascending, eigenvectors as columns.
struct EigenPairs {
  Vector values;
  Matrix vectors;
};

/// Thin QR factors of a tall matrix: q has orthonormal columns, r is upper
/// triangular with nonnegative diagonal (sign convention makes the
/// factorization unique).
struct ThinQr {
  Matrix q;
  Matrix r;
};

/// Thin Householder QR with the nonnegative-diagonal sign convention.
inline ThinQr thin_qr(const Matrix& m) {
  const Index rows = m.rows();
  const Index cols = m.cols();
  if (rows < cols) throw InvalidInputError("thin_qr: matrix has more columns than rows");
  Eigen::HouseholderQR<Matrix> qr(m);
  ThinQr out;
  out.q = qr.householderQ() * Matrix::Identity(rows, cols);
  out.r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
  for (Index j = 0; j < cols; ++j) {
    if (out.r(j, j) < 0.0) {
      out.r.row(j) = -out.r.row(j);
      out.q.col(j) = -out.q.col(j);
    }
  }
  return out;
}

/// Restores orthonormality of a drifted basis. The column space is preserved
/// exactly; an already orthonormal input is returned essentially unchanged
/// because of the sign convention in thin_qr.
inline Matrix reorthonormalize(const Matrix& q) {
  if (q.size() == 0) throw InvalidInputError("reorthonormalize: empty input");
  const Matrix gram = q.transpose() * q;
  const double residual =
      (gram - Matrix::Identity(q.cols(), q.cols())).cwiseAbs().maxCoeff();
  if (!std::isfinite(residual) || residual >= 0.1) {
    throw PreconditionError(
        "reorthonormalize: input is not close to orthonormal (residual " +
        std::to_string(residual) + ")");
  }
  return thin_qr(q).q;
}

/// Replaces the thin QR factors of some tall matrix M by those of M * t
/// without touching the tall dimension beyond one product: with C = r * t and
/// C = Q_C R_C, the result is (q * Q_C, R_C).
inline ThinQr incremental_qr_update(const ThinQr& qr, const Matrix& t) {
  const Index s = qr.q.cols();
  if (qr.r.rows() != s || qr.r.cols() != s)
    throw InvalidInputError("incremental_qr_update: factor shapes disagree");
  if (t.rows() != s || t.cols() < 1 || t.cols() > s)
    throw InvalidInputError("incremental_qr_update: transform has wrong shape");
  if (!t.allFinite()) throw InvalidInputError("incremental_qr_update: non-finite transform");

  const Matrix c = qr.r * t;
  ThinQr small = thin_qr(c);
  const double scale = small.r.diagonal().cwiseAbs().maxCoeff();
  const double rank_tol = 1e-10 * scale;
  for (Index j = 0; j < small.r.cols(); ++j) {
    if (!(std::abs(small.r(j, j)) > rank_tol)) {
      throw RankDeficiencyError(
          "incremental_qr_update: transformed factor is rank deficient at column " +
          std::to_string(j),
          "C = R*t", j);
    }
  }
  ThinQr out;
  out.q.noalias() = qr.q * small.q;
  out.r = std::move(small.r);
  return out;
}

namespace detail {

struct SecularRoot {
  Index origin;  // index (into the reduced diagonal) of the pole the shift is anchored at
  double mu;     // eigenvalue = d[origin] + mu
};

/// Secular function value f(mu) = 1 + sum z_i^2 / (delta_i - mu) along with
/// the absolute sum of terms (for noise-floor stopping) split into the
/// derivative as well.
struct SecularEval {
  double f;
  double df;
  double abs_sum;
};

inline SecularEval eval_secular(const Vector& delta, const Vector& z2, double mu) {
  SecularEval e{1.0, 0.0, 1.0};
  for (Index i = 0; i < delta.size(); ++i) {
    const double inv = 1.0 / (delta(i) - mu);
    const double term = z2(i) * inv;
    e.f += term;
    e.df += term * inv;
    e.abs_sum += std::abs(term);
  }
  return e;
}

/// Finds the root of the secular function in the open interval bracketed by
/// (lo, hi) in shifted coordinates. Uses a two-pole rational interpolation
/// step with bisection fallback; f is strictly increasing on the interval.
///
/// delta holds the pole positions relative to the chosen origin; left_pole and
/// right_pole are positions of the interval endpoints in the same coordinates
/// (right_pole is NaN for the half-infinite last interval). split is the index
/// separating the pole groups used in the interpolation model.
inline double solve_secular_interval(const Vector& delta, const Vector& z2, Index split,
                                     double left_pole, double right_pole, double lo,
                                     double hi, double tol, double abs_lo, double abs_hi) {
  constexpr int kMaxIter = 100;
  const double eps = std::numeric_limits<double>::epsilon();
  const bool has_right = std::isfinite(right_pole);

  double mu = 0.5 * (lo + hi);
  for (int iter = 0; iter < kMaxIter; ++iter) {
    // Split evaluation into the pole groups left/right of the interval.
    double psi = 0.0, dpsi = 0.0, phi = 0.0, dphi = 0.0, abs_sum = 1.0;
    for (Index i = 0; i < delta.size(); ++i) {
      const double inv = 1.0 / (delta(i) - mu);
      const double term = z2(i) * inv;
      abs_sum += std::abs(term);
      if (i <= split) {
        psi += term;
        dpsi += term * inv;
      } else {
        phi += term;
        dphi += term * inv;
      }
    }
    const double f = 1.0 + psi + phi;
    if (std::abs(f) <= tol * abs_sum) return mu;
    if (f < 0.0)
      lo = mu;
    else
      hi = mu;

    // Rational model: psi ~ s1 + p/(xL - mu), phi ~ s2 + q/(xR - mu), fitted
    // to value and derivative at the current iterate.
    const double xl = left_pole;
    const double p = dpsi * (xl - mu) * (xl - mu);
    const double s1 = psi - dpsi * (xl - mu);
    double q = 0.0, s2 = 0.0;
    if (has_right) {
      const double xr = right_pole;
      q = dphi * (xr - mu) * (xr - mu);
      s2 = phi - dphi * (xr - mu);
    } else {
      s2 = phi;  // no pole to the right; absorb as constant
    }
    const double a0 = 1.0 + s1 + s2;

    double cand = std::numeric_limits<double>::quiet_NaN();
    if (has_right) {
      // a0 (xL-mu)(xR-mu) + p (xR-mu) + q (xL-mu) = 0, quadratic in mu.
      const double xr = right_pole;
      const double qa = a0;
      const double qb = -(a0 * (xl + xr) + p + q);
      const double qc = a0 * xl * xr + p * xr + q * xl;
      const double disc = qb * qb - 4.0 * qa * qc;
      if (disc >= 0.0) {
        const double sq = std::sqrt(disc);
        const double r1 = (std::abs(qa) > 0.0) ? (-qb - (qb >= 0 ? sq : -sq)) / (2.0 * qa)
                                               : std::numeric_limits<double>::quiet_NaN();
        const double r2 = (std::isfinite(r1) && r1 != 0.0 && std::abs(qa) > 0.0)
                              ? qc / (qa * r1)
                              : ((qb != 0.0) ? -qc / qb : std::numeric_limits<double>::quiet_NaN());
        if (std::isfinite(r1) && r1 > lo && r1 < hi)
          cand = r1;
        else if (std::isfinite(r2) && r2 > lo && r2 < hi)
          cand = r2;
      }
    } else if (a0 > 0.0) {
      cand = xl + p / a0;
    }
    const double prev = mu;
    if (std::isfinite(cand) && cand > lo && cand < hi)
      mu = cand;
    else
      mu = 0.5 * (lo + hi);
    if (std::abs(mu - prev) <= 8.0 * eps * std::max(std::abs(mu), std::abs(prev))) return mu;
    if (hi - lo <= 4.0 * eps * std::max(std::abs(lo), std::abs(hi))) return 0.5 * (lo + hi);
  }
  throw ConvergenceError("secular_eigen: root iteration exceeded cap in interval [" +
                             std::to_string(abs_lo) + ", " + std::to_string(abs_hi) + "]",
                         abs_lo, abs_hi);
}

}  // namespace detail

/// All eigenpairs of diag(d) + b b^T in O(m^2) arithmetic: deflation (small
/// rank-one components and matching diagonal pairs), one secular root per
/// interval, then eigenvectors from a corrected rank-one vector recomputed
/// from the converged roots so that orthogonality holds even for clustered
/// diagonals.
inline EigenPairs secular_eigen(const DiagPlusRankOne& problem, double tol = 1e-12) {
  const Index m = problem.d.size();
  if (m == 0 || problem.b.size() != m)
    throw InvalidInputError("secular_eigen: dimension mismatch or empty problem");
  if (!problem.d.allFinite() || !problem.b.allFinite())
    throw InvalidInputError("secular_eigen: non-finite input");
  if (!(tol > 0.0)) throw InvalidInputError("secular_eigen: tolerance must be positive");

  const double norm_b = problem.b.norm();

  // Sort the diagonal ascending; work in sorted coordinates throughout.
  std::vector<Index> perm(static_cast<size_t>(m));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::stable_sort(perm.begin(), perm.end(),
                   [&](Index i, Index j) { return problem.d(i) < problem.d(j); });
  Vector ds(m), zs(m);
  for (Index p = 0; p < m; ++p) {
    ds(p) = problem.d(perm[static_cast<size_t>(p)]);
    zs(p) = problem.b(perm[static_cast<size_t>(p)]);
  }

  const double tol_defl = 1e-14;
  const double tol_z = tol_defl * norm_b;
  const double tol_d = tol_defl * (m > 0 ? ds.cwiseAbs().maxCoeff() : 0.0);

  // Deflation stage 1: negligible rank-one components.
  std::vector<bool> active(static_cast<size_t>(m));
  for (Index p = 0; p < m; ++p) active[static_cast<size_t>(p)] = std::abs(zs(p)) > tol_z;

  // Deflation stage 2: rotate matching diagonal pairs so one component of z
  // vanishes. Rotations are recorded and undone on the eigenvectors.
  struct Rotation {
    Index i, j;
    double c, s;
  };
  std::vector<Rotation> rotations;
  Index prev = -1;
  for (Index p = 0; p < m; ++p) {
    if (!active[static_cast<size_t>(p)]) continue;
    if (prev >= 0 && std::abs(ds(p) - ds(prev)) <= tol_d) {
      const double r = std::hypot(zs(prev), zs(p));
      const double c = zs(prev) / r;
      const double s = zs(p) / r;
      const double di = ds(prev), dj = ds(p);
      ds(prev) = c * c * di + s * s * dj;
      ds(p) = s * s * di + c * c * dj;
      zs(prev) = r;
      zs(p) = 0.0;
      active[static_cast<size_t>(p)] = false;
      rotations.push_back({prev, p, c, s});
    } else {
      prev = p;
    }
  }

  std::vector<Index> k_idx;
  for (Index p = 0; p < m; ++p)
    if (active[static_cast<size_t>(p)]) k_idx.push_back(p);
  const Index r = static_cast<Index>(k_idx.size());

  Vector values(m);
  Matrix vectors = Matrix::Zero(m, m);

  // Deflated pairs are eigenpairs of the (rotated) problem directly.
  for (Index p = 0; p < m; ++p) {
    if (!active[static_cast<size_t>(p)]) {
      values(p) = ds(p);
      vectors(p, p) = 1.0;
    }
  }

  if (r > 0) {
    Vector dk(r), zk(r), z2(r);
    for (Index i = 0; i < r; ++i) {
      dk(i) = ds(k_idx[static_cast<size_t>(i)]);
      zk(i) = zs(k_idx[static_cast<size_t>(i)]);
      z2(i) = zk(i) * zk(i);
    }
    const double rho = z2.sum();

    std::vector<detail::SecularRoot> roots(static_cast<size_t>(r));
    if (r == 1) {
      roots[0] = {0, z2(0)};
    } else {
      for (Index k = 0; k < r; ++k) {
        if (k + 1 < r) {
          const double width = dk(k + 1) - dk(k);
          // Choose the origin nearest the root by the sign of f at midpoint.
          Vector delta_l = dk.array() - dk(k);
          const auto mid = detail::eval_secular(delta_l, z2, 0.5 * width);
          if (mid.f >= 0.0) {
            const double mu = detail::solve_secular_interval(
                delta_l, z2, k, 0.0, width, 0.0, 0.5 * width, tol, dk(k), dk(k) + 0.5 * width);
            roots[static_cast<size_t>(k)] = {k, mu};
          } else {
            Vector delta_r = dk.array() - dk(k + 1);
            const double mu = detail::solve_secular_interval(
                delta_r, z2, k, -width, 0.0, -0.5 * width, 0.0, tol,
                dk(k) + 0.5 * width, dk(k + 1));
            roots[static_cast<size_t>(k)] = {k + 1, mu};
          }
        } else {
          Vector delta_l = dk.array() - dk(r - 1);
          const double mu = detail::solve_secular_interval(
              delta_l, z2, r - 1, 0.0, std::numeric_limits<double>::quiet_NaN(), 0.0, rho,
              tol, dk(r - 1), dk(r - 1) + rho);
          roots[static_cast<size_t>(k)] = {r - 1, mu};
        }
      }
    }

    // Corrected rank-one vector from the converged roots (Gu-Eisenstat): with
    // it, analytically exact eigenvector formulas stay orthogonal in floating
    // point. All differences are formed through the shifted representation.
    auto root_minus_d = [&](Index k, Index i) {
      const auto& rt = roots[static_cast<size_t>(k)];
      return (dk(rt.origin) - dk(i)) + rt.mu;
    };
    Vector z_hat(r);
    for (Index i = 0; i < r; ++i) {
      double prod = root_minus_d(i, i);
      for (Index k = 0; k < r; ++k) {
        if (k == i) continue;
        prod *= root_minus_d(k, i) / (dk(k) - dk(i));
      }
      z_hat(i) = (zk(i) < 0.0 ? -1.0 : 1.0) * std::sqrt(std::max(prod, 0.0));
    }

    for (Index k = 0; k < r; ++k) {
      Vector w(r);
      for (Index i = 0; i < r; ++i) w(i) = z_hat(i) / (-root_minus_d(k, i));
      w.normalize();
      const Index pos = k_idx[static_cast<size_t>(k)];
      values(pos) = dk(roots[static_cast<size_t>(k)].origin) + roots[static_cast<size_t>(k)].mu;
      for (Index i = 0; i < r; ++i) vectors(k_idx[static_cast<size_t>(i)], pos) = w(i);
    }
  }

  // Undo the deflation rotations (rows), then the sorting permutation.
  for (auto it = rotations.rbegin(); it != rotations.rend(); ++it) {
    const Vector vi = vectors.row(it->i);
    const Vector vj = vectors.row(it->j);
    vectors.row(it->i) = it->c * vi - it->s * vj;
    vectors.row(it->j) = it->s * vi + it->c * vj;
  }
  Matrix vec_full(m, m);
  for (Index p = 0; p < m; ++p) vec_full.row(perm[static_cast<size_t>(p)]) = vectors.row(p);

  // Final ascending sort of the assembled eigenvalues (deflated values can
  // interleave the secular roots). Ties are broken by lexicographic
  // comparison of the eigenvector entries so results are deterministic.
  std::vector<Index> order(static_cast<size_t>(m));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    if (values(a) != values(b)) return values(a) < values(b);
    for (Index i = 0; i < m; ++i) {
      if (vec_full(i, a) != vec_full(i, b)) return vec_full(i, a) < vec_full(i, b);
    }
    return false;
  });
  EigenPairs out;
  out.values.resize(m);
  out.vectors.resize(m, m);
  for (Index p = 0; p < m; ++p) {
    out.values(p) = values(order[static_cast<size_t>(p)]);
    out.vectors.col(p) = vec_full.col(order[static_cast<size_t>(p)]);
  }
  return out;
}

}  // namespace kprune
