#pragma once

// Dense symmetric linear algebra: Cholesky, cyclic Jacobi eigensolver and the
// Cholesky-whitened generalized symmetric eigensolver (A v = lambda B v).
//
// All routines are pure functions templated on the scalar type; the rest of
// the library instantiates them with double.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mvcca/error.hpp"

namespace mvcca {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = Mat<double>;
using Vector = Vec<double>;

/// Eigenvalues sorted descending; column k of `eigenvectors` pairs with
/// eigenvalue k.
template <typename Scalar>
struct EigenDecomposition {
  Vec<Scalar> eigenvalues;
  Mat<Scalar> eigenvectors;
};

namespace linalg {

inline constexpr int kMaxJacobiSweeps = 100;

template <typename Scalar>
inline constexpr Scalar kSymmetryTolerance = Scalar(1e-12);

template <typename Scalar>
inline constexpr Scalar kJacobiTolerance = Scalar(1e-12);

template <typename Scalar>
inline constexpr Scalar kPivotFloor = Scalar(1e-300);

namespace detail {

template <typename Derived>
void require_square(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() < 1) {
    throw Error(ErrorKind::DimensionMismatch,
                std::string(what) + " must be square and non-empty, got " +
                    std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

// Checks symmetry within the relative tolerance and returns (M + M^T) / 2.
template <typename Derived>
Mat<typename Derived::Scalar> symmetrized(const Eigen::MatrixBase<Derived>& m,
                                          const char* what) {
  using Scalar = typename Derived::Scalar;
  require_square(m, what);
  const Scalar scale = m.norm();
  const Scalar skew = (m - m.transpose()).norm();
  if (!(skew <= kSymmetryTolerance<Scalar> * scale)) {
    throw Error(ErrorKind::NotSymmetric,
                std::string(what) + " asymmetry " + std::to_string(skew) +
                    " exceeds tolerance relative to norm " +
                    std::to_string(scale));
  }
  return (m + m.transpose()) / Scalar(2);
}

// Largest-magnitude entry made positive; ties resolved by the lowest index.
template <typename Scalar>
void fix_signs(Mat<Scalar>& vectors) {
  for (Eigen::Index k = 0; k < vectors.cols(); ++k) {
    Eigen::Index arg = 0;
    Scalar best = Scalar(-1);
    for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
      const Scalar mag = std::abs(vectors(i, k));
      if (mag > best) {
        best = mag;
        arg = i;
      }
    }
    if (vectors(arg, k) < Scalar(0)) vectors.col(k) *= Scalar(-1);
  }
}

template <typename Scalar>
EigenDecomposition<Scalar> sorted(const Vec<Scalar>& values,
                                  const Mat<Scalar>& vectors) {
  const auto n = values.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) {
                     return values(a) > values(b);
                   });
  EigenDecomposition<Scalar> out;
  out.eigenvalues.resize(n);
  out.eigenvectors.resize(vectors.rows(), n);
  for (Eigen::Index k = 0; k < n; ++k) {
    out.eigenvalues(k) = values(order[static_cast<std::size_t>(k)]);
    out.eigenvectors.col(k) = vectors.col(order[static_cast<std::size_t>(k)]);
  }
  fix_signs(out.eigenvectors);
  return out;
}

template <typename Scalar>
Scalar off_diagonal_norm(const Mat<Scalar>& a) {
  Scalar sum = 0;
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      if (i != j) sum += a(i, j) * a(i, j);
    }
  }
  return std::sqrt(sum);
}

// Cyclic Jacobi on an exactly symmetric matrix. Rotations update the two
// affected columns (contiguous in column-major storage) and mirror them into
// the rows, so the working matrix stays exactly symmetric.
template <typename Scalar>
EigenDecomposition<Scalar> jacobi(Mat<Scalar> a, int max_sweeps = kMaxJacobiSweeps) {
  const Eigen::Index n = a.rows();
  Mat<Scalar> v = Mat<Scalar>::Identity(n, n);
  const Scalar target = kJacobiTolerance<Scalar> * a.norm();

  bool converged = off_diagonal_norm(a) <= target;
  for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    for (Eigen::Index p = 0; p + 1 < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const Scalar apq = a(p, q);
        if (apq == Scalar(0)) continue;
        const Scalar app = a(p, p);
        const Scalar aqq = a(q, q);
        // Rotations that cannot change either diagonal entry are dropped.
        if (sweep > 3 && std::abs(app) + Scalar(100) * std::abs(apq) == std::abs(app) &&
            std::abs(aqq) + Scalar(100) * std::abs(apq) == std::abs(aqq)) {
          a(p, q) = a(q, p) = Scalar(0);
          continue;
        }
        const Scalar tau = (aqq - app) / (Scalar(2) * apq);
        const Scalar t = (tau >= Scalar(0) ? Scalar(1) : Scalar(-1)) /
                         (std::abs(tau) + std::sqrt(Scalar(1) + tau * tau));
        const Scalar c = Scalar(1) / std::sqrt(Scalar(1) + t * t);
        const Scalar s = t * c;

        Scalar* colp = a.col(p).data();
        Scalar* colq = a.col(q).data();
        for (Eigen::Index k = 0; k < n; ++k) {
          const Scalar xp = colp[k];
          const Scalar xq = colq[k];
          colp[k] = c * xp - s * xq;
          colq[k] = s * xp + c * xq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          a(p, k) = colp[k];
          a(q, k) = colq[k];
        }
        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = a(q, p) = Scalar(0);

        Scalar* vp = v.col(p).data();
        Scalar* vq = v.col(q).data();
        for (Eigen::Index k = 0; k < n; ++k) {
          const Scalar xp = vp[k];
          const Scalar xq = vq[k];
          vp[k] = c * xp - s * xq;
          vq[k] = s * xp + c * xq;
        }
      }
    }
    converged = off_diagonal_norm(a) <= target;
  }
  if (!converged) {
    throw Error(ErrorKind::NoConvergence,
                "Jacobi eigensolver did not converge in " +
                    std::to_string(max_sweeps) + " sweeps");
  }
  return sorted<Scalar>(a.diagonal(), v);
}

}  // namespace detail

/// Lower-triangular L with L L^T = M. Throws NotPositiveDefinite when a pivot
/// falls to 1e-300 or below (singular or indefinite input; regularize).
template <typename Derived>
Mat<typename Derived::Scalar> cholesky(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  const Mat<Scalar> s = detail::symmetrized(m, "cholesky input");
  const Eigen::Index n = s.rows();
  Mat<Scalar> l = Mat<Scalar>::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Scalar pivot =
        s(j, j) - l.row(j).head(j).squaredNorm();
    if (!(pivot > kPivotFloor<Scalar>)) {
      throw Error(ErrorKind::NotPositiveDefinite,
                  "pivot " + std::to_string(pivot) + " at index " +
                      std::to_string(j));
    }
    const Scalar diag = std::sqrt(pivot);
    l(j, j) = diag;
    const Eigen::Index below = n - j - 1;
    if (below > 0) {
      l.col(j).tail(below) =
          (s.col(j).tail(below) -
           l.bottomLeftCorner(below, j) * l.row(j).head(j).transpose()) /
          diag;
    }
  }
  return l;
}

/// Standard symmetric eigendecomposition by cyclic Jacobi (at most 100 sweeps,
/// converged when the off-diagonal Frobenius norm is <= 1e-12 ||M||_F).
/// Eigenvalues descend; each eigenvector has unit norm and a positive
/// largest-magnitude entry.
template <typename Derived>
EigenDecomposition<typename Derived::Scalar> symmetric_eigen(
    const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  return detail::jacobi<Scalar>(detail::symmetrized(m, "eigen input"));
}

/// Solves A v = lambda B v for symmetric A and SPD B via B = L L^T, the
/// standard problem on L^-1 A L^-T, and v = L^-T u. Eigenvectors are
/// B-orthonormal.
template <typename DerivedA, typename DerivedB>
EigenDecomposition<typename DerivedA::Scalar> generalized_symmetric_eigen(
    const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  detail::require_square(a, "A");
  detail::require_square(b, "B");
  if (a.rows() != b.rows()) {
    throw Error(ErrorKind::DimensionMismatch,
                "A is " + std::to_string(a.rows()) + "x" +
                    std::to_string(a.cols()) + " but B is " +
                    std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  const Mat<Scalar> sym_a = detail::symmetrized(a, "A");
  const Mat<Scalar> l = cholesky(b);
  const auto lower = l.template triangularView<Eigen::Lower>();

  Mat<Scalar> whitened = lower.solve(sym_a);
  whitened = lower.solve(whitened.transpose().eval());
  whitened = ((whitened + whitened.transpose()) / Scalar(2)).eval();

  EigenDecomposition<Scalar> standard = detail::jacobi<Scalar>(whitened);
  Mat<Scalar> vectors = l.transpose().template triangularView<Eigen::Upper>().solve(
      standard.eigenvectors);
  detail::fix_signs(vectors);
  return {std::move(standard.eigenvalues), std::move(vectors)};
}

}  // namespace linalg
}  // namespace mvcca
