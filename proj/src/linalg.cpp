#include "blockspike/linalg.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "blockspike/error.hpp"

namespace blockspike::linalg {

namespace {

void require_finite(const MatrixXd& A, const char* op) {
  if (!A.allFinite()) throw Error(Errc::NonFinite, "linalg", op, "input has NaN or Inf");
}

// Residual of the returned pairs relative to ||A|| (spectral norm of a symmetric A).
double pair_residual(const MatrixXd& A, const VectorXd& values, const MatrixXd& vectors,
                     double anorm) {
  if (values.size() == 0) return 0.0;
  const MatrixXd R = A * vectors - vectors * values.asDiagonal();
  const double scale = anorm > 0.0 ? anorm : 1.0;
  return R.colwise().norm().maxCoeff() / scale;
}

// LAPACK returns ascending order; flip to decreasing.
void to_decreasing(VectorXd& values, MatrixXd* vectors) {
  values.reverseInPlace();
  if (vectors) *vectors = vectors->rowwise().reverse().eval();
}

}  // namespace

EigResult sym_eig(const MatrixXd& A) {
  require_finite(A, "sym_eig");
  const auto n = static_cast<lapack_int>(A.rows());
  if (A.rows() != A.cols()) throw Error(Errc::NonFinite, "linalg", "sym_eig", "matrix not square");
  EigResult out;
  MatrixXd work = 0.5 * (A + A.transpose());
  const MatrixXd sym = work;
  out.values.resize(n);
  if (n > 0) {
    const lapack_int info =
        LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'U', n, work.data(), n, out.values.data());
    if (info != 0)
      throw Error(Errc::NoConvergence, "linalg", "sym_eig", "dsyevd info=" + std::to_string(info));
  }
  out.vectors = std::move(work);
  to_decreasing(out.values, &out.vectors);
  const double anorm = n > 0 ? out.values.cwiseAbs().maxCoeff() : 0.0;
  out.residualBound = pair_residual(sym, out.values, out.vectors, anorm);
  return out;
}

VectorXd sym_eigvals(const MatrixXd& A) {
  require_finite(A, "sym_eigvals");
  const auto n = static_cast<lapack_int>(A.rows());
  MatrixXd work = 0.5 * (A + A.transpose());
  VectorXd values(n);
  if (n > 0) {
    const lapack_int info =
        LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'N', 'U', n, work.data(), n, values.data());
    if (info != 0)
      throw Error(Errc::NoConvergence, "linalg", "sym_eigvals",
                  "dsyevd info=" + std::to_string(info));
  }
  to_decreasing(values, nullptr);
  return values;
}

EigResult sym_eig_topk(const MatrixXd& A, int k, double tol) {
  require_finite(A, "sym_eig_topk");
  const Eigen::Index n = A.rows();
  if (k < 1 || k > n)
    throw Error(Errc::IndexOutOfRange, "linalg", "sym_eig_topk", "k=" + std::to_string(k));

  // Small problems: a dense solve is cheaper than setting up Krylov machinery.
  if (n <= 64) {
    EigResult full = sym_eig(A);
    EigResult out;
    out.values = full.values.head(k);
    out.vectors = full.vectors.leftCols(k);
    out.residualBound = full.residualBound;
    return out;
  }

  const MatrixXd S = 0.5 * (A + A.transpose());
  const Eigen::Index maxDim = std::min<Eigen::Index>(n, std::max<Eigen::Index>(4 * k + 40, 240));
  constexpr int kMaxRestarts = 30;

  std::mt19937_64 rng(0x9E3779B97F4A7C15ULL);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  VectorXd start(n);
  for (Eigen::Index i = 0; i < n; ++i) start(i) = uni(rng);
  start.normalize();

  MatrixXd V(n, maxDim + 1);
  VectorXd alpha(maxDim), beta(maxDim);
  EigResult out;

  for (int restart = 0; restart <= kMaxRestarts; ++restart) {
    V.col(0) = start;
    Eigen::Index dim = 0;
    bool converged = false;
    Eigen::SelfAdjointEigenSolver<MatrixXd> tri;
    double anorm = 0.0;

    for (Eigen::Index j = 0; j < maxDim; ++j) {
      VectorXd w = S * V.col(j);
      alpha(j) = V.col(j).dot(w);
      // Two passes of classical Gram-Schmidt against the whole basis.
      for (int pass = 0; pass < 2; ++pass) {
        const VectorXd coef = V.leftCols(j + 1).transpose() * w;
        w.noalias() -= V.leftCols(j + 1) * coef;
      }
      beta(j) = w.norm();
      dim = j + 1;

      const bool last = (j + 1 == maxDim);
      const bool check = dim >= k && ((dim % 10) == 0 || last || beta(j) < 1e-300);
      if (check || beta(j) == 0.0) {
        tri.computeFromTridiagonal(alpha.head(dim), beta.head(dim - 1), Eigen::ComputeEigenvectors);
        const VectorXd& theta = tri.eigenvalues();  // ascending
        anorm = std::max(std::abs(theta(0)), std::abs(theta(dim - 1)));
        bool ok = dim >= k;
        for (int i = 0; i < k && ok; ++i) {
          const double est = beta(j) * std::abs(tri.eigenvectors()(dim - 1, dim - 1 - i));
          ok = est <= 0.1 * tol * std::max(anorm, 1e-300);
        }
        if (ok) {
          converged = true;
          break;
        }
      }
      if (beta(j) <= 1e-14 * std::max(anorm, std::abs(alpha(j)))) break;  // invariant subspace
      V.col(j + 1) = w / beta(j);
    }

    if (!converged || tri.eigenvalues().size() != dim) {
      tri.computeFromTridiagonal(alpha.head(dim), beta.head(std::max<Eigen::Index>(dim - 1, 0)),
                                 Eigen::ComputeEigenvectors);
    }
    const int kk = static_cast<int>(std::min<Eigen::Index>(k, dim));
    out.values.resize(kk);
    out.vectors.resize(n, kk);
    for (int i = 0; i < kk; ++i) {
      out.values(i) = tri.eigenvalues()(dim - 1 - i);
      out.vectors.col(i) = V.leftCols(dim) * tri.eigenvectors().col(dim - 1 - i);
      out.vectors.col(i).normalize();
    }
    anorm = std::max(std::abs(tri.eigenvalues()(0)), std::abs(tri.eigenvalues()(dim - 1)));
    out.residualBound = pair_residual(S, out.values, out.vectors, anorm);
    if (kk == k && out.residualBound <= tol) return out;

    start = out.vectors.rowwise().sum();
    if (kk < k || start.norm() == 0.0) {
      for (Eigen::Index i = 0; i < n; ++i) start(i) += uni(rng);
    }
    start.normalize();
  }
  throw Error(Errc::NoConvergence, "linalg", "sym_eig_topk",
              "residual " + std::to_string(out.residualBound) + " after restarts");
}

PerronPair perron_pair(const MatrixXd& A) {
  require_finite(A, "perron_pair");
  const Eigen::Index n = A.rows();
  if (n == 0 || A.cols() != n)
    throw Error(Errc::IndexOutOfRange, "linalg", "perron_pair", "matrix must be square, nonempty");
  if ((A.array() <= 0.0).any())
    throw Error(Errc::NonPositiveEntry, "linalg", "perron_pair", "entries must be positive");

  const double anorm = A.norm();
  PerronPair out;
  VectorXd v = VectorXd::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
  for (int it = 1; it <= 10000; ++it) {
    VectorXd w = A * v;
    const double lambda = w.norm();
    w /= lambda;
    const double res = (A * w - lambda * w).norm();
    v = std::move(w);
    if (res <= 1e-12 * anorm) {
      out.value = (A * v).dot(v) / v.squaredNorm();
      out.vector = v;
      out.iterations = it;
      return out;
    }
  }
  throw Error(Errc::NoConvergence, "linalg", "perron_pair", "10^4 power iterations");
}

VectorXd solve_linear(const MatrixXd& A, const VectorXd& b) {
  if (!A.allFinite() || !b.allFinite())
    throw Error(Errc::NonFinite, "linalg", "solve_linear", "input has NaN or Inf");
  if (A.rows() != A.cols() || A.rows() != b.size())
    throw Error(Errc::IndexOutOfRange, "linalg", "solve_linear", "dimension mismatch");
  Eigen::PartialPivLU<MatrixXd> lu(A);
  if (!(lu.rcond() > 1e-14)) throw Error(Errc::Singular, "linalg", "solve_linear", "rcond < 1e-14");
  VectorXd x = lu.solve(b);
  x += lu.solve(b - A * x);  // one refinement step
  return x;
}

double sym_opnorm(const MatrixXd& A) {
  if (A.size() == 0) return 0.0;
  return sym_eigvals(A).cwiseAbs().maxCoeff();
}

}  // namespace blockspike::linalg
