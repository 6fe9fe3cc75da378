#pragma once

#include <Eigen/Dense>

namespace blockspike::linalg {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Eigenpairs sorted by decreasing eigenvalue; column i of `vectors` pairs with values(i).
struct EigResult {
  VectorXd values;
  MatrixXd vectors;
  /// max_i ||A v_i - values_i v_i|| / ||A|| over the returned pairs.
  double residualBound = 0.0;
};

/// Full symmetric eigendecomposition. The input is symmetrized as (A + A^T)/2 first.
/// Throws Errc::NonFinite on NaN/Inf entries.
EigResult sym_eig(const MatrixXd& A);

/// Eigenvalues only, decreasing. Same preconditions as sym_eig.
VectorXd sym_eigvals(const MatrixXd& A);

/// Top `k` eigenpairs of a symmetric matrix by Lanczos with full reorthogonalization
/// and explicit restarts. Deterministic: the start vector comes from a fixed seed.
EigResult sym_eig_topk(const MatrixXd& A, int k, double tol = 1e-7);

struct PerronPair {
  double value = 0.0;
  VectorXd vector;  // unit norm, entrywise positive
  int iterations = 0;
};

/// Perron root and vector of an entrywise-positive matrix (not necessarily symmetric)
/// by normalized power iteration. Throws NoConvergence after 10^4 iterations.
PerronPair perron_pair(const MatrixXd& A);

/// Solves A x = b with partial-pivot LU. Throws Errc::Singular when the reciprocal
/// condition estimate drops below 1e-14.
VectorXd solve_linear(const MatrixXd& A, const VectorXd& b);

/// Operator 2-norm of a symmetric matrix.
double sym_opnorm(const MatrixXd& A);

}  // namespace blockspike::linalg
