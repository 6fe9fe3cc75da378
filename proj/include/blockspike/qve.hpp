#pragma once

// Quadratic vector equation for the block variance-profile matrix X / sqrt(N):
//
//   1 = z g_k - g_k (Gamma (g - 1))_k,   k = 1..K,
//
// with g(z) in the upper half plane whenever Im z < 0. The aggregate
// g_X = sum_k rho_k g_k is the Stieltjes transform of the limiting spectral density.

#include <complex>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "blockspike/error.hpp"
#include "blockspike/model.hpp"

namespace blockspike::qve {

using cplx = std::complex<double>;
using Eigen::VectorXcd;

struct QveSolution {
  cplx z;
  VectorXcd g;
  cplx gX;
  double residual = 0.0;  // max_k |g_k (z + (Gamma (1 - g))_k) - 1|
  int iterations = 0;     // fixed-point plus Newton steps, summed over continuation levels
  double eta = 0.0;       // -Im z
};

/// Thrown when the solver gives up; carries the best iterate for diagnostics.
class NoConvergenceError : public Error {
 public:
  NoConvergenceError(std::string operation, const std::string& detail, QveSolution best)
      : Error(Errc::NoConvergence, "qve", std::move(operation), detail), best_(std::move(best)) {}
  const QveSolution& best() const noexcept { return best_; }

 private:
  QveSolution best_;
};

/// Solver knobs. Defaults match the documented contract.
struct SolverOptions {
  double residualTol = 1e-12;
  double newtonTol = 1e-13;
  int maxFixedPoint = 200000;
  int maxNewton = 50;
};

/// Geometric continuation ladder 1, 0.3, 0.1, 0.03, 1e-2, 3e-3, ... ending exactly at etaMin.
std::vector<double> eta_schedule(double etaMin);

/// Solves the QVE at z with Im z < 0. Without a warm start and for small |Im z| the solver
/// walks down eta_schedule(|Im z|) at fixed Re z.
QveSolution solve_complex(const ModelParams& m, cplx z,
                          const std::optional<VectorXcd>& warmStart = std::nullopt,
                          const SolverOptions& opts = {});

/// Aggregate Stieltjes transform at any non-real z. For Im z > 0 the root with Im g < 0 is
/// solved for directly (no reflection), so gX(conj z) = conj(gX(z)) is a genuine check.
cplx stieltjes(const ModelParams& m, cplx z);

/// Positivity certificate that a real QVE root is the analytic continuation.
struct SelectionCertificate {
  VectorXd y;            // (D_g^{-2} - Gamma) y = 1
  double topEig = 0.0;   // lambda_1(D_|g| Omega D_|g|)
  bool yPositive = false;
  bool boundary = false;  // |topEig - 1| <= 1e-9, flagged rather than rejected
  bool accepted = false;
};

SelectionCertificate selection_certificate(const ModelParams& m, const VectorXd& g);

struct RealLineSolution {
  double lambda = 0.0;
  VectorXd g;
  SelectionCertificate certificate;
  double residual = 0.0;
  int newtonIterations = 0;
  double imagProbe = 0.0;  // Im g_X(lambda - i 1e-7) used for the inside-support test
};

/// Continuation of g to a real point outside the support: eta-continuation down to 1e-9,
/// Newton polish on the real equation, then the selection certificate.
/// Throws InsideSupport, NoConvergence or CertificateRejected.
RealLineSolution solve_real(const ModelParams& m, double lambda, const SolverOptions& opts = {});

/// g'(lambda) = (Gamma - D_g^{-2})^{-1} 1. Throws SingularJacobian at the boundary.
VectorXd g_prime(const ModelParams& m, const RealLineSolution& sol);

/// det(I - D_g(lambda) Omega); zeros outside the bulk locate outliers.
double secular(const ModelParams& m, double lambda);

struct DensityCurve {
  std::vector<double> grid;
  std::vector<double> density;                       // Im g_X / pi
  std::vector<std::vector<double>> componentDensities;  // [k][i] = Im g_k / pi
  std::vector<bool> failed;                           // NoConvergence at that abscissa
  double eta = 0.0;
  double maxResidual = 0.0;
  bool herglotz = true;  // Im g_k > 0 at every converged point
};

/// Density by Stieltjes inversion at x - i etaMin, where etaMin is the last entry of
/// `etaSchedule` (strictly decreasing). Points are swept left to right, each warm-started
/// from its neighbour; a point that fails that falls back to its own eta-continuation.
DensityCurve density(const ModelParams& m, const std::vector<double>& grid,
                     const std::vector<double>& etaSchedule);

struct Bracket {
  double lo;
  double hi;
};

struct SupportInfo {
  double rightEdge = 0.0;
  double leftEdge = 0.0;
  std::vector<std::pair<double, double>> intervals;
  double edgeResidual = 0.0;  // |1 - lambda_1(D_g Omega D_g)| at rightEdge + 1e-6
};

/// Default search window: everything the spectrum can reach.
Bracket default_bracket(const ModelParams& m);

/// Rightmost support edge. A downward scan from bracket.hi finds the first point inside the
/// support, bisection on "solve_real succeeds" narrows it, and a Newton step on the fold
/// system {QVE = 0, lambda_1(D_g Omega D_g) = 1} refines it. Throws BracketFailure.
SupportInfo rightmost_edge(const ModelParams& m, std::optional<Bracket> bracket = std::nullopt,
                           double resolution = 1e-8);

/// Leftmost support edge, mirror image of rightmost_edge.
double leftmost_edge(const ModelParams& m, std::optional<Bracket> bracket = std::nullopt,
                     double resolution = 1e-8);

/// Both edges plus support intervals read off a density curve (threshold 1e-6).
SupportInfo support_info(const ModelParams& m, const DensityCurve* curve = nullptr);

/// 2000-point grid on [leftEdge - 0.1, max(1, rightEdge) + 0.2].
std::vector<double> default_grid(const SupportInfo& support, int count = 2000);

}  // namespace blockspike::qve
