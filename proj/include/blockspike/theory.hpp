#pragma once

#include <string_view>

#include <Eigen/Dense>

#include "blockspike/model.hpp"
#include "blockspike/qve.hpp"

namespace blockspike::theory {

enum class Phase { Subcritical, Critical, Supercritical };

std::string_view to_string(Phase phase);

/// |snr - 1| <= kCriticalTol is treated as the transition itself.
inline constexpr double kCriticalTol = 1e-9;

Phase phase(const ModelParams& m);

/// g(1): 1_K below the transition, the certified real continuation above it.
/// Throws CriticalPhase at the transition.
VectorXd g_at_one(const ModelParams& m);

/// Eigen-decomposition of D_g(lambda) Omega through the symmetric D_sqrt(g) Omega D_sqrt(g).
/// Right/left vectors are biorthonormal: wLeft^T wRight = I.
struct SpectralDecomp {
  VectorXd phi;     // decreasing
  MatrixXd wRight;  // columns
  MatrixXd wLeft;
};

SpectralDecomp spectral_decomp(const ModelParams& m, const VectorXd& g);

struct SpikeVectors {
  VectorXd right;  // D_sqrt(rho) (1 - g(1))
  VectorXd left;   // Omega D_sqrt(rho) (1 - g(1))
  double rightResidual = 0.0;  // ||D_g Omega right - right||
  double leftResidual = 0.0;   // ||(D_g Omega)^T left - left||
};

/// Supercritical only (NotSupercritical otherwise).
SpikeVectors spike_eigvectors(const ModelParams& m);

struct OverlapConstant {
  double C = 0.0;         // with yPos = (D_g(1)^{-2} - Gamma)^{-1} 1 = -g'(1), positive
  VectorXd yPos;
  double CAltSign = 0.0;  // same quadratic form with y = (Gamma - D^{-2})^{-1} 1 = g'(1)
};

/// C = <1 - g(1), Gamma^T D_(rho * yPos) Gamma (1 - g(1))>. Throws NotSupercritical, or
/// SignAnomaly if yPos is not entrywise positive.
OverlapConstant overlap_constant(const ModelParams& m);

struct Phi1Derivative {
  double finiteDifference = 0.0;  // central difference of phi_1 at 1 +- step
  double closedForm = 0.0;        // <vLeft, D_g'(1) Omega vRight> / <vLeft, vRight>
  double pairing = 0.0;           // <vLeft, vRight>
  double phiAtOne = 0.0;
  double step = 0.0;
};

/// phi_1(lambda) = lambda_1(D_g(lambda) Omega) and its derivative at 1. The overlap
/// constant satisfies C = -phi_1'(1) <vLeft, vRight>.
Phi1Derivative phi1_derivative(const ModelParams& m, double step = 1e-5);

struct TheoryPrediction {
  Phase phase = Phase::Subcritical;
  double snr = 0.0;
  double topEigLimit = 0.0;
  double rightEdge = 0.0;
  VectorXd gAtOne;
  double C = 0.0;
  double CAltSign = 0.0;
  VectorXd overlapAbs;
  double overlapGlobal = 0.0;
  VectorXd vRight;
  VectorXd vLeft;
  double phi1prime = 0.0;
  double secularAtOne = 0.0;
  bool critical = false;
  // solver metadata
  double gResidual = 0.0;
  double certificateTopEig = 0.0;
  int newtonIterations = 0;
  double edgeResidual = 0.0;
};

TheoryPrediction predict(const ModelParams& m);

}  // namespace blockspike::theory
