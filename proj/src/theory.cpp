#include "blockspike/theory.hpp"

#include <cmath>

#include "blockspike/error.hpp"
#include "blockspike/linalg.hpp"

namespace blockspike::theory {

namespace {

void require_supercritical(const ModelParams& m, const char* op) {
  if (phase(m) != Phase::Supercritical)
    throw Error(Errc::NotSupercritical, "theory", op, "snr = " + std::to_string(omega(m).snr));
}

// phi_1(lambda) through the symmetrization, valid for g > 0.
double phi1_at(const ModelParams& m, const MatrixXd& Om, double lambda) {
  const VectorXd sg = qve::solve_real(m, lambda).g.cwiseSqrt();
  return linalg::sym_eig(sg.asDiagonal() * Om * sg.asDiagonal()).values(0);
}

}  // namespace

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::Subcritical: return "subcritical";
    case Phase::Critical: return "critical";
    case Phase::Supercritical: return "supercritical";
  }
  return "unknown";
}

Phase phase(const ModelParams& m) {
  const double snr = omega(m).snr;
  if (snr < 1.0 - kCriticalTol) return Phase::Subcritical;
  if (snr > 1.0 + kCriticalTol) return Phase::Supercritical;
  return Phase::Critical;
}

VectorXd g_at_one(const ModelParams& m) {
  const Phase ph = phase(m);
  if (ph == Phase::Critical) throw Error(Errc::CriticalPhase, "theory", "g_at_one", "");
  if (ph == Phase::Subcritical) {
    const VectorXd ones = VectorXd::Ones(m.K());
    try {
      const auto sol = qve::solve_real(m, 1.0);
      if ((sol.g - ones).cwiseAbs().maxCoeff() > 1e-6)
        throw Error(Errc::SignAnomaly, "theory", "g_at_one", "continuation at 1 differs from 1_K");
    } catch (const Error& e) {
      // Just below the transition the edge sits within ~1e-7 of one and the continuation
      // cannot be certified; the closed form still holds.
      if (e.code() == Errc::SignAnomaly) throw;
    }
    return ones;
  }
  const auto sol = qve::solve_real(m, 1.0);
  if (!((sol.g.array() > 0.0).all() && (sol.g.array() < 1.0).all()))
    throw Error(Errc::SignAnomaly, "theory", "g_at_one", "g(1) outside (0, 1)^K");
  return sol.g;
}

SpectralDecomp spectral_decomp(const ModelParams& m, const VectorXd& g) {
  if (!(g.array() > 0.0).all())
    throw Error(Errc::SignAnomaly, "theory", "spectral_decomp", "g must be positive");
  const VectorXd sg = g.cwiseSqrt();
  const auto eig = linalg::sym_eig(sg.asDiagonal() * omega(m).entries * sg.asDiagonal());
  SpectralDecomp d;
  d.phi = eig.values;
  d.wRight = sg.asDiagonal() * eig.vectors;
  d.wLeft = sg.cwiseInverse().asDiagonal() * eig.vectors;
  return d;
}

SpikeVectors spike_eigvectors(const ModelParams& m) {
  require_supercritical(m, "spike_eigvectors");
  const VectorXd g1 = g_at_one(m);
  const MatrixXd Om = omega(m).entries;
  SpikeVectors v;
  v.right = m.rho().cwiseSqrt().cwiseProduct(VectorXd::Ones(m.K()) - g1);
  v.left = Om * v.right;
  const MatrixXd A = g1.asDiagonal() * Om;
  v.rightResidual = (A * v.right - v.right).norm();
  v.leftResidual = (A.transpose() * v.left - v.left).norm();
  return v;
}

OverlapConstant overlap_constant(const ModelParams& m) {
  require_supercritical(m, "overlap_constant");
  const VectorXd g1 = g_at_one(m);
  const MatrixXd Gam = gamma(m).entries;
  MatrixXd M = -Gam;
  M.diagonal() += g1.cwiseAbs2().cwiseInverse();
  OverlapConstant out;
  out.yPos = linalg::solve_linear(M, VectorXd::Ones(m.K()));
  if (!(out.yPos.array() > 0.0).all())
    throw Error(Errc::SignAnomaly, "theory", "overlap_constant", "yPos not positive");
  const VectorXd u = VectorXd::Ones(m.K()) - g1;
  const VectorXd Gu = Gam * u;
  auto form = [&](const VectorXd& y) {
    return Gu.dot(m.rho().cwiseProduct(y).asDiagonal() * Gu);
  };
  out.C = form(out.yPos);
  out.CAltSign = form(-out.yPos);
  return out;
}

Phi1Derivative phi1_derivative(const ModelParams& m, double step) {
  require_supercritical(m, "phi1_derivative");
  const MatrixXd Om = omega(m).entries;
  Phi1Derivative out;
  out.step = step;
  out.phiAtOne = phi1_at(m, Om, 1.0);
  out.finiteDifference = (phi1_at(m, Om, 1.0 + step) - phi1_at(m, Om, 1.0 - step)) / (2.0 * step);

  const auto sol = qve::solve_real(m, 1.0);
  const VectorXd gp = qve::g_prime(m, sol);
  const auto v = spike_eigvectors(m);
  out.pairing = v.left.dot(v.right);
  out.closedForm = v.left.dot(gp.asDiagonal() * Om * v.right) / out.pairing;
  return out;
}

TheoryPrediction predict(const ModelParams& m) {
  TheoryPrediction p;
  const int K = m.K();
  p.snr = omega(m).snr;
  p.phase = phase(m);
  p.overlapAbs = VectorXd::Zero(K);
  p.vRight = VectorXd::Zero(K);
  p.vLeft = VectorXd::Zero(K);

  if (p.phase == Phase::Critical) {
    p.critical = true;
    p.rightEdge = 1.0;
    p.topEigLimit = 1.0;
    p.gAtOne = VectorXd::Ones(K);
    return p;
  }

  const auto edge = qve::rightmost_edge(m);
  p.rightEdge = edge.rightEdge;
  p.edgeResidual = edge.edgeResidual;
  p.gAtOne = g_at_one(m);

  if (p.phase == Phase::Subcritical) {
    p.topEigLimit = p.rightEdge;
    try {
      p.secularAtOne = qve::secular(m, 1.0);
    } catch (const Error&) {
      p.secularAtOne = std::nan("");
    }
    return p;
  }

  const auto sol = qve::solve_real(m, 1.0);
  p.gResidual = sol.residual;
  p.certificateTopEig = sol.certificate.topEig;
  p.newtonIterations = sol.newtonIterations;

  const auto c = overlap_constant(m);
  const auto v = spike_eigvectors(m);
  p.C = c.C;
  p.CAltSign = c.CAltSign;
  p.vRight = v.right;
  p.vLeft = v.left;
  p.overlapAbs = v.right / std::sqrt(c.C);
  p.overlapGlobal = p.overlapAbs.dot(m.rho().cwiseSqrt());
  p.topEigLimit = 1.0;
  p.phi1prime = phi1_derivative(m).finiteDifference;
  p.secularAtOne = qve::secular(m, 1.0);
  return p;
}

}  // namespace blockspike::theory
