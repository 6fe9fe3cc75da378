#include "blockspike/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "blockspike/error.hpp"
#include "blockspike/linalg.hpp"

namespace blockspike {

std::string_view to_string(Prior prior) {
  switch (prior) {
    case Prior::Gaussian: return "gaussian";
    case Prior::Rademacher: return "rademacher";
  }
  return "unknown";
}

Prior prior_from_string(std::string_view name) {
  if (name == "gaussian") return Prior::Gaussian;
  if (name == "rademacher") return Prior::Rademacher;
  throw Error(Errc::BadConfig, "model", "validate", "unknown prior '" + std::string(name) + "'");
}

RawModel ModelParams::to_raw() const {
  RawModel raw;
  raw.K = K();
  raw.prior = prior_;
  raw.rho.assign(rho_.data(), rho_.data() + rho_.size());
  raw.S.assign(K(), std::vector<double>(K()));
  for (int k = 0; k < K(); ++k)
    for (int l = 0; l < K(); ++l) raw.S[k][l] = S_(k, l);
  return raw;
}

ModelParams validate(const RawModel& raw) {
  constexpr const char* kOp = "validate";
  if (raw.K < 1) throw Error(Errc::BadK, "model", kOp, "K must be >= 1");
  const auto K = static_cast<std::size_t>(raw.K);
  if (raw.rho.size() != K) throw Error(Errc::BadK, "model", kOp, "rho length differs from K");
  if (raw.S.size() != K) throw Error(Errc::BadK, "model", kOp, "S row count differs from K");
  for (const auto& row : raw.S)
    if (row.size() != K) throw Error(Errc::BadK, "model", kOp, "S row length differs from K");

  MatrixXd S(raw.K, raw.K);
  for (int k = 0; k < raw.K; ++k)
    for (int l = 0; l < raw.K; ++l) S(k, l) = raw.S[k][l];

  if (!S.allFinite()) throw Error(Errc::NonFinite, "model", kOp, "S has non-finite entries");
  const double scale = std::max(1.0, S.cwiseAbs().maxCoeff());
  if ((S - S.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw Error(Errc::NonSymmetricS, "model", kOp, "");
  S = 0.5 * (S + S.transpose()).eval();
  if (!(S.array() > 0.0).all()) throw Error(Errc::NonPositiveEntry, "model", kOp, "s_kl must be > 0");

  VectorXd rho(raw.K);
  for (int k = 0; k < raw.K; ++k) rho(k) = raw.rho[k];
  if (!rho.allFinite() || !(rho.array() > 0.0).all())
    throw Error(Errc::NonPositiveEntry, "model", kOp, "rho_k must be > 0");
  const double total = rho.sum();
  if (std::abs(total - 1.0) > 1e-9)
    throw Error(Errc::RhoNotSimplex, "model", kOp, "sum(rho) = " + std::to_string(total));
  rho /= total;
  if (raw.K > 1 && (rho.array() >= 1.0).any())
    throw Error(Errc::RhoNotSimplex, "model", kOp, "rho_k must be < 1 when K > 1");

  return ModelParams(std::move(rho), std::move(S), raw.prior);
}

ModelParams make_model(const VectorXd& rho, const MatrixXd& S, Prior prior) {
  RawModel raw;
  raw.K = static_cast<int>(rho.size());
  raw.rho.assign(rho.data(), rho.data() + rho.size());
  raw.S.assign(S.rows(), std::vector<double>(S.cols()));
  for (Eigen::Index k = 0; k < S.rows(); ++k)
    for (Eigen::Index l = 0; l < S.cols(); ++l) raw.S[k][l] = S(k, l);
  raw.prior = prior;
  return validate(raw);
}

OmegaMatrix omega(const ModelParams& m) {
  const VectorXd sq = m.rho().cwiseSqrt();
  OmegaMatrix out;
  // elementwise so that the result is exactly symmetric
  out.entries = m.S().cwiseProduct(sq * sq.transpose());
  const auto eig = linalg::sym_eig(out.entries);
  out.snr = eig.values(0);
  out.perronVector = eig.vectors.col(0);
  if (out.perronVector.sum() < 0.0) out.perronVector = -out.perronVector;
  out.spectralGap = m.K() > 1 ? eig.values(0) - eig.values(1)
                              : std::numeric_limits<double>::infinity();
  out.nearlyDegenerate = out.spectralGap <= 1e-12;
  return out;
}

GammaMatrix gamma(const ModelParams& m) {
  return GammaMatrix{m.S() * m.rho().asDiagonal()};
}

double snr_derivative(const ModelParams& m, int k, int l) {
  if (k < 0 || l < 0 || k >= m.K() || l >= m.K())
    throw Error(Errc::IndexOutOfRange, "model", "snr_derivative",
                "(" + std::to_string(k) + "," + std::to_string(l) + ")");
  const auto om = omega(m);
  const VectorXd& v = om.perronVector;
  if (k == l) return m.rho()(k) * v(k) * v(k);
  return 2.0 * std::sqrt(m.rho()(k) * m.rho()(l)) * v(k) * v(l);
}

ModelParams reduced_model(const ModelParams& m, const std::vector<int>& keep) {
  if (keep.empty()) throw Error(Errc::EmptySubset, "model", "reduced_model", "");
  const std::set<int> idx(keep.begin(), keep.end());
  for (int k : idx)
    if (k < 0 || k >= m.K())
      throw Error(Errc::IndexOutOfRange, "model", "reduced_model", "block " + std::to_string(k));
  if (static_cast<int>(idx.size()) == m.K())
    throw Error(Errc::FullSubset, "model", "reduced_model", "");

  const std::vector<int> order(idx.begin(), idx.end());
  const int Kr = static_cast<int>(order.size());
  double alpha = 0.0;
  for (int k : order) alpha += m.rho()(k);

  VectorXd rho(Kr);
  MatrixXd S(Kr, Kr);
  for (int a = 0; a < Kr; ++a) {
    rho(a) = m.rho()(order[a]) / alpha;
    for (int b = 0; b < Kr; ++b) S(a, b) = alpha * m.S()(order[a], order[b]);
  }
  return make_model(rho, S, m.prior());
}

ModelParams with_s_entry(const ModelParams& m, int k, int l, double value) {
  if (k < 0 || l < 0 || k >= m.K() || l >= m.K())
    throw Error(Errc::IndexOutOfRange, "model", "with_s_entry", "");
  MatrixXd S = m.S();
  S(k, l) = value;
  S(l, k) = value;
  return make_model(m.rho(), S, m.prior());
}

}  // namespace blockspike
