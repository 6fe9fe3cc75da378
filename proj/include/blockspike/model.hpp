#pragma once

#include <Eigen/Dense>
#include <string>
#include <string_view>
#include <vector>

namespace blockspike {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Prior { Gaussian, Rademacher };

std::string_view to_string(Prior prior);
Prior prior_from_string(std::string_view name);

/// Unvalidated model parameters as read from a config file or built in code.
struct RawModel {
  int K = 0;
  std::vector<double> rho;
  std::vector<std::vector<double>> S;  // row-major K x K inverse variances
  Prior prior = Prior::Gaussian;
};

/// Validated block model: K block proportions `rho` on the simplex and a symmetric,
/// entrywise-positive K x K matrix `S` of inverse noise variances s_kl = 1 / Delta_kl.
/// Only `validate` constructs one, so every instance satisfies those invariants.
class ModelParams {
 public:
  int K() const noexcept { return static_cast<int>(rho_.size()); }
  const VectorXd& rho() const noexcept { return rho_; }
  const MatrixXd& S() const noexcept { return S_; }
  Prior prior() const noexcept { return prior_; }

  RawModel to_raw() const;

 private:
  friend ModelParams validate(const RawModel& raw);
  ModelParams(VectorXd rho, MatrixXd S, Prior prior)
      : rho_(std::move(rho)), S_(std::move(S)), prior_(prior) {}

  VectorXd rho_;
  MatrixXd S_;
  Prior prior_;
};

/// Checks and normalizes raw parameters. rho is rescaled onto the simplex when its sum is
/// within 1e-9 of one and rejected otherwise. Throws BadK, NonSymmetricS, NonPositiveEntry
/// or RhoNotSimplex.
ModelParams validate(const RawModel& raw);

/// Convenience for code and tests: validate from Eigen objects.
ModelParams make_model(const VectorXd& rho, const MatrixXd& S, Prior prior = Prior::Gaussian);

/// Omega = D_sqrt(rho) S D_sqrt(rho). Its Perron root is the effective SNR.
struct OmegaMatrix {
  MatrixXd entries;
  double snr = 0.0;            // lambda_1(Omega)
  VectorXd perronVector;       // unit, entrywise positive
  double spectralGap = 0.0;    // lambda_1 - lambda_2 (infinity when K = 1)
  bool nearlyDegenerate = false;  // gap below 1e-12
};

/// Gamma = S D_rho, similar to Omega.
struct GammaMatrix {
  MatrixXd entries;
};

OmegaMatrix omega(const ModelParams& m);
GammaMatrix gamma(const ModelParams& m);

/// d lambda_1(Omega) / d s_kl where the symmetric pair (k,l),(l,k) moves together:
/// 2 sqrt(rho_k rho_l) v_k v_l off the diagonal and rho_k v_k^2 on it. Indices are 0-based.
double snr_derivative(const ModelParams& m, int k, int l);

/// Restriction to the blocks in `keep` (0-based), renormalized to a model of its own:
/// rho' = rho / alpha and s' = alpha s with alpha = sum of the kept proportions, so that
/// Omega' is the principal minor of Omega.
ModelParams reduced_model(const ModelParams& m, const std::vector<int>& keep);

/// Same model with the symmetric pair s_kl = s_lk replaced by `value`.
ModelParams with_s_entry(const ModelParams& m, int k, int l, double value);

}  // namespace blockspike
