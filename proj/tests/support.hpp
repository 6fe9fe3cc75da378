#pragma once

// Helpers shared by the test binaries. Everything here is computed with plain Eigen so
// it can serve as an oracle for the library routines.

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "blockspike/model.hpp"

namespace testsupport {

using blockspike::ModelParams;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline double top_eig(const MatrixXd& A) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (A + A.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

inline MatrixXd omega_of(const ModelParams& m) {
  const VectorXd r = m.rho().cwiseSqrt();
  return r.asDiagonal() * m.S() * r.asDiagonal();
}

inline double snr_of(const ModelParams& m) { return top_eig(omega_of(m)); }

// Largest eigenvalue of [[a, b], [b, c]].
inline double top_eig_2x2(double a, double b, double c) {
  return 0.5 * (a + c) + std::sqrt(0.25 * (a - c) * (a - c) + b * b);
}

// Random model: K blocks, proportions bounded away from zero, S entries in [e^-1, e],
// rescaled so that lambda_1(Omega) is uniform on [snrLo, snrHi].
inline ModelParams random_model(std::mt19937_64& rng, int K, double snrLo, double snrHi) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  VectorXd rho(K);
  for (int k = 0; k < K; ++k) rho(k) = 0.15 + u(rng);
  rho /= rho.sum();
  MatrixXd S(K, K);
  for (int k = 0; k < K; ++k)
    for (int l = k; l < K; ++l) S(k, l) = S(l, k) = std::exp(2.0 * u(rng) - 1.0);
  const double target = snrLo + (snrHi - snrLo) * u(rng);
  const auto m0 = blockspike::make_model(rho, S);
  return blockspike::make_model(rho, S * (target / snr_of(m0)));
}

inline int random_K(std::mt19937_64& rng, int maxK = 4) {
  return 1 + static_cast<int>(std::uniform_int_distribution<int>(0, maxK - 1)(rng));
}

// Root of s g^2 - (z + s) g + 1 = 0 with Im g > 0 (scalar QVE with Im z < 0).
inline std::complex<double> scalar_g(double s, std::complex<double> z) {
  const std::complex<double> b = z + s;
  const std::complex<double> d = std::sqrt(b * b - 4.0 * s);
  std::complex<double> g1 = (b + d) / (2.0 * s), g2 = (b - d) / (2.0 * s);
  return g1.imag() > 0.0 ? g1 : g2;
}

// Density of sqrt(s) * semicircle[-2, 2] - s.
inline double shifted_semicircle(double s, double x) {
  const double w = (x + s) / std::sqrt(s);
  return w * w >= 4.0 ? 0.0 : std::sqrt(4.0 - w * w) / (2.0 * M_PI * std::sqrt(s));
}

// Two-sample Kolmogorov distance.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(double(i) / a.size() - double(j) / b.size()));
  }
  return d;
}

}  // namespace testsupport
