#include <doctest.h>

#include <random>

#include "blockspike/error.hpp"
#include "blockspike/model.hpp"
#include "support.hpp"

using namespace blockspike;
using testsupport::top_eig_2x2;

namespace {

Errc code_of(const RawModel& raw) {
  try {
    validate(raw);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("validate accepted a bad model");
  return Errc::BadConfig;
}

ModelParams fig1(double t) {
  MatrixXd S(2, 2);
  S << t, 0.5, 0.5, 0.25;
  return make_model(VectorXd::Constant(2, 0.5), S);
}

}  // namespace

TEST_CASE("validate rejects malformed models") {
  CHECK(code_of({0, {}, {}, Prior::Gaussian}) == Errc::BadK);
  CHECK(code_of({2, {0.5, 0.5}, {{1.0, 0.5}}, Prior::Gaussian}) == Errc::BadK);
  CHECK(code_of({2, {0.5, 0.5}, {{1.0, 0.5}, {0.4, 1.0}}, Prior::Gaussian}) == Errc::NonSymmetricS);
  CHECK(code_of({2, {0.5, 0.5}, {{1.0, 0.0}, {0.0, 1.0}}, Prior::Gaussian}) == Errc::NonPositiveEntry);
  CHECK(code_of({2, {0.0, 1.0}, {{1.0, 1.0}, {1.0, 1.0}}, Prior::Gaussian}) == Errc::NonPositiveEntry);
  CHECK(code_of({2, {0.5, 0.6}, {{1.0, 1.0}, {1.0, 1.0}}, Prior::Gaussian}) == Errc::RhoNotSimplex);
  CHECK(code_of({1, {1.0}, {{std::nan("")}}, Prior::Gaussian}) == Errc::NonFinite);
}

TEST_CASE("validate normalizes near-simplex rho and keeps the prior") {
  const auto m = validate({2, {0.5 + 1e-11, 0.5}, {{1.0, 2.0}, {2.0, 3.0}}, Prior::Rademacher});
  CHECK(m.rho().sum() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(m.prior() == Prior::Rademacher);
  const RawModel back = m.to_raw();
  CHECK(back.K == 2);
  CHECK(back.S[0][1] == 2.0);
  CHECK(prior_from_string("gaussian") == Prior::Gaussian);
  CHECK_THROWS_AS(prior_from_string("laplace"), Error);
}

TEST_CASE("two-block example parameters reach their target snr") {
  // lambda_1 of [[t/2, 1/4], [1/4, 1/8]] in closed form
  for (auto [t, snr] : {std::pair{2.0 / 3.0, 0.5}, {13.0 / 7.0, 1.0}, {137.0 / 23.0, 3.0}}) {
    CHECK(top_eig_2x2(t / 2, 0.25, 0.125) == doctest::Approx(snr).epsilon(1e-14));
    CHECK(omega(fig1(t)).snr == doctest::Approx(snr).epsilon(1e-12));
  }
}

TEST_CASE("Omega: K = 1, symmetric, Perron vector positive, Gamma similar") {
  const auto m1 = make_model(VectorXd::Ones(1), MatrixXd::Constant(1, 1, 2.5));
  CHECK(omega(m1).snr == doctest::Approx(2.5));
  CHECK(std::isinf(omega(m1).spectralGap));

  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const auto m = testsupport::random_model(rng, testsupport::random_K(rng), 0.2, 5.0);
    const auto om = omega(m);
    CHECK((om.entries - om.entries.transpose()).norm() == 0.0);
    CHECK((om.perronVector.array() > 0.0).all());
    CHECK((om.entries * om.perronVector - om.snr * om.perronVector).norm() <= 1e-10);
    CHECK(om.snr == doctest::Approx(testsupport::snr_of(m)).epsilon(1e-12));
    Eigen::EigenSolver<MatrixXd> es(gamma(m).entries);
    double best = -1.0;
    for (int i = 0; i < m.K(); ++i) best = std::max(best, es.eigenvalues()(i).real());
    CHECK(best == doctest::Approx(om.snr).epsilon(1e-10));
  }
}

TEST_CASE("snr_derivative matches finite differences and is positive") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 40; ++trial) {
    const auto m = testsupport::random_model(rng, 1 + trial % 4, 0.2, 5.0);
    for (int k = 0; k < m.K(); ++k)
      for (int l = k; l < m.K(); ++l) {
        const double h = 1e-6 * m.S()(k, l);
        const double fd = (testsupport::snr_of(with_s_entry(m, k, l, m.S()(k, l) + h)) -
                           testsupport::snr_of(with_s_entry(m, k, l, m.S()(k, l) - h))) / (2 * h);
        const double d = snr_derivative(m, k, l);
        CHECK(d > 0.0);
        CHECK(d == doctest::Approx(fd).epsilon(1e-6));
        CHECK(snr_derivative(m, l, k) == doctest::Approx(d).epsilon(1e-14));
      }
  }
  const auto m = fig1(1.0);
  CHECK_THROWS_AS(snr_derivative(m, 0, 2), Error);
}

TEST_CASE("reduced_model keeps the principal minor of Omega") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 60; ++trial) {
    const int K = 2 + trial % 3;
    const auto m = testsupport::random_model(rng, K, 0.2, 5.0);
    std::vector<int> keep;
    for (int k = 0; k < K; ++k)
      if ((trial >> k) & 1) keep.push_back(k);
    if (keep.empty() || static_cast<int>(keep.size()) == K) keep = {0};
    const auto r = reduced_model(m, keep);
    CHECK(r.rho().sum() == doctest::Approx(1.0));
    const MatrixXd full = omega(m).entries;
    const MatrixXd sub = omega(r).entries;
    for (size_t a = 0; a < keep.size(); ++a)
      for (size_t b = 0; b < keep.size(); ++b) CHECK(sub(a, b) == doctest::Approx(full(keep[a], keep[b])).epsilon(1e-12));
    CHECK(omega(r).snr < omega(m).snr);
  }
}

TEST_CASE("reduced_model argument errors") {
  const auto m = fig1(1.0);
  auto code = [&](std::vector<int> keep) {
    try {
      reduced_model(m, keep);
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::BadConfig;
  };
  CHECK(code({}) == Errc::EmptySubset);
  CHECK(code({0, 1}) == Errc::FullSubset);
  CHECK(code({5}) == Errc::IndexOutOfRange);
}

TEST_CASE("identical blocks behave like one block") {
  const auto m = make_model(Eigen::Vector2d(0.3, 0.7), MatrixXd::Constant(2, 2, 1.7));
  CHECK(omega(m).snr == doctest::Approx(1.7).epsilon(1e-12));
}
