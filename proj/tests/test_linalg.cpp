#include <doctest.h>

#include <random>

#include "blockspike/error.hpp"
#include "blockspike/linalg.hpp"
#include "support.hpp"

using namespace blockspike;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd random_symmetric(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> nd;
  MatrixXd A(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i <= j; ++i) A(i, j) = A(j, i) = nd(rng);
  return A;
}

}  // namespace

TEST_CASE("sym_eig matches Eigen's self-adjoint solver") {
  std::mt19937_64 rng(3);
  for (int n : {1, 2, 5, 40, 120}) {
    const MatrixXd A = random_symmetric(rng, n);
    const auto r = linalg::sym_eig(A);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(A);
    const VectorXd ref = es.eigenvalues().reverse();
    CHECK((r.values - ref).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, ref.cwiseAbs().maxCoeff()));
    for (int i = 1; i < n; ++i) CHECK(r.values(i) <= r.values(i - 1));
    CHECK((A * r.vectors - r.vectors * r.values.asDiagonal()).norm() <= 1e-9 * n);
    CHECK((r.vectors.transpose() * r.vectors - MatrixXd::Identity(n, n)).norm() <= 1e-10 * n);
    CHECK(r.residualBound <= 1e-12);
    CHECK((linalg::sym_eigvals(A) - r.values).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, ref.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("sym_eig rejects non-finite input") {
  MatrixXd A = MatrixXd::Identity(3, 3);
  A(1, 2) = A(2, 1) = std::nan("");
  CHECK_THROWS_AS(linalg::sym_eig(A), Error);
}

TEST_CASE("Lanczos top pairs agree with the dense solve") {
  std::mt19937_64 rng(11);
  for (int n : {30, 200, 600}) {
    MatrixXd A = random_symmetric(rng, n) / std::sqrt(double(n));
    // a planted outlier like the spiked matrices
    VectorXd v = VectorXd::Ones(n).normalized();
    A += 3.0 * v * v.transpose();
    const auto top = linalg::sym_eig_topk(A, 2);
    const VectorXd ref = Eigen::SelfAdjointEigenSolver<MatrixXd>(A, Eigen::EigenvaluesOnly).eigenvalues().reverse();
    CHECK(top.values(0) == doctest::Approx(ref(0)).epsilon(1e-9));
    CHECK(top.values(1) == doctest::Approx(ref(1)).epsilon(1e-7));
    const VectorXd u = top.vectors.col(0);
    CHECK((A * u - top.values(0) * u).norm() <= 1e-6);
  }
}

TEST_CASE("Lanczos is deterministic") {
  std::mt19937_64 rng(5);
  const MatrixXd A = random_symmetric(rng, 300);
  const auto a = linalg::sym_eig_topk(A, 3);
  const auto b = linalg::sym_eig_topk(A, 3);
  CHECK(a.values == b.values);
  CHECK(a.vectors == b.vectors);
}

TEST_CASE("perron_pair on positive matrices") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.1, 2.0);
  for (int n : {1, 2, 4}) {
    MatrixXd A(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) A(i, j) = u(rng);
    const auto p = linalg::perron_pair(A);
    Eigen::EigenSolver<MatrixXd> es(A);
    double best = -1e300;
    for (int i = 0; i < n; ++i) best = std::max(best, es.eigenvalues()(i).real());
    CHECK(p.value == doctest::Approx(best).epsilon(1e-10));
    CHECK((p.vector.array() > 0.0).all());
    CHECK(p.vector.norm() == doctest::Approx(1.0));
    CHECK((A * p.vector - p.value * p.vector).norm() <= 1e-10);
  }
}

TEST_CASE("solve_linear agrees with QR and rejects singular systems") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> nd;
  MatrixXd A(4, 4);
  for (int i = 0; i < 16; ++i) A.data()[i] = nd(rng);
  VectorXd b(4);
  b << 1, -2, 0.5, 3;
  const VectorXd x = linalg::solve_linear(A, b);
  CHECK((x - A.colPivHouseholderQr().solve(b)).norm() <= 1e-12);

  MatrixXd S = MatrixXd::Ones(3, 3);
  try {
    linalg::solve_linear(S, VectorXd::Ones(3));
    FAIL("expected Singular");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::Singular);
  }
}

TEST_CASE("sym_opnorm") {
  MatrixXd A(2, 2);
  A << 1, 0, 0, -3;
  CHECK(linalg::sym_opnorm(A) == doctest::Approx(3.0));
}
