// Acceptance criteria. `acceptance NAME` runs one criterion, `acceptance` runs all of them.
// Every criterion prints exactly one PASS/FAIL line.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <string>

#include "blockspike/cli.hpp"
#include "blockspike/error.hpp"
#include "blockspike/qve.hpp"
#include "blockspike/sim.hpp"
#include "blockspike/theory.hpp"
#include "support.hpp"

using namespace blockspike;

namespace {

struct Outcome {
  bool passed = false;
  std::string measured;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

ModelParams scalar(double s) { return make_model(VectorXd::Ones(1), MatrixXd::Constant(1, 1, s)); }

// ---------------------------------------------------------------------------------------

Outcome scalar_bbp() {
  Stopwatch clock;
  double edgeErr = 0, gErr = 0, ovErr = 0, cErr = 0;
  for (double s : {0.25, 0.5, 1.0, 1.5, 2.0, 4.0, 10.0}) {
    const auto p = theory::predict(scalar(s));
    edgeErr = std::max(edgeErr, std::abs(p.rightEdge - (2 * std::sqrt(s) - s)));
    gErr = std::max(gErr, std::abs(p.gAtOne(0) - std::min(1.0, 1.0 / s)));
    if (s > 1.0) {
      ovErr = std::max(ovErr, std::abs(p.overlapAbs(0) * p.overlapAbs(0) - (1 - 1 / s)));
      cErr = std::max(cErr, std::abs(p.C - (s - 1) / s));
    }
  }
  const double t = clock.seconds();
  return {edgeErr <= 1e-6 && gErr <= 1e-8 && ovErr <= 1e-8 && cErr <= 1e-8 && t < 1.0,
          fmt("max errors edge %.1e (tol 1e-6), g(1) %.1e, overlap^2 %.1e, C %.1e (tol 1e-8); %.3f s (< 1 s)", edgeErr,
              gErr, ovErr, cErr, t)};
}

Outcome qve_residual() {
  Stopwatch clock;
  double worst = 0;
  bool herglotz = true;
  int failed = 0, points = 0;
  for (double t : {2.0 / 3.0, 13.0 / 7.0, 137.0 / 23.0}) {
    const auto m = cli::fig1_model(t);
    const auto grid = qve::default_grid(qve::support_info(m), 2000);
    const auto c = qve::density(m, grid, qve::eta_schedule(1e-7));
    worst = std::max(worst, c.maxResidual);
    herglotz = herglotz && c.herglotz;
    for (bool f : c.failed) failed += f;
    points += static_cast<int>(grid.size());
  }
  const double t = clock.seconds();
  return {worst <= 1e-12 && herglotz && failed == 0 && t < 30.0,
          fmt("%d points, max residual %.2e (tol 1e-12), herglotz %s, %d unconverged; %.1f s (< 30 s)", points, worst,
              herglotz ? "yes" : "no", failed, t)};
}

Outcome certificate() {
  Stopwatch clock;
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int counter = 0, disagree = 0, below = 0;
  const int trials = 1000;
  for (int i = 0; i < trials; ++i) {
    const int K = testsupport::random_K(rng);
    const auto m = testsupport::random_model(rng, K, 0.2, 5.0);
    const MatrixXd Om = testsupport::omega_of(m);
    VectorXd g(K);
    for (int k = 0; k < K; ++k) g(k) = 0.05 + u(rng);
    // rescale g so lambda_1(D_g^2 Omega) is log-uniform on [0.3, 3], away from 1
    double c = std::exp(std::log(0.3) + u(rng) * std::log(10.0));
    if (std::abs(c - 1.0) < 1e-6) c = 0.9;
    g *= std::sqrt(c / testsupport::top_eig(g.asDiagonal() * Om * g.asDiagonal()));

    const double top = testsupport::top_eig(g.asDiagonal() * Om * g.asDiagonal());
    MatrixXd A = -(m.S() * m.rho().asDiagonal());
    A.diagonal() += g.cwiseAbs2().cwiseInverse();
    const VectorXd y = A.fullPivLu().solve(VectorXd::Ones(K));
    const bool yPos = y.minCoeff() > 0.0;
    if (yPos != (top < 1.0)) ++counter;
    below += top < 1.0;
    try {
      const auto cert = qve::selection_certificate(m, g);
      if (cert.yPositive != yPos || (cert.topEig < 1.0) != (top < 1.0)) ++disagree;
    } catch (const Error&) {
      ++disagree;
    }
  }
  const double t = clock.seconds();
  return {counter == 0 && disagree == 0 && t < 10.0,
          fmt("%d trials (%d with lambda_1 < 1): %d counterexamples, %d module disagreements; %.2f s (< 10 s)", trials,
              below, counter, disagree, t)};
}

Outcome edge_bound() {
  std::mt19937_64 rng(202);
  double worst = -1e300;
  int errors = 0;
  for (int i = 0; i < 200; ++i) {
    const auto m = testsupport::random_model(rng, testsupport::random_K(rng), 0.2, 5.0);
    try {
      worst = std::max(worst, qve::rightmost_edge(m).rightEdge - 1.0);
    } catch (const Error&) {
      ++errors;
    }
  }
  const double crit = qve::rightmost_edge(cli::fig1_model(13.0 / 7.0)).rightEdge;
  return {worst <= 1e-8 && errors == 0 && std::abs(crit - 1.0) <= 1e-3,
          fmt("200 models: max(lambda_r - 1) = %.2e (tol 1e-8), %d failures; critical model lambda_r = %.8f (|.-1| <= 1e-3)",
              worst, errors, crit)};
}

Outcome fig1() {
  bool ok = true;
  std::string detail;
  for (double target : {0.5, 1.0, 3.0}) {
    Stopwatch clock;
    const auto p = cli::fig1_panel(target, 3000, 1);
    const double t = clock.seconds();
    const double top = p.sample.topValue;
    bool panelOk = p.cdfDistance <= 0.03 && t < 300.0;
    std::string d = fmt("snr %.1f: t %.6f, KS %.4f", target, p.t, p.cdfDistance);
    if (target < 1.0) {
      panelOk = panelOk && top <= p.support.rightEdge + 0.05;
      d += fmt(", top %.4f vs edge %.4f + 0.05", top, p.support.rightEdge);
    } else if (target > 1.0) {
      const double gap = top - p.sample.secondValue;
      panelOk = panelOk && std::abs(top - 1.0) <= 0.05 && gap >= 0.1;
      d += fmt(", top %.4f (|.-1| <= 0.05), gap %.4f (>= 0.1)", top, gap);
    } else {
      d += fmt(", top %.4f, edge %.6f", top, p.support.rightEdge);
    }
    d += fmt(", %.0f s", t);
    ok = ok && panelOk;
    detail += (detail.empty() ? "" : "; ") + d;
  }
  return {ok, detail};
}

Outcome fig2() {
  Stopwatch clock;
  int checked = 0, violations = 0, exempt = 0;
  double worstSuper = 0, worstSub = 0;
  std::string where;
  for (bool right : {false, true}) {
    const auto base = cli::fig2_model(right, 1.0);
    const auto path = cli::parse_param(right ? "S.1.2" : "S.1.1", 2);
    std::vector<double> ts;
    const auto targets = cli::fig2_targets();
    for (double s : targets) ts.push_back(cli::t_for_snr(base, path, s));
    cli::SweepOptions so;
    so.N = 3000;
    so.samples = 10;
    so.seed = 1;
    const auto pts = cli::sweep(base, path, ts, so, targets);
    for (const auto& p : pts) {
      if (p.snr > 0.9 && p.snr < 1.3) {
        ++exempt;
        continue;
      }
      for (int k = 0; k < 2; ++k) {
        const double emp = p.mc.overlapSq[k].mean;
        const double th = p.theory.overlapAbs(k) * p.theory.overlapAbs(k);
        ++checked;
        if (p.snr >= 1.3) {
          worstSuper = std::max(worstSuper, std::abs(emp - th));
          if (std::abs(emp - th) > 0.05) {
            ++violations;
            where += fmt(" [%s snr %.2f block %d: %.3f vs %.3f]", right ? "right" : "left", p.snr, k + 1, emp, th);
          }
        } else {
          worstSub = std::max(worstSub, emp);
          if (emp > 0.05) {
            ++violations;
            where += fmt(" [%s snr %.2f block %d: %.3f]", right ? "right" : "left", p.snr, k + 1, emp);
          }
        }
      }
    }
  }
  const double t = clock.seconds();
  return {violations == 0 && t < 3600.0,
          fmt("%d comparisons (%d points exempt), max |emp - theory| %.4f above 1.3, max emp %.4f below 0.9 (tol 0.05), "
              "%d violations; %.0f s (< 3600 s)",
              checked, exempt, worstSuper, worstSub, violations, t) +
              where};
}

Outcome consistency() {
  std::mt19937_64 rng(303);
  double cRel = 0, eigRes = 0, sec = 0, gpRel = 0;
  int errors = 0;
  for (int i = 0; i < 50; ++i) {
    const auto m = testsupport::random_model(rng, testsupport::random_K(rng), 1.1, 5.0);
    try {
      const MatrixXd Om = testsupport::omega_of(m);
      auto phi = [&](double lam) {
        const VectorXd sg = qve::solve_real(m, lam).g.cwiseSqrt();
        return testsupport::top_eig(sg.asDiagonal() * Om * sg.asDiagonal());
      };
      const double h = 1e-5;
      const double dphi = (phi(1 + h) - phi(1 - h)) / (2 * h);
      const auto v = theory::spike_eigvectors(m);
      const auto c = theory::overlap_constant(m);
      cRel = std::max(cRel, std::abs(c.C + dphi * v.left.dot(v.right)) / c.C);
      eigRes = std::max({eigRes, v.rightResidual, v.leftResidual});
      sec = std::max(sec, std::abs(qve::secular(m, 1.0)));
      const auto sol = qve::solve_real(m, 1.0);
      const VectorXd gp = qve::g_prime(m, sol);
      const VectorXd fd = (qve::solve_real(m, 1 + h).g - qve::solve_real(m, 1 - h).g) / (2 * h);
      gpRel = std::max(gpRel, (gp - fd).norm() / gp.norm());
    } catch (const Error&) {
      ++errors;
    }
  }
  return {errors == 0 && cRel <= 1e-6 && eigRes <= 1e-9 && sec <= 1e-8 && gpRel <= 1e-6,
          fmt("50 models: C vs -phi1'(1)<vL,vR> rel %.1e (tol 1e-6), eigen-residual %.1e (tol 1e-9), |secular(1)| %.1e "
              "(tol 1e-8), g' vs finite difference rel %.1e (tol 1e-6), %d failures",
              cRel, eigRes, sec, gpRel, errors)};
}

Outcome monotonicity() {
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int bumpViolations = 0, bumps = 0, reducedViolations = 0;
  double minFd = 1e300, minGap = 1e300;
  for (int i = 0; i < 100; ++i) {
    const int K = 2 + static_cast<int>(u(rng) * 3.0);
    const auto m = testsupport::random_model(rng, K, 0.2, 5.0);
    const double base = testsupport::snr_of(m);
    for (int k = 0; k < K; ++k)
      for (int l = k; l < K; ++l) {
        const double h = 1e-4 * m.S()(k, l);
        const double fd = (testsupport::snr_of(with_s_entry(m, k, l, m.S()(k, l) + h)) - base) / h;
        minFd = std::min(minFd, fd);
        ++bumps;
        if (!(fd > 0.0)) ++bumpViolations;
      }
    std::vector<int> keep;
    for (int k = 0; k < K; ++k)
      if (u(rng) < 0.5) keep.push_back(k);
    if (keep.empty()) keep.push_back(static_cast<int>(u(rng) * K));
    if (static_cast<int>(keep.size()) == K) keep.erase(keep.begin() + static_cast<int>(u(rng) * K));
    const double gap = base - testsupport::snr_of(reduced_model(m, keep));
    minGap = std::min(minGap, gap);
    if (!(gap > 0.0)) ++reducedViolations;
  }
  return {bumpViolations == 0 && reducedViolations == 0,
          fmt("%d s_kl bumps on 100 models: min finite difference %.3e, %d violations; 100 reduced models: min snr drop "
              "%.3e, %d violations",
              bumps, minFd, bumpViolations, minGap, reducedViolations)};
}

Outcome lowrank_decay() {
  const auto m = cli::fig1_model(137.0 / 23.0);
  const MatrixXd Om = omega(m).entries;
  std::vector<double> medians;
  std::string detail;
  for (int N : {1000, 2000, 4000}) {
    std::vector<double> errs;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const MatrixXd E = sim::lowrank_matrix(sim::sample(m, N, seed)) - Om;
      errs.push_back(Eigen::SelfAdjointEigenSolver<MatrixXd>(E).eigenvalues().cwiseAbs().maxCoeff());
    }
    std::nth_element(errs.begin(), errs.begin() + 5, errs.end());
    const double hi = errs[5];
    std::nth_element(errs.begin(), errs.begin() + 4, errs.end());
    medians.push_back(0.5 * (errs[4] + hi));
    detail += fmt("%sN=%d: %.4f", detail.empty() ? "" : ", ", N, medians.back());
  }
  const bool ok = medians[0] > medians[1] && medians[1] > medians[2] && medians[2] <= 0.1;
  return {ok, "median ||E_K|| " + detail + " (decreasing, <= 0.1 at N=4000)"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"scalar_bbp", scalar_bbp}, {"qve_residual", qve_residual}, {"certificate", certificate},
      {"edge_bound", edge_bound}, {"fig1", fig1},                 {"fig2", fig2},
      {"consistency", consistency}, {"monotonicity", monotonicity}, {"lowrank_decay", lowrank_decay}};

  std::vector<std::string> wanted(argv + 1, argv + argc);
  int failures = 0, ran = 0;
  for (const auto& [name, fn] : criteria) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), name) == wanted.end()) continue;
    ++ran;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %s: %s\n", o.passed ? "PASS" : "FAIL", name.c_str(), o.measured.c_str());
    std::fflush(stdout);
    failures += !o.passed;
  }
  if (ran == 0) {
    std::fprintf(stderr, "unknown criterion\n");
    return 2;
  }
  return failures ? 1 : 0;
}
