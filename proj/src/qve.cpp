#include "blockspike/qve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "blockspike/linalg.hpp"

namespace blockspike::qve {

namespace {

using Eigen::MatrixXcd;

constexpr double kInsideProbeEta = 1e-7;
constexpr double kInsideThreshold = 1e-4;
constexpr double kRealEta = 1e-9;
constexpr double kBoundaryTol = 1e-9;
constexpr double kFixedPointSwitch = 1e-9;

struct Problem {
  explicit Problem(const ModelParams& m)
      : model(&m),
        Gamma(gamma(m).entries),
        GammaOne(Gamma.rowwise().sum()),
        GammaC(Gamma.cast<cplx>()),
        rho(m.rho()) {}

  int K() const { return static_cast<int>(rho.size()); }

  const ModelParams* model;
  MatrixXd Gamma;
  VectorXd GammaOne;
  MatrixXcd GammaC;
  VectorXd rho;
};

// side = +1 selects Im g > 0 (Im z < 0), side = -1 the mirror branch.
int branch_side(cplx z) { return z.imag() < 0.0 ? 1 : -1; }

cplx make_z(double x, double eta, int side) { return {x, -side * eta}; }

VectorXcd shifted(const Problem& p, cplx z, const VectorXcd& g) {
  VectorXcd a = p.GammaOne.cast<cplx>() - p.GammaC * g;
  a.array() += z;
  return a;
}

VectorXcd defect(const Problem& p, cplx z, const VectorXcd& g) {
  return (g.array() * shifted(p, z, g).array() - 1.0).matrix();
}

double residual_of(const Problem& p, cplx z, const VectorXcd& g) {
  return defect(p, z, g).cwiseAbs().maxCoeff();
}

bool on_branch(const VectorXcd& g, int side) {
  for (Eigen::Index k = 0; k < g.size(); ++k)
    if (!(side * g(k).imag() > 0.0) || !std::isfinite(g(k).real())) return false;
  return true;
}

QveSolution package(const Problem& p, cplx z, const VectorXcd& g, int iterations) {
  QveSolution s;
  s.z = z;
  s.g = g;
  s.gX = p.rho.cast<cplx>().dot(g);  // dot conjugates the first argument; rho is real
  s.residual = residual_of(p, z, g);
  s.iterations = iterations;
  s.eta = -z.imag();
  return s;
}

// Newton on F(g) = g (z + Gamma (1 - g)) - 1 with backtracking that keeps g on the branch.
bool newton_complex(const Problem& p, cplx z, VectorXcd& g, int side, const SolverOptions& opts,
                    int& iters) {
  double res = residual_of(p, z, g);
  for (int it = 0; it < opts.maxNewton && res > opts.newtonTol; ++it) {
    const VectorXcd a = shifted(p, z, g);
    MatrixXcd J = -(g.asDiagonal() * p.GammaC);
    J.diagonal() += a;
    const VectorXcd F = (g.array() * a.array() - 1.0).matrix();
    const VectorXcd step = J.partialPivLu().solve(-F);
    if (!step.allFinite()) break;
    bool moved = false;
    for (double t = 1.0; t > 1e-12; t *= 0.5) {
      VectorXcd trial = g + t * step;
      if (!on_branch(trial, side)) continue;
      const double r = residual_of(p, z, trial);
      if (r < res) {
        g = std::move(trial);
        res = r;
        moved = true;
        break;
      }
    }
    ++iters;
    if (!moved) break;
  }
  return res <= opts.residualTol && on_branch(g, side);
}

// Damped iteration g <- (1 - a) g + a / (z + Gamma (1 - g)). The damping a starts at 0.5,
// halves whenever the residual grows and grows by 1.2 after five straight decreases.
bool damped_fixed_point(const Problem& p, cplx z, VectorXcd& g, const SolverOptions& opts,
                        int& iters) {
  double alpha = 0.5;
  double res = residual_of(p, z, g);
  VectorXcd best = g;
  double bestRes = res;
  int streak = 0;
  for (int it = 0; it < opts.maxFixedPoint; ++it) {
    const VectorXcd mapped = shifted(p, z, g).cwiseInverse();
    g = (1.0 - alpha) * g + alpha * mapped;
    const double r = residual_of(p, z, g);
    ++iters;
    if (r < res) {
      if (++streak >= 5) {
        alpha = std::min(1.0, alpha * 1.2);
        streak = 0;
      }
    } else {
      alpha = std::max(alpha * 0.5, 1e-6);
      streak = 0;
    }
    res = r;
    if (res < bestRes) {
      bestRes = res;
      best = g;
    }
    if (res <= kFixedPointSwitch) return true;
  }
  g = best;
  return false;
}

// One solve at z, optionally warm-started. Newton from the warm start first; otherwise (or on
// failure) damped fixed-point iteration followed by Newton polish.
QveSolution solve_at(const Problem& p, cplx z, const std::optional<VectorXcd>& warm,
                     const SolverOptions& opts, const char* op) {
  const int side = branch_side(z);
  int iters = 0;
  const VectorXcd cold = VectorXcd::Constant(p.K(), 1.0 / z);
  if (warm && warm->size() == p.K() && on_branch(*warm, side)) {
    VectorXcd g = *warm;
    if (newton_complex(p, z, g, side, opts, iters)) return package(p, z, g, iters);
  }
  VectorXcd g = (warm && warm->size() == p.K() && on_branch(*warm, side)) ? *warm : cold;
  damped_fixed_point(p, z, g, opts, iters);
  if (!on_branch(g, side)) g = cold;
  newton_complex(p, z, g, side, opts, iters);
  QveSolution s = package(p, z, g, iters);
  if (s.residual <= opts.residualTol && on_branch(g, side)) return s;
  throw NoConvergenceError(op, "residual " + std::to_string(s.residual), s);
}

// Walks eta down the ladder at fixed Re z. A failed rung is retried through its geometric
// midpoint, up to 8 levels deep.
std::vector<QveSolution> ladder(const Problem& p, double x, const std::vector<double>& levels,
                                int side, const SolverOptions& opts, const char* op) {
  std::vector<QveSolution> out;
  out.reserve(levels.size());
  std::optional<VectorXcd> g;
  double etaPrev = std::numeric_limits<double>::quiet_NaN();
  int total = 0;

  auto reach = [&](auto&& self, double eta, int depth) -> QveSolution {
    try {
      return solve_at(p, make_z(x, eta, side), g, opts, op);
    } catch (const NoConvergenceError&) {
      if (depth >= 8 || !g || !std::isfinite(etaPrev)) throw;
      const double mid = std::sqrt(etaPrev * eta);
      QveSolution half = self(self, mid, depth + 1);
      g = half.g;
      etaPrev = mid;
      total += half.iterations;
      return self(self, eta, depth + 1);
    }
  };

  for (double eta : levels) {
    QveSolution s = reach(reach, eta, 0);
    total += s.iterations;
    s.iterations = total;
    g = s.g;
    etaPrev = eta;
    out.push_back(std::move(s));
  }
  return out;
}

QveSolution solve_core(const Problem& p, cplx z, const std::optional<VectorXcd>& warm,
                       const SolverOptions& opts, const char* op) {
  if (warm) {
    try {
      return solve_at(p, z, warm, opts, op);
    } catch (const NoConvergenceError&) {
      // fall through to continuation
    }
  }
  const double eta = std::abs(z.imag());
  if (eta >= 1.0) return solve_at(p, z, std::nullopt, opts, op);
  return ladder(p, z.real(), eta_schedule(eta), branch_side(z), opts, op).back();
}

VectorXd real_defect(const Problem& p, double lambda, const VectorXd& g) {
  const VectorXd a = (p.GammaOne - p.Gamma * g).array() + lambda;
  return (g.array() * a.array() - 1.0).matrix();
}

// Newton on the fold system {F(g, lambda) = 0, lambda_1(D_g Omega D_g) = 1} for a
// same-sign g. Returns false when it fails to converge.
bool fold_newton(const Problem& p, const MatrixXd& Omega, VectorXd& g, double& lambda) {
  const int K = p.K();
  for (int it = 0; it < 40; ++it) {
    if ((g.array() > 0.0).all() == false && (g.array() < 0.0).all() == false) return false;
    const MatrixXd A = g.asDiagonal() * Omega * g.asDiagonal();
    const auto eig = linalg::sym_eig(A);
    const double theta = eig.values(0);
    VectorXd v = eig.vectors.col(0);
    const VectorXd F = real_defect(p, lambda, g);
    const double h = theta - 1.0;
    if (std::max(F.cwiseAbs().maxCoeff(), std::abs(h)) <= 1e-14) return true;

    MatrixXd J = MatrixXd::Zero(K + 1, K + 1);
    const VectorXd a = (p.GammaOne - p.Gamma * g).array() + lambda;
    J.topLeftCorner(K, K) = -(g.asDiagonal() * p.Gamma);
    J.topLeftCorner(K, K).diagonal() += a;
    J.topRightCorner(K, 1) = g;
    for (int k = 0; k < K; ++k) J(K, k) = 2.0 * theta * v(k) * v(k) / g(k);
    VectorXd rhs(K + 1);
    rhs.head(K) = -F;
    rhs(K) = -h;
    VectorXd step;
    try {
      step = linalg::solve_linear(J, rhs);
    } catch (const Error&) {
      return false;
    }
    g += step.head(K);
    lambda += step(K);
    if (!g.allFinite() || !std::isfinite(lambda)) return false;
  }
  return false;
}

std::optional<RealLineSolution> try_real(const ModelParams& m, double lambda) {
  try {
    return solve_real(m, lambda);
  } catch (const Error& e) {
    if (e.code() == Errc::InsideSupport || e.code() == Errc::CertificateRejected ||
        e.code() == Errc::NoConvergence || e.code() == Errc::SingularSystem)
      return std::nullopt;
    throw;
  }
}

}  // namespace

std::vector<double> eta_schedule(double etaMin) {
  if (!(etaMin > 0.0)) throw Error(Errc::BadConfig, "qve", "eta_schedule", "eta must be > 0");
  std::vector<double> out;
  // 1, 0.3, 0.1, 0.03, ... : mantissas 1 and 3 per decade.
  for (int decade = 0; decade > -20; --decade) {
    const double one = std::pow(10.0, decade);
    for (double level : {one, 0.3 * one}) {
      if (level <= etaMin * (1.0 + 1e-12)) {
        out.push_back(etaMin);
        return out;
      }
      out.push_back(level);
    }
  }
  out.push_back(etaMin);
  return out;
}

QveSolution solve_complex(const ModelParams& m, cplx z, const std::optional<VectorXcd>& warmStart,
                          const SolverOptions& opts) {
  if (!(z.imag() < 0.0))
    throw Error(Errc::BadConfig, "qve", "solve_complex", "requires Im z < 0");
  const Problem p(m);
  return solve_core(p, z, warmStart, opts, "solve_complex");
}

cplx stieltjes(const ModelParams& m, cplx z) {
  if (z.imag() == 0.0) throw Error(Errc::BadConfig, "qve", "stieltjes", "z must be non-real");
  const Problem p(m);
  return solve_core(p, z, std::nullopt, {}, "stieltjes").gX;
}

SelectionCertificate selection_certificate(const ModelParams& m, const VectorXd& g) {
  const int K = m.K();
  if (g.size() != K) throw Error(Errc::IndexOutOfRange, "qve", "selection_certificate", "size");
  if (!g.allFinite() || (g.array() == 0.0).any())
    throw Error(Errc::SingularSystem, "qve", "selection_certificate", "g has a zero component");

  const MatrixXd Om = omega(m).entries;
  const MatrixXd Gam = gamma(m).entries;
  SelectionCertificate c;
  const VectorXd ag = g.cwiseAbs();
  c.topEig = linalg::sym_eig(ag.asDiagonal() * Om * ag.asDiagonal()).values(0);
  c.boundary = std::abs(c.topEig - 1.0) <= kBoundaryTol;

  MatrixXd M = -Gam;
  M.diagonal() += g.cwiseAbs2().cwiseInverse();
  try {
    c.y = linalg::solve_linear(M, VectorXd::Ones(K));
  } catch (const Error& e) {
    if (e.code() != Errc::Singular) throw;
    if (!c.boundary)
      throw Error(Errc::SingularSystem, "qve", "selection_certificate",
                  "D_g^-2 - Gamma singular away from the boundary");
    c.y = VectorXd::Constant(K, std::numeric_limits<double>::quiet_NaN());
  }
  c.yPositive = (c.y.array() > 0.0).all();
  c.accepted = c.boundary || (c.yPositive && c.topEig < 1.0);
  return c;
}

RealLineSolution solve_real(const ModelParams& m, double lambda, const SolverOptions& opts) {
  const Problem p(m);
  const auto levels = eta_schedule(kRealEta);
  const auto path = ladder(p, lambda, levels, +1, opts, "solve_real");

  RealLineSolution out;
  out.lambda = lambda;
  double probeFine = path.back().gX.imag();
  for (std::size_t i = 0; i < levels.size(); ++i)
    if (std::abs(levels[i] - kInsideProbeEta) <= 1e-3 * kInsideProbeEta) out.imagProbe = path[i].gX.imag();
  // Interior points keep Im g_X of order one as eta shrinks; exterior ones decay linearly.
  if (out.imagProbe > kInsideThreshold && probeFine > 0.1 * out.imagProbe)
    throw Error(Errc::InsideSupport, "qve", "solve_real",
                "Im gX = " + std::to_string(out.imagProbe) + " at lambda " + std::to_string(lambda));

  const VectorXd start = path.back().g.real();
  VectorXd g = start;
  double res = real_defect(p, lambda, g).cwiseAbs().maxCoeff();
  int it = 0;
  for (; it < opts.maxNewton && res > opts.newtonTol; ++it) {
    const VectorXd a = (p.GammaOne - p.Gamma * g).array() + lambda;
    MatrixXd J = -(g.asDiagonal() * p.Gamma);
    J.diagonal() += a;
    const VectorXd F = (g.array() * a.array() - 1.0).matrix();
    const VectorXd step = J.partialPivLu().solve(-F);
    if (!step.allFinite()) break;
    bool moved = false;
    for (double t = 1.0; t > 1e-12; t *= 0.5) {
      const VectorXd trial = g + t * step;
      const double r = real_defect(p, lambda, trial).cwiseAbs().maxCoeff();
      if (r < res) {
        g = trial;
        res = r;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  if ((start.array() > 0.0).all() && !(g.array() > 0.0).all()) {
    g = start;  // Newton left the positive orthant; keep the continued value
    res = real_defect(p, lambda, g).cwiseAbs().maxCoeff();
  }
  out.g = g;
  out.residual = res;
  out.newtonIterations = it;
  if (!(res <= opts.residualTol)) {
    QveSolution best = path.back();
    throw NoConvergenceError("solve_real", "real residual " + std::to_string(res), best);
  }
  out.certificate = selection_certificate(m, g);
  if (!out.certificate.accepted)
    throw Error(Errc::CertificateRejected, "qve", "solve_real",
                "topEig = " + std::to_string(out.certificate.topEig));
  return out;
}

VectorXd g_prime(const ModelParams& m, const RealLineSolution& sol) {
  if (!sol.certificate.accepted || sol.certificate.boundary || !(sol.certificate.topEig < 1.0))
    throw Error(Errc::SingularJacobian, "qve", "g_prime", "certificate at the boundary");
  MatrixXd A = gamma(m).entries;
  A.diagonal() -= sol.g.cwiseAbs2().cwiseInverse();
  try {
    return linalg::solve_linear(A, VectorXd::Ones(m.K()));
  } catch (const Error& e) {
    if (e.code() == Errc::Singular) throw Error(Errc::SingularJacobian, "qve", "g_prime", "");
    throw;
  }
}

double secular(const ModelParams& m, double lambda) {
  const auto sol = solve_real(m, lambda);
  MatrixXd A = -(sol.g.asDiagonal() * omega(m).entries);
  A.diagonal().array() += 1.0;
  return A.determinant();
}

DensityCurve density(const ModelParams& m, const std::vector<double>& grid,
                     const std::vector<double>& etaSchedule) {
  if (grid.empty()) throw Error(Errc::BadConfig, "qve", "density", "empty grid");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw Error(Errc::BadConfig, "qve", "density", "grid not ascending");
  if (etaSchedule.empty() || !(etaSchedule.back() > 0.0))
    throw Error(Errc::BadConfig, "qve", "density", "bad eta schedule");
  for (std::size_t i = 1; i < etaSchedule.size(); ++i)
    if (!(etaSchedule[i] < etaSchedule[i - 1]))
      throw Error(Errc::BadConfig, "qve", "density", "eta schedule not decreasing");

  const Problem p(m);
  const SolverOptions opts;
  const double eta = etaSchedule.back();
  const int K = m.K();
  DensityCurve c;
  c.grid = grid;
  c.eta = eta;
  c.density.assign(grid.size(), 0.0);
  c.componentDensities.assign(K, std::vector<double>(grid.size(), 0.0));
  c.failed.assign(grid.size(), false);

  std::optional<VectorXcd> prev;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const cplx z{grid[i], -eta};
    std::optional<QveSolution> sol;
    if (prev) {
      try {
        sol = solve_at(p, z, prev, opts, "density");
      } catch (const NoConvergenceError&) {
      }
    }
    if (!sol) {
      try {
        sol = ladder(p, grid[i], etaSchedule, +1, opts, "density").back();
      } catch (const NoConvergenceError&) {
      }
    }
    if (!sol) {
      c.failed[i] = true;
      prev.reset();
      continue;
    }
    c.density[i] = sol->gX.imag() / M_PI;
    for (int k = 0; k < K; ++k) c.componentDensities[k][i] = sol->g(k).imag() / M_PI;
    c.maxResidual = std::max(c.maxResidual, sol->residual);
    c.herglotz = c.herglotz && on_branch(sol->g, +1);
    prev = sol->g;
  }
  return c;
}

Bracket default_bracket(const ModelParams& m) {
  const VectorXd rowSums = gamma(m).entries.rowwise().sum();
  const double rmax = rowSums.maxCoeff();
  // Diagonal shift -Gamma 1 plus a noise part of norm at most 2 sqrt(max row variance).
  return Bracket{-rmax - 2.0 * std::sqrt(rmax) - 0.1, 1.05};
}

SupportInfo rightmost_edge(const ModelParams& m, std::optional<Bracket> bracket, double resolution) {
  const Bracket br = bracket.value_or(default_bracket(m));
  const Problem p(m);
  const MatrixXd Om = omega(m).entries;

  double hi = br.hi;
  auto okHi = try_real(m, hi);
  if (!okHi) {
    hi += 1.0;  // widen once
    okHi = try_real(m, hi);
    if (!okHi)
      throw Error(Errc::BracketFailure, "qve", "rightmost_edge", "upper end not outside support");
  }
  const double step = std::min(0.01, (hi - br.lo) / 50.0);
  double good = hi;
  RealLineSolution goodSol = *okHi;
  double bad = hi;
  for (double x = hi - step;; x -= step) {
    if (x < br.lo)
      throw Error(Errc::BracketFailure, "qve", "rightmost_edge", "no support point in bracket");
    auto s = try_real(m, x);
    if (!s) {
      bad = x;
      break;
    }
    good = x;
    goodSol = std::move(*s);
  }
  while (good - bad > resolution) {
    const double mid = 0.5 * (good + bad);
    if (auto s = try_real(m, mid)) {
      good = mid;
      goodSol = std::move(*s);
    } else {
      bad = mid;
    }
  }

  SupportInfo info;
  info.rightEdge = good;
  VectorXd g = goodSol.g;
  double lambda = good;
  if ((g.array() > 0.0).all() && fold_newton(p, Om, g, lambda) &&
      lambda >= bad - 1e-6 && lambda <= good + 1e-6)
    info.rightEdge = lambda;

  if (auto probe = try_real(m, info.rightEdge + 1e-6))
    info.edgeResidual = std::abs(1.0 - probe->certificate.topEig);
  else
    info.edgeResidual = std::numeric_limits<double>::quiet_NaN();
  info.leftEdge = std::numeric_limits<double>::quiet_NaN();
  return info;
}

double leftmost_edge(const ModelParams& m, std::optional<Bracket> bracket, double resolution) {
  const Bracket br = bracket.value_or(default_bracket(m));
  const Problem p(m);
  const MatrixXd Om = omega(m).entries;

  double lo = br.lo;
  auto okLo = try_real(m, lo);
  if (!okLo) {
    lo -= 1.0;
    okLo = try_real(m, lo);
    if (!okLo)
      throw Error(Errc::BracketFailure, "qve", "leftmost_edge", "lower end not outside support");
  }
  const double step = std::min(0.01, (br.hi - lo) / 50.0);
  double good = lo;
  RealLineSolution goodSol = *okLo;
  double bad = lo;
  for (double x = lo + step;; x += step) {
    if (x > br.hi)
      throw Error(Errc::BracketFailure, "qve", "leftmost_edge", "no support point in bracket");
    auto s = try_real(m, x);
    if (!s) {
      bad = x;
      break;
    }
    good = x;
    goodSol = std::move(*s);
  }
  while (bad - good > resolution) {
    const double mid = 0.5 * (good + bad);
    if (auto s = try_real(m, mid)) {
      good = mid;
      goodSol = std::move(*s);
    } else {
      bad = mid;
    }
  }
  VectorXd g = goodSol.g;
  double lambda = good;
  if ((g.array() < 0.0).all() && fold_newton(p, Om, g, lambda) && lambda >= good - 1e-6 &&
      lambda <= bad + 1e-6)
    return lambda;
  return good;
}

SupportInfo support_info(const ModelParams& m, const DensityCurve* curve) {
  SupportInfo info = rightmost_edge(m);
  info.leftEdge = leftmost_edge(m);
  if (curve) {
    bool inside = false;
    double start = 0.0;
    const auto& x = curve->grid;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const bool on = !curve->failed[i] && curve->density[i] > 1e-6;
      if (on && !inside) {
        start = x[i];
        inside = true;
      } else if (!on && inside) {
        info.intervals.emplace_back(start, x[i - 1]);
        inside = false;
      }
    }
    if (inside) info.intervals.emplace_back(start, x.back());
  } else {
    info.intervals.emplace_back(info.leftEdge, info.rightEdge);
  }
  return info;
}

std::vector<double> default_grid(const SupportInfo& support, int count) {
  if (count < 2) throw Error(Errc::BadConfig, "qve", "default_grid", "count must be >= 2");
  const double lo = support.leftEdge - 0.1;
  const double hi = std::max(1.0, support.rightEdge) + 0.2;
  std::vector<double> grid(count);
  for (int i = 0; i < count; ++i) grid[i] = lo + (hi - lo) * i / (count - 1);
  return grid;
}

}  // namespace blockspike::qve
