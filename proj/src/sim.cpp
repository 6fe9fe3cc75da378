#include "blockspike/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numeric>
#include <random>
#include <thread>

#include "blockspike/error.hpp"
#include "blockspike/linalg.hpp"

namespace blockspike::sim {

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Summary summarize(const std::vector<double>& v) {
  Summary s;
  if (v.empty()) return s;
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

}  // namespace

std::vector<int> BlockPartition::labels() const {
  std::vector<int> out(N);
  for (int k = 0; k < K(); ++k)
    std::fill(out.begin() + offsets[k], out.begin() + offsets[k] + sizes[k], k);
  return out;
}

BlockPartition make_partition(int N, const VectorXd& rho) {
  const int K = static_cast<int>(rho.size());
  if (N < K || K == 0)
    throw Error(Errc::NTooSmall, "sim", "make_partition",
                "N = " + std::to_string(N) + " < K = " + std::to_string(K));
  BlockPartition p;
  p.N = N;
  p.sizes.resize(K);
  std::vector<double> frac(K);
  int assigned = 0;
  for (int k = 0; k < K; ++k) {
    const double q = N * rho(k);
    p.sizes[k] = static_cast<int>(std::floor(q));
    frac[k] = q - p.sizes[k];
    assigned += p.sizes[k];
  }
  std::vector<int> order(K);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return frac[a] > frac[b]; });
  for (int r = 0; r < N - assigned; ++r) ++p.sizes[order[r % K]];
  p.offsets.resize(K);
  int off = 0;
  for (int k = 0; k < K; ++k) {
    if (p.sizes[k] == 0)
      throw Error(Errc::NTooSmall, "sim", "make_partition",
                  "block " + std::to_string(k) + " is empty at N = " + std::to_string(N));
    p.offsets[k] = off;
    off += p.sizes[k];
  }
  return p;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ (index * 0xD1B54A32D192ED03ULL));
}

RawDraws draw(const ModelParams& m, int N, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, 0));
  std::normal_distribution<double> normal(0.0, 1.0);
  RawDraws d;
  d.x.resize(N);
  if (m.prior() == Prior::Rademacher) {
    for (int i = 0; i < N; ++i) d.x(i) = (rng() >> 63) ? 1.0 : -1.0;
  } else {
    for (int i = 0; i < N; ++i) d.x(i) = normal(rng);
  }
  d.H.resize(N, N);
  for (int j = 0; j < N; ++j)
    for (int i = 0; i <= j; ++i) {
      const double h = normal(rng);
      d.H(i, j) = h;
      d.H(j, i) = h;
    }
  return d;
}

SpikedSample sample(const ModelParams& m, int N, std::uint64_t seed) {
  SpikedSample s{m, make_partition(N, m.rho()), seed, {}, {}, {}};
  RawDraws d = draw(m, N, seed);
  const std::vector<int> lab = s.partition.labels();
  const MatrixXd& S = m.S();
  const double sqN = std::sqrt(static_cast<double>(N));

  // Row sums of Sigma depend only on the block.
  VectorXd blockRowSum = VectorXd::Zero(m.K());
  for (int k = 0; k < m.K(); ++k)
    for (int l = 0; l < m.K(); ++l) blockRowSum(k) += S(k, l) * s.partition.sizes[l];

  s.x = std::move(d.x);
  s.Y.resize(N, N);
  s.Ytilde.resize(N, N);
  for (int j = 0; j < N; ++j) {
    const int b = lab[j];
    for (int i = 0; i < N; ++i) {
      const int a = lab[i];
      const double y = s.x(i) * s.x(j) / sqN + d.H(i, j) / std::sqrt(S(a, b));
      s.Y(i, j) = y;
      s.Ytilde(i, j) = y * S(a, b) / sqN;
    }
    s.Ytilde(j, j) -= blockRowSum(b) / N;
  }
  return s;
}

MatrixXd lowrank_matrix(const SpikedSample& s) {
  const int K = s.model.K();
  const int N = s.partition.N;
  const std::vector<int> lab = s.partition.labels();
  VectorXd norms = VectorXd::Zero(K);
  for (int i = 0; i < N; ++i) norms(lab[i]) += s.x(i) * s.x(i);
  norms = norms.cwiseSqrt();

  // (V^T Z V)_kl / sqrt(N) with Z_ij = x_i x_j s_ab / sqrt(N), summed entry by entry.
  MatrixXd L = MatrixXd::Zero(K, K);
  for (int j = 0; j < N; ++j) {
    const int b = lab[j];
    const double vj = s.x(j) / norms(b);
    for (int i = 0; i < N; ++i) {
      const int a = lab[i];
      const double vi = s.x(i) / norms(a);
      L(a, b) += vi * s.x(i) * s.x(j) * s.model.S()(a, b) * vj;
    }
  }
  return L / static_cast<double>(N);
}

SimulationResult spectrum(const SpikedSample& s, SpectrumMode mode) {
  SimulationResult r;
  r.seed = s.seed;
  const int N = s.partition.N;
  const int K = s.model.K();
  linalg::EigResult eig = mode == SpectrumMode::Full ? linalg::sym_eig(s.Ytilde)
                                                     : linalg::sym_eig_topk(s.Ytilde, 2);
  if (mode == SpectrumMode::Full) {
    r.eigenvalues.assign(eig.values.data(), eig.values.data() + eig.values.size());
    std::reverse(r.eigenvalues.begin(), r.eigenvalues.end());
  }
  r.topValue = eig.values(0);
  r.secondValue = N > 1 ? eig.values(1) : eig.values(0);
  r.residualBound = eig.residualBound;
  r.topVector = eig.vectors.col(0);

  r.overlapEmp = VectorXd::Zero(K);
  for (int k = 0; k < K; ++k) {
    const auto xk = s.x.segment(s.partition.offsets[k], s.partition.sizes[k]);
    const double nk = xk.norm();
    if (nk > 0.0)
      r.overlapEmp(k) = xk.dot(r.topVector.segment(s.partition.offsets[k], s.partition.sizes[k])) / nk;
  }
  if (r.overlapEmp.dot(s.model.rho().cwiseSqrt()) < 0.0) {
    r.overlapEmp = -r.overlapEmp;
    r.topVector = -r.topVector;
  }
  r.overlapGlobal = r.topVector.dot(s.x) / s.x.norm();

  const MatrixXd E = lowrank_matrix(s) - omega(s.model).entries;
  r.lowrankError = linalg::sym_opnorm(E);
  return r;
}

Histogram histogram(const std::vector<double>& values, int bins) {
  Histogram h;
  if (values.empty() || bins < 1) return h;
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  double lo = *mn, hi = *mx;
  if (hi <= lo) hi = lo + 1.0;
  h.edges.resize(bins + 1);
  for (int b = 0; b <= bins; ++b) h.edges[b] = lo + (hi - lo) * b / bins;
  h.counts.assign(bins, 0);
  for (double v : values) {
    int b = static_cast<int>((v - lo) / (hi - lo) * bins);
    h.counts[std::clamp(b, 0, bins - 1)]++;
  }
  return h;
}

MonteCarloResult monte_carlo(const ModelParams& m, int N, int samples, std::uint64_t seed,
                             const MonteCarloOptions& opts) {
  if (samples < 1) throw Error(Errc::BadConfig, "sim", "monte_carlo", "samples must be >= 1");
  make_partition(N, m.rho());  // fail early on tiny N

  MonteCarloResult out;
  out.runs.resize(samples);
  std::vector<std::exception_ptr> errors(samples);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i; (i = next.fetch_add(1)) < samples;) {
      try {
        const SpikedSample s = sample(m, N, derive_seed(seed, static_cast<std::uint64_t>(i) + 1));
        out.runs[i] = spectrum(s, opts.mode);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  int threads = opts.threads > 0 ? opts.threads : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, samples);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<double> top, glob;
  std::vector<std::vector<double>> blocks(m.K());
  std::vector<double> pooled;
  for (const auto& r : out.runs) {
    top.push_back(r.topValue);
    glob.push_back(r.overlapGlobal * r.overlapGlobal);
    for (int k = 0; k < m.K(); ++k) blocks[k].push_back(r.overlapEmp(k) * r.overlapEmp(k));
    pooled.insert(pooled.end(), r.eigenvalues.begin(), r.eigenvalues.end());
  }
  out.topValue = summarize(top);
  out.overlapGlobalSq = summarize(glob);
  for (const auto& b : blocks) out.overlapSq.push_back(summarize(b));
  out.pooled = histogram(pooled, opts.histogramBins);
  return out;
}

double empirical_cdf_distance(std::vector<double> eigenvalues, const qve::DensityCurve& curve) {
  const auto& x = curve.grid;
  const size_t n = x.size();
  if (n < 10 || curve.density.size() != n)
    throw Error(Errc::GridTooCoarse, "sim", "empirical_cdf_distance", "fewer than 10 grid points");
  if (eigenvalues.empty()) return 0.0;
  std::sort(eigenvalues.begin(), eigenvalues.end());
  if (eigenvalues.front() < x.front() || eigenvalues.back() > x.back())
    throw Error(Errc::GridTooCoarse, "sim", "empirical_cdf_distance",
                "eigenvalues outside [" + std::to_string(x.front()) + ", " + std::to_string(x.back()) + "]");

  std::vector<double> F(n, 0.0);
  for (size_t i = 1; i < n; ++i)
    F[i] = F[i - 1] + 0.5 * (curve.density[i] + curve.density[i - 1]) * (x[i] - x[i - 1]);

  const double count = static_cast<double>(eigenvalues.size());
  double d = 0.0;
  size_t j = 0;
  for (size_t i = 0; i < eigenvalues.size(); ++i) {
    const double e = eigenvalues[i];
    while (j + 2 < n && x[j + 1] < e) ++j;
    const double w = (e - x[j]) / (x[j + 1] - x[j]);
    const double Ft = std::clamp(F[j] + std::clamp(w, 0.0, 1.0) * (F[j + 1] - F[j]), 0.0, 1.0);
    d = std::max({d, std::abs(Ft - i / count), std::abs(Ft - (i + 1) / count)});
  }
  return d;
}

}  // namespace blockspike::sim
