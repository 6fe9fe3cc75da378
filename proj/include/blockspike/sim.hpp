#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "blockspike/model.hpp"
#include "blockspike/qve.hpp"

namespace blockspike::sim {

/// Contiguous blocks B_1, ..., B_K of [0, N) in index order.
struct BlockPartition {
  int N = 0;
  std::vector<int> sizes;
  std::vector<int> offsets;

  int K() const { return static_cast<int>(sizes.size()); }
  /// Block label of every index, length N.
  std::vector<int> labels() const;
};

/// Largest-remainder apportionment of N among rho; ties go to the lower block index.
/// Throws NTooSmall when some block would be empty.
BlockPartition make_partition(int N, const VectorXd& rho);

/// SplitMix64 finalizer; used to derive per-sample seeds as mix(seed, index).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

/// The raw random draws behind one sample: the signal x and the symmetric unit-variance
/// noise H. Draw order is fixed: x_0..x_{N-1}, then H column by column over i <= j, all
/// from one std::mt19937_64 seeded with derive_seed(seed, 0).
struct RawDraws {
  VectorXd x;
  MatrixXd H;
};

RawDraws draw(const ModelParams& m, int N, std::uint64_t seed);

struct SpikedSample {
  ModelParams model;
  BlockPartition partition;
  std::uint64_t seed = 0;
  VectorXd x;
  MatrixXd Y;       // x x^T / sqrt(N) + H . Delta^(1/2)
  MatrixXd Ytilde;  // stored already divided by sqrt(N)
};

/// Y and the transformed matrix Ytilde = Y . Sigma - Diag(Sigma 1) / sqrt(N), Sigma = 1/Delta.
SpikedSample sample(const ModelParams& m, int N, std::uint64_t seed);

enum class SpectrumMode { Full, TopOnly };

struct SimulationResult {
  std::uint64_t seed = 0;
  std::vector<double> eigenvalues;  // ascending; empty in TopOnly mode
  double topValue = 0.0;
  double secondValue = 0.0;
  VectorXd topVector;
  VectorXd overlapEmp;  // <x_k / ||x_k||, u_1>, sign fixed so <overlapEmp, sqrt(rho)> >= 0
  double overlapGlobal = 0.0;  // <u_1, x / ||x||> with the same sign
  double lowrankError = 0.0;   // ||V^T Z V / sqrt(N) - Omega||_op
  double residualBound = 0.0;
};

/// V^T Z V / sqrt(N), where column k of V is x restricted to block k and normalized.
MatrixXd lowrank_matrix(const SpikedSample& s);

SimulationResult spectrum(const SpikedSample& s, SpectrumMode mode = SpectrumMode::Full);

struct Histogram {
  std::vector<double> edges;  // bins + 1 ascending
  std::vector<long> counts;
};

Histogram histogram(const std::vector<double>& values, int bins);

struct MonteCarloOptions {
  SpectrumMode mode = SpectrumMode::Full;
  int histogramBins = 100;
  int threads = 0;  // 0 = hardware concurrency
};

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for one sample
};

struct MonteCarloResult {
  std::vector<SimulationResult> runs;  // in sample-index order
  Summary topValue;
  std::vector<Summary> overlapSq;  // per block
  Summary overlapGlobalSq;
  Histogram pooled;  // empty in TopOnly mode
};

/// `samples` independent draws with seeds derive_seed(seed, index + 1). Samples run in
/// parallel; every reduction walks the runs in index order, so results do not depend on
/// the thread count.
MonteCarloResult monte_carlo(const ModelParams& m, int N, int samples, std::uint64_t seed,
                             const MonteCarloOptions& opts = {});

/// Kolmogorov distance between the empirical CDF of `eigenvalues` and the trapezoid CDF of
/// `curve`. Throws GridTooCoarse when an eigenvalue falls outside the grid or the grid has
/// fewer than 10 points.
double empirical_cdf_distance(std::vector<double> eigenvalues, const qve::DensityCurve& curve);

}  // namespace blockspike::sim
