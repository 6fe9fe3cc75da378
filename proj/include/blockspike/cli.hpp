#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "blockspike/model.hpp"
#include "blockspike/qve.hpp"
#include "blockspike/sim.hpp"
#include "blockspike/theory.hpp"

namespace blockspike::cli {

/// Exit codes of the command-line tool.
enum Exit : int { kOk = 0, kSelftestFailed = 1, kConfigError = 2, kNumericalError = 3 };

/// Entry point behind the `blockspike` executable.
int run(int argc, char** argv);

// ---------------------------------------------------------------------------------------
// Parameter sweeps

/// A sweep coordinate: "S.k.l" moves s_kl and s_lk together, "rho.k" sets rho_k and rescales
/// the other proportions to keep the sum at one. Indices in the string are 1-based.
struct ParamPath {
  enum class Kind { SEntry, RhoEntry } kind = Kind::SEntry;
  int k = 0;  // 0-based
  int l = 0;
};

ParamPath parse_param(const std::string& text, int K);
ModelParams apply_param(const ModelParams& base, const ParamPath& p, double t);

/// Smallest admissible value of an S entry along a sweep; targets below snr(kMinEntry)
/// are clamped there.
inline constexpr double kMinEntry = 1e-3;

/// Value of the parameter where the snr hits `target`, by bisection. S entries are searched
/// on [kMinEntry, inf) (snr is increasing in every s_kl), rho entries on (0, 1) where a sign
/// change is required. Returns kMinEntry when target < snr(kMinEntry).
double t_for_snr(const ModelParams& base, const ParamPath& p, double target);

struct SweepPoint {
  double t = 0.0;
  double snr = 0.0;
  double target = 0.0;  // requested snr, NaN when the sweep runs over t directly
  theory::TheoryPrediction theory;
  sim::MonteCarloResult mc;
};

struct SweepOptions {
  int N = 3000;
  int samples = 10;
  std::uint64_t seed = 1;
  sim::SpectrumMode mode = sim::SpectrumMode::TopOnly;
  std::function<void(const SweepPoint&)> progress;
};

/// Theory plus Monte Carlo at every t. Point i uses seed derive_seed(opts.seed, i).
std::vector<SweepPoint> sweep(const ModelParams& base, const ParamPath& p, const std::vector<double>& ts,
                              const SweepOptions& opts, const std::vector<double>& targets = {});

// ---------------------------------------------------------------------------------------
// Figure reproduction

/// K = 2, rho = (1/2, 1/2), S = [[t, 1/2], [1/2, 1/4]].
ModelParams fig1_model(double t);
/// Left family S = [[t, 1/2], [1/2, 1/2]], right family S = [[1, t], [t, 1/2]].
ModelParams fig2_model(bool right, double t);

struct Fig1Panel {
  double targetSnr = 0.0;
  double t = 0.0;
  theory::TheoryPrediction theory;
  qve::SupportInfo support;
  qve::DensityCurve curve;
  sim::SimulationResult sample;
  double cdfDistance = 0.0;  // bulk only: the top eigenvalue is dropped above the transition
};

/// One panel: t from bisection on snr, density on the default 2000-point grid at
/// eta = 1e-7, and one N x N sample with seed derive_seed(seed, 1) (the same draw as
/// `simulate --samples 1 --seed seed`).
Fig1Panel fig1_panel(double targetSnr, int N = 3000, std::uint64_t seed = 1);

/// snr targets 0.5, 0.75, ..., 3.5.
std::vector<double> fig2_targets();

// ---------------------------------------------------------------------------------------
// Self test

struct Check {
  std::string name;
  bool passed = false;
  std::string measured;
};

std::vector<Check> selftest();

}  // namespace blockspike::cli
