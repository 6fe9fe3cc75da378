#include "blockspike/cli.hpp"

#include <cmath>
#include <filesystem>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "blockspike/error.hpp"
#include "blockspike/io.hpp"
#include "blockspike/linalg.hpp"

namespace blockspike::cli {

namespace fs = std::filesystem;
using io::json;

namespace {

[[noreturn]] void bad(const std::string& op, const std::string& detail) {
  throw Error(Errc::BadConfig, "cli", op, detail);
}

double snr_of(const ModelParams& m) { return omega(m).snr; }

std::vector<double> split_colon(const std::string& text, size_t parts, const std::string& op) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) {
    try {
      size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      bad(op, "cannot parse '" + text + "'");
    }
  }
  if (out.size() != parts) bad(op, "expected " + std::to_string(parts) + " ':'-separated fields in '" + text + "'");
  return out;
}

std::vector<double> linspace(double a, double b, int count) {
  std::vector<double> v(count);
  for (int i = 0; i < count; ++i) v[i] = count == 1 ? a : a + (b - a) * i / (count - 1);
  return v;
}

// Random model with K <= 4 blocks and snr drawn in [snrLo, snrHi].
ModelParams random_model(std::mt19937_64& rng, int K, double snrLo, double snrHi) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  VectorXd rho(K);
  for (int k = 0; k < K; ++k) rho(k) = 0.2 + u(rng);
  rho /= rho.sum();
  MatrixXd S(K, K);
  for (int k = 0; k < K; ++k)
    for (int l = k; l < K; ++l) S(k, l) = S(l, k) = std::exp(2.0 * u(rng) - 1.0);
  const double target = snrLo + (snrHi - snrLo) * u(rng);
  const auto m0 = make_model(rho, S);
  return make_model(rho, S * (target / snr_of(m0)));
}

}  // namespace

// ---------------------------------------------------------------------------------------

ParamPath parse_param(const std::string& text, int K) {
  ParamPath p;
  std::stringstream ss(text);
  std::string head, a, b;
  std::getline(ss, head, '.');
  std::getline(ss, a, '.');
  std::getline(ss, b, '.');
  auto index = [&](const std::string& s) {
    try {
      size_t used = 0;
      const int i = std::stoi(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      if (i < 1 || i > K) throw Error(Errc::IndexOutOfRange, "cli", "parse_param", text);
      return i - 1;
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
      bad("parse_param", "bad index in '" + text + "'");
    }
  };
  if (head == "S" && !a.empty() && !b.empty() && ss.eof()) {
    p.kind = ParamPath::Kind::SEntry;
    p.k = index(a);
    p.l = index(b);
  } else if (head == "rho" && !a.empty() && b.empty()) {
    if (K < 2) bad("parse_param", "rho sweeps need K >= 2");
    p.kind = ParamPath::Kind::RhoEntry;
    p.k = index(a);
  } else {
    bad("parse_param", "expected S.k.l or rho.k, got '" + text + "'");
  }
  return p;
}

ModelParams apply_param(const ModelParams& base, const ParamPath& p, double t) {
  if (p.kind == ParamPath::Kind::SEntry) return with_s_entry(base, p.k, p.l, t);
  if (!(t > 0.0 && t < 1.0)) bad("apply_param", "rho entry must lie in (0, 1)");
  VectorXd rho = base.rho();
  const double rest = 1.0 - rho(p.k);
  for (int j = 0; j < base.K(); ++j) rho(j) = j == p.k ? t : rho(j) * (1.0 - t) / rest;
  return make_model(rho, base.S(), base.prior());
}

double t_for_snr(const ModelParams& base, const ParamPath& p, double target) {
  auto f = [&](double t) { return snr_of(apply_param(base, p, t)) - target; };
  double lo, hi;
  if (p.kind == ParamPath::Kind::SEntry) {
    lo = kMinEntry;
    if (f(lo) >= 0.0) return lo;
    hi = std::max(1.0, 2.0 * lo);
    for (int i = 0; f(hi) < 0.0; ++i) {
      if (i > 60) throw Error(Errc::BracketFailure, "cli", "t_for_snr", "snr target unreachable");
      hi *= 2.0;
    }
  } else {
    lo = 1e-6;
    hi = 1.0 - 1e-6;
    if ((f(lo) < 0.0) == (f(hi) < 0.0))
      bad("t_for_snr", "snr target not bracketed on the rho range");
  }
  const bool increasing = f(lo) < 0.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    ((f(mid) < 0.0) == increasing ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<SweepPoint> sweep(const ModelParams& base, const ParamPath& p, const std::vector<double>& ts,
                              const SweepOptions& opts, const std::vector<double>& targets) {
  std::vector<SweepPoint> out;
  sim::MonteCarloOptions mco;
  mco.mode = opts.mode;
  for (size_t i = 0; i < ts.size(); ++i) {
    SweepPoint pt;
    pt.t = ts[i];
    pt.target = i < targets.size() ? targets[i] : std::nan("");
    const ModelParams m = apply_param(base, p, pt.t);
    pt.snr = snr_of(m);
    pt.theory = theory::predict(m);
    if (opts.samples > 0) pt.mc = sim::monte_carlo(m, opts.N, opts.samples, sim::derive_seed(opts.seed, i), mco);
    if (opts.progress) opts.progress(pt);
    out.push_back(std::move(pt));
  }
  return out;
}

// ---------------------------------------------------------------------------------------

ModelParams fig1_model(double t) {
  MatrixXd S(2, 2);
  S << t, 0.5, 0.5, 0.25;
  return make_model(VectorXd::Constant(2, 0.5), S);
}

ModelParams fig2_model(bool right, double t) {
  MatrixXd S(2, 2);
  if (right)
    S << 1.0, t, t, 0.5;
  else
    S << t, 0.5, 0.5, 0.5;
  return make_model(VectorXd::Constant(2, 0.5), S);
}

std::vector<double> fig2_targets() {
  std::vector<double> v;
  for (int i = 0; i <= 12; ++i) v.push_back(0.5 + 0.25 * i);
  return v;
}

Fig1Panel fig1_panel(double targetSnr, int N, std::uint64_t seed) {
  Fig1Panel panel;
  panel.targetSnr = targetSnr;
  panel.t = t_for_snr(fig1_model(1.0), ParamPath{ParamPath::Kind::SEntry, 0, 0}, targetSnr);
  const ModelParams m = fig1_model(panel.t);
  panel.theory = theory::predict(m);
  panel.support = qve::support_info(m);
  panel.curve = qve::density(m, qve::default_grid(panel.support), qve::eta_schedule(1e-7));

  sim::MonteCarloOptions mco;
  mco.mode = sim::SpectrumMode::Full;
  panel.sample = sim::monte_carlo(m, N, 1, seed, mco).runs.front();
  std::vector<double> bulk = panel.sample.eigenvalues;
  if (panel.theory.phase == theory::Phase::Supercritical) bulk.pop_back();
  panel.cdfDistance = sim::empirical_cdf_distance(bulk, panel.curve);
  return panel;
}

// ---------------------------------------------------------------------------------------

std::vector<Check> selftest() {
  std::vector<Check> checks;
  auto add = [&](std::string name, bool ok, std::string measured) {
    checks.push_back({std::move(name), ok, std::move(measured)});
  };
  char buf[256];

  // Scalar model: closed forms of the quadratic s g^2 - (z + s) g + 1 = 0.
  for (double s : {0.25, 0.5, 1.0, 1.5, 2.0, 4.0, 10.0}) {
    const auto m = make_model(VectorXd::Ones(1), MatrixXd::Constant(1, 1, s));
    const auto p = theory::predict(m);
    const double edgeErr = std::abs(p.rightEdge - (2.0 * std::sqrt(s) - s));
    const double gErr = std::abs(p.gAtOne(0) - std::min(1.0, 1.0 / s));
    double ovErr = 0.0, cErr = 0.0;
    if (s > 1.0) {
      ovErr = std::abs(p.overlapAbs(0) * p.overlapAbs(0) - (1.0 - 1.0 / s));
      cErr = std::abs(p.C - (s - 1.0) / s);
    }
    std::snprintf(buf, sizeof buf, "edge %.2e g(1) %.2e overlap^2 %.2e C %.2e", edgeErr, gErr, ovErr, cErr);
    add("scalar model s=" + std::to_string(s).substr(0, 5), edgeErr <= 1e-6 && gErr <= 1e-8 && ovErr <= 1e-8 && cErr <= 1e-8,
        buf);
  }

  // Certificate: y > 0 iff lambda_1(D_g Omega D_g) < 1 on random positive g.
  {
    std::mt19937_64 rng(20240611);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int bad = 0, trials = 0;
    for (; trials < 1000; ++trials) {
      const int K = 1 + static_cast<int>(u(rng) * 4.0);
      const auto m = random_model(rng, K, 0.2, 5.0);
      VectorXd g(K);
      for (int k = 0; k < K; ++k) g(k) = 0.1 + u(rng);
      const MatrixXd Om = omega(m).entries;
      const double top = linalg::sym_eigvals(g.asDiagonal() * Om * g.asDiagonal())(0);
      double c = std::exp(std::log(0.3) + u(rng) * std::log(10.0));
      if (std::abs(c - 1.0) < 1e-6) c = 1.1;
      g *= std::sqrt(c / top);
      try {
        const auto cert = qve::selection_certificate(m, g);
        if (cert.yPositive != (cert.topEig < 1.0)) ++bad;
      } catch (const Error&) {
        ++bad;
      }
    }
    add("certificate equivalence", bad == 0, std::to_string(bad) + " counterexamples in " + std::to_string(trials));
  }

  // snr increases under every s_kl bump; reduced models lose snr.
  {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int badMono = 0, badReduced = 0;
    for (int i = 0; i < 100; ++i) {
      const int K = 2 + static_cast<int>(u(rng) * 3.0);
      const auto m = random_model(rng, K, 0.2, 5.0);
      const double base = snr_of(m);
      for (int k = 0; k < K; ++k)
        for (int l = k; l < K; ++l) {
          const double h = 1e-4 * m.S()(k, l);
          if (!(snr_of(with_s_entry(m, k, l, m.S()(k, l) + h)) > base) || !(snr_derivative(m, k, l) > 0.0))
            ++badMono;
        }
      std::vector<int> keep;
      for (int k = 0; k < K; ++k)
        if (u(rng) < 0.5) keep.push_back(k);
      if (keep.empty()) keep.push_back(0);
      if (static_cast<int>(keep.size()) == K) keep.pop_back();
      if (!(snr_of(reduced_model(m, keep)) < base)) ++badReduced;
    }
    add("snr monotone in s_kl", badMono == 0, std::to_string(badMono) + " violations");
    add("reduced model snr smaller", badReduced == 0, std::to_string(badReduced) + " violations");
  }
  return checks;
}

// ---------------------------------------------------------------------------------------
// Commands

namespace {

struct Options {
  std::string model;
  int N = 3000;
  int samples = 1;
  std::uint64_t seed = 1;
  std::string grid;
  double eta = 1e-7;
  std::string out = ".";
  std::string format = "both";
  int threads = 0;
  bool topOnly = false;
  bool dumpEigenvalues = false;
  std::string param;
  std::string range;
  std::string snr;
  std::string figure;
};

bool want_json(const Options& o) { return o.format != "csv"; }
bool want_csv(const Options& o) { return o.format != "json"; }

fs::path prepare_out(const Options& o) {
  const fs::path dir(o.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) bad("prepare_out", "cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

std::vector<double> grid_from(const Options& o, const qve::SupportInfo& support) {
  if (o.grid.empty()) return qve::default_grid(support);
  const auto g = split_colon(o.grid, 3, "grid");
  const int count = static_cast<int>(g[2]);
  if (count < 2 || g[2] != count || !(g[1] > g[0])) bad("grid", "need MIN < MAX and integer COUNT >= 2");
  return linspace(g[0], g[1], count);
}

int cmd_predict(const Options& o) {
  const ModelParams m = io::load_model(o.model);
  const fs::path dir = prepare_out(o);
  const json meta = io::metadata(m, o.seed);

  const auto pred = theory::predict(m);
  auto support = qve::support_info(m);
  const auto curve = qve::density(m, grid_from(o, support), qve::eta_schedule(o.eta));
  support = qve::support_info(m, &curve);

  if (want_json(o)) {
    json p = io::to_json(pred);
    p["metadata"] = meta;
    p["model"] = io::model_to_json(m);
    io::write_json(dir / "prediction.json", p);
    json e = io::to_json(support);
    e["metadata"] = meta;
    io::write_json(dir / "edges.json", e);
  }
  if (want_csv(o)) {
    json cm = meta;
    cm["eta"] = curve.eta;
    io::write_density_csv(dir / "density.csv", curve, cm);
  }
  std::cout << "phase " << theory::to_string(pred.phase) << ", snr " << pred.snr << ", top eigenvalue limit "
            << pred.topEigLimit << ", right edge " << pred.rightEdge << '\n';
  return kOk;
}

int cmd_simulate(const Options& o) {
  const ModelParams m = io::load_model(o.model);
  const fs::path dir = prepare_out(o);
  json meta = io::metadata(m, o.seed);
  meta["N"] = o.N;
  meta["samples"] = o.samples;

  sim::MonteCarloOptions mco;
  mco.mode = o.topOnly ? sim::SpectrumMode::TopOnly : sim::SpectrumMode::Full;
  mco.threads = o.threads;
  const auto mc = sim::monte_carlo(m, o.N, o.samples, o.seed, mco);

  if (want_json(o)) {
    json j = io::to_json(mc);
    j["metadata"] = meta;
    io::write_json(dir / "simulation.json", j);
  }
  if (want_csv(o)) {
    if (!o.topOnly) io::write_histogram_csv(dir / "histogram.csv", mc.pooled, meta);
    std::vector<std::string> header{"sample", "seed"};
    for (int k = 0; k < m.K(); ++k) header.push_back("mu_" + std::to_string(k + 1));
    header.insert(header.end(), {"q", "top_value", "second_value", "lowrank_error"});
    io::CsvWriter w(dir / "overlaps.csv", meta, header);
    for (size_t i = 0; i < mc.runs.size(); ++i) {
      const auto& r = mc.runs[i];
      std::vector<double> row{static_cast<double>(i), static_cast<double>(r.seed)};
      for (int k = 0; k < m.K(); ++k) row.push_back(r.overlapEmp(k));
      row.insert(row.end(), {r.overlapGlobal, r.topValue, r.secondValue, r.lowrankError});
      w.row(row);
    }
  }
  if (o.dumpEigenvalues && !o.topOnly) {
    std::vector<double> all;
    for (const auto& r : mc.runs) all.insert(all.end(), r.eigenvalues.begin(), r.eigenvalues.end());
    io::write_eigenvalues_binary(dir / "eigenvalues.bin", all);
  }
  std::cout << "top eigenvalue " << mc.topValue.mean << " +- " << mc.topValue.std << ", overlap^2";
  for (const auto& s : mc.overlapSq) std::cout << ' ' << s.mean;
  std::cout << '\n';
  return kOk;
}

std::vector<std::string> sweep_header(int K) {
  std::vector<std::string> h{"t", "target_snr", "snr", "phase", "theory_top", "mc_top_mean", "mc_top_std"};
  for (int k = 1; k <= K; ++k) h.push_back("theory_overlap_sq_" + std::to_string(k));
  for (int k = 1; k <= K; ++k) h.push_back("mc_overlap_sq_mean_" + std::to_string(k));
  for (int k = 1; k <= K; ++k) h.push_back("mc_overlap_sq_std_" + std::to_string(k));
  h.insert(h.end(), {"theory_q_sq", "mc_q_sq_mean", "mc_q_sq_std"});
  return h;
}

std::vector<double> sweep_row(const SweepPoint& p, int K) {
  std::vector<double> r{p.t, p.target, p.snr, static_cast<double>(p.theory.phase), p.theory.topEigLimit,
                        p.mc.topValue.mean, p.mc.topValue.std};
  for (int k = 0; k < K; ++k) r.push_back(p.theory.overlapAbs(k) * p.theory.overlapAbs(k));
  for (int k = 0; k < K; ++k) r.push_back(k < static_cast<int>(p.mc.overlapSq.size()) ? p.mc.overlapSq[k].mean : std::nan(""));
  for (int k = 0; k < K; ++k) r.push_back(k < static_cast<int>(p.mc.overlapSq.size()) ? p.mc.overlapSq[k].std : std::nan(""));
  r.insert(r.end(), {p.theory.overlapGlobal * p.theory.overlapGlobal, p.mc.overlapGlobalSq.mean,
                     p.mc.overlapGlobalSq.std});
  return r;
}

void warn_if_non_monotone(const std::vector<SweepPoint>& pts) {
  int up = 0, down = 0;
  for (size_t i = 1; i < pts.size(); ++i) (pts[i].snr >= pts[i - 1].snr ? up : down)++;
  if (up && down) std::cerr << "warning: NonMonotoneWarning: snr is not monotone along the sweep\n";
}

void write_sweep(const fs::path& dir, const std::string& stem, const std::vector<SweepPoint>& pts, int K,
                 const json& meta, const Options& o) {
  if (want_csv(o)) {
    io::CsvWriter w(dir / (stem + ".csv"), meta, sweep_header(K));
    for (const auto& p : pts) w.row(sweep_row(p, K));
  }
  if (want_json(o)) {
    json arr = json::array();
    for (const auto& p : pts) {
      json j{{"t", p.t}, {"snr", p.snr}, {"theory", io::to_json(p.theory)}, {"monteCarlo", io::to_json(p.mc, false)}};
      if (!std::isnan(p.target)) j["targetSnr"] = p.target;
      arr.push_back(j);
    }
    io::write_json(dir / (stem + ".json"), json{{"metadata", meta}, {"points", arr}});
  }
}

SweepOptions sweep_options(const Options& o, int K) {
  SweepOptions so;
  so.N = o.N;
  so.samples = o.samples;
  so.seed = o.seed;
  so.progress = [K](const SweepPoint& p) {
    std::cerr << "  t " << p.t << "  snr " << p.snr;
    for (int k = 0; k < K && k < static_cast<int>(p.mc.overlapSq.size()); ++k)
      std::cerr << "  mu" << k + 1 << "^2 " << p.mc.overlapSq[k].mean << " (theory "
                << p.theory.overlapAbs(k) * p.theory.overlapAbs(k) << ")";
    std::cerr << '\n';
  };
  return so;
}

int cmd_sweep(const Options& o) {
  const ModelParams base = io::load_model(o.model);
  const ParamPath path = parse_param(o.param, base.K());
  if (o.range.empty() == o.snr.empty()) bad("sweep", "give exactly one of --range and --snr");
  const fs::path dir = prepare_out(o);

  std::vector<double> ts, targets;
  const auto fields = split_colon(o.range.empty() ? o.snr : o.range, 3, "sweep");
  const int count = static_cast<int>(fields[2]);
  if (count < 1 || fields[2] != count) bad("sweep", "COUNT must be a positive integer");
  if (!o.range.empty()) {
    ts = linspace(fields[0], fields[1], count);
  } else {
    targets = linspace(fields[0], fields[1], count);
    for (double s : targets) ts.push_back(t_for_snr(base, path, s));
  }
  const auto pts = sweep(base, path, ts, sweep_options(o, base.K()), targets);
  warn_if_non_monotone(pts);
  json meta = io::metadata(base, o.seed);
  meta["param"] = o.param;
  meta["N"] = o.N;
  meta["samples"] = o.samples;
  write_sweep(dir, "sweep", pts, base.K(), meta, o);
  return kOk;
}

void write_fig1_script(const fs::path& dir, const std::vector<Fig1Panel>& panels) {
  std::ofstream gp(dir / "fig1.gp");
  gp << "set terminal pngcairo size 1500,450\nset output 'fig1.png'\n"
        "set datafile separator ','\nset datafile columnheaders\nset style fill solid 0.4\n"
        "set multiplot layout 1," << panels.size() << "\n";
  for (size_t i = 0; i < panels.size(); ++i) {
    const auto& p = panels[i];
    const std::string id = std::to_string(i + 1);
    gp << "set title 'snr = " << p.targetSnr << "'\n"
       << "plot 'fig1_panel" << id << "_histogram.csv' using (($1+$2)/2):4 with boxes lc rgb '#4477aa' title 'sample', \\\n"
       << "     'fig1_panel" << id << "_density.csv' using 1:2 with lines lw 2 lc rgb 'black' title 'theory', \\\n"
       << "     '-' using 1:2 with points pt 9 ps 2 lc rgb 'red' title 'top eigenvalue'\n"
       << p.sample.topValue << ",0\ne\n";
  }
  gp << "unset multiplot\n";
}

int cmd_fig1(const Options& o) {
  const fs::path dir = prepare_out(o);
  std::vector<Fig1Panel> panels;
  json summary = json::array();
  for (double target : {0.5, 1.0, 3.0}) {
    panels.push_back(fig1_panel(target, o.N, o.seed));
    const auto& p = panels.back();
    const std::string id = std::to_string(panels.size());
    const ModelParams m = fig1_model(p.t);
    json meta = io::metadata(m, o.seed);
    meta["derived_t"] = p.t;
    meta["N"] = o.N;
    io::write_density_csv(dir / ("fig1_panel" + id + "_density.csv"), p.curve, meta);

    const auto h = sim::histogram(p.sample.eigenvalues, 80);
    io::CsvWriter w(dir / ("fig1_panel" + id + "_histogram.csv"), meta, {"bin_left", "bin_right", "count", "density"});
    const double n = static_cast<double>(p.sample.eigenvalues.size());
    for (size_t b = 0; b < h.counts.size(); ++b)
      w.row({h.edges[b], h.edges[b + 1], static_cast<double>(h.counts[b]),
             h.counts[b] / (n * (h.edges[b + 1] - h.edges[b]))});

    summary.push_back({{"metadata", meta},
                       {"targetSnr", target},
                       {"t", p.t},
                       {"theory", io::to_json(p.theory)},
                       {"edges", io::to_json(p.support)},
                       {"topValue", p.sample.topValue},
                       {"secondValue", p.sample.secondValue},
                       {"cdfDistance", p.cdfDistance}});
    std::cout << "panel " << id << ": t " << p.t << ", snr " << p.theory.snr << ", right edge " << p.support.rightEdge
              << ", top eigenvalue " << p.sample.topValue << ", bulk distance " << p.cdfDistance << '\n';
  }
  io::write_json(dir / "fig1_summary.json", summary);
  write_fig1_script(dir, panels);
  return kOk;
}

int cmd_fig2(const Options& o) {
  const fs::path dir = prepare_out(o);
  const ParamPath left{ParamPath::Kind::SEntry, 0, 0};
  const ParamPath right{ParamPath::Kind::SEntry, 0, 1};
  SweepOptions so = sweep_options(o, 2);
  json summary;
  for (bool isRight : {false, true}) {
    const std::string stem = isRight ? "fig2_right" : "fig2_left";
    const ModelParams base = fig2_model(isRight, 1.0);
    const ParamPath& path = isRight ? right : left;
    std::vector<double> ts;
    const auto targets = fig2_targets();
    for (double s : targets) ts.push_back(t_for_snr(base, path, s));
    std::cerr << stem << '\n';
    const auto pts = sweep(base, path, ts, so, targets);
    json meta = io::metadata(base, o.seed);
    meta["N"] = o.N;
    meta["samples"] = o.samples;
    meta["derived_t"] = ts;
    write_sweep(dir, stem, pts, 2, meta, o);

    // Dense theory curve for the plot.
    SweepOptions theoryOnly;
    theoryOnly.samples = 0;
    std::vector<double> dense = linspace(0.5, 3.5, 61), denseT;
    for (double s : dense) denseT.push_back(t_for_snr(base, path, s));
    const auto curve = sweep(base, path, denseT, theoryOnly, dense);
    io::CsvWriter w(dir / (stem + "_theory.csv"), meta, {"t", "snr", "overlap_sq_1", "overlap_sq_2", "q_sq"});
    for (const auto& p : curve)
      w.row({p.t, p.snr, p.theory.overlapAbs(0) * p.theory.overlapAbs(0),
             p.theory.overlapAbs(1) * p.theory.overlapAbs(1), p.theory.overlapGlobal * p.theory.overlapGlobal});
    summary[stem] = {{"derived_t", ts}, {"snr_first", pts.front().snr}};
  }
  io::write_json(dir / "fig2_summary.json", summary);

  std::ofstream gp(dir / "fig2.gp");
  gp << "set terminal pngcairo size 1100,450\nset output 'fig2.png'\n"
        "set datafile separator ','\nset datafile columnheaders\nset multiplot layout 1,2\n"
        "set xlabel 'snr'\nset ylabel 'overlap^2'\n";
  for (const char* stem : {"fig2_left", "fig2_right"}) {
    gp << "plot '" << stem << "_theory.csv' using 2:3 with lines lc rgb '#cc3311' title 'block 1', \\\n"
       << "     '" << stem << "_theory.csv' using 2:4 with lines lc rgb '#0077bb' title 'block 2', \\\n"
       << "     '" << stem << ".csv' using 3:11 with points pt 7 lc rgb '#cc3311' notitle, \\\n"
       << "     '" << stem << ".csv' using 3:12 with points pt 7 lc rgb '#0077bb' notitle\n";
  }
  gp << "unset multiplot\n";
  return kOk;
}

int cmd_selftest() {
  int failed = 0;
  for (const auto& c : selftest()) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.measured << '\n';
    failed += !c.passed;
  }
  return failed ? kSelftestFailed : kOk;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Spectral method for block-structured spiked Wigner models"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(io::kVersion));
  Options o;

  auto model = [&](CLI::App* sc) { sc->add_option("--model", o.model, "Model JSON file")->required(); };
  auto out = [&](CLI::App* sc) {
    sc->add_option("--out", o.out, "Output directory");
    sc->add_option("--format", o.format, "Output formats")->check(CLI::IsMember({"csv", "json", "both"}));
  };
  auto simulation = [&](CLI::App* sc) {
    sc->add_option("--N", o.N, "Matrix size")->check(CLI::Range(1, 8000));
    sc->add_option("--samples", o.samples, "Monte Carlo samples")->check(CLI::PositiveNumber);
    sc->add_option("--seed", o.seed, "Base seed");
  };

  auto* predict = app.add_subcommand("predict", "Theory: phase, edges, overlaps and spectral density");
  model(predict);
  out(predict);
  predict->add_option("--grid", o.grid, "Density grid MIN:MAX:COUNT");
  predict->add_option("--eta", o.eta, "Imaginary part used for the density")->check(CLI::PositiveNumber);
  predict->add_option("--seed", o.seed, "Recorded in metadata only");

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo spectra of the transformed matrix");
  model(simulate);
  out(simulate);
  simulation(simulate);
  simulate->add_option("--threads", o.threads, "Worker threads (0 = all cores)");
  simulate->add_flag("--top-only", o.topOnly, "Only the top eigenpairs (no histogram)");
  simulate->add_flag("--dump-eigenvalues", o.dumpEigenvalues, "Write eigenvalues.bin");

  auto* sweepCmd = app.add_subcommand("sweep", "Theory and Monte Carlo along one parameter");
  model(sweepCmd);
  out(sweepCmd);
  simulation(sweepCmd);
  sweepCmd->add_option("--param", o.param, "S.k.l or rho.k (1-based)")->required();
  sweepCmd->add_option("--range", o.range, "Parameter values FROM:TO:COUNT");
  sweepCmd->add_option("--snr", o.snr, "snr targets FROM:TO:COUNT, solved for by bisection");

  auto* reproduce = app.add_subcommand("reproduce", "Regenerate the figure data and plot scripts");
  reproduce->add_option("figure", o.figure, "fig1 or fig2")->required()->check(CLI::IsMember({"fig1", "fig2"}));
  out(reproduce);
  simulation(reproduce);

  auto* self = app.add_subcommand("selftest", "Closed-form and property checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*predict) return cmd_predict(o);
    if (*simulate) return cmd_simulate(o);
    if (*sweepCmd) return cmd_sweep(o);
    if (*reproduce) {
      if (reproduce->count("--samples") == 0 && o.figure == "fig2") o.samples = 10;
      return o.figure == "fig1" ? cmd_fig1(o) : cmd_fig2(o);
    }
    if (*self) return cmd_selftest();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return is_config_error(e.code()) ? kConfigError : kNumericalError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumericalError;
  }
  return kConfigError;
}

}  // namespace blockspike::cli
