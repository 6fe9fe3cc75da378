#include "blockspike/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "blockspike/error.hpp"

namespace blockspike::io {

namespace {

json vec(const VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

[[noreturn]] void bad(const std::string& op, const std::string& detail) {
  throw Error(Errc::BadConfig, "io", op, detail);
}

}  // namespace

ModelParams model_from_json(const json& j) {
  if (!j.is_object()) bad("model_from_json", "model must be a JSON object");
  RawModel raw;
  try {
    raw.K = j.at("K").get<int>();
    raw.rho = j.at("rho").get<std::vector<double>>();
    raw.S = j.at("S").get<std::vector<std::vector<double>>>();
    if (j.contains("prior")) raw.prior = prior_from_string(j.at("prior").get<std::string>());
  } catch (const json::exception& e) {
    bad("model_from_json", e.what());
  }
  return validate(raw);
}

ModelParams load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) bad("load_model", "cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    bad("load_model", path.string() + ": " + e.what());
  }
  return model_from_json(j);
}

json model_to_json(const ModelParams& m) {
  const RawModel r = m.to_raw();
  return json{{"K", r.K}, {"rho", r.rho}, {"S", r.S}, {"prior", std::string(to_string(r.prior))}};
}

std::uint64_t model_hash(const ModelParams& m) {
  const std::string s = model_to_json(m).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json metadata(const ModelParams& m, std::uint64_t seed) {
  return json{{"model_hash", hex(model_hash(m))},
              {"seed", seed},
              {"version", kVersion},
              {"tolerances",
               {{"qve_residual", qve::SolverOptions{}.residualTol},
                {"newton", qve::SolverOptions{}.newtonTol},
                {"certificate_boundary", 1e-9},
                {"critical_snr", theory::kCriticalTol},
                {"edge_resolution", 1e-8}}}};
}

json to_json(const theory::TheoryPrediction& p) {
  json j{{"phase", std::string(theory::to_string(p.phase))},
         {"snr", p.snr},
         {"topEigLimit", p.topEigLimit},
         {"rightEdge", p.rightEdge},
         {"gAtOne", vec(p.gAtOne)},
         {"C", p.C},
         {"CAltSign", p.CAltSign},
         {"overlapAbs", vec(p.overlapAbs)},
         {"overlapSq", vec(p.overlapAbs.cwiseAbs2())},
         {"overlapGlobal", p.overlapGlobal},
         {"vRight", vec(p.vRight)},
         {"vLeft", vec(p.vLeft)},
         {"phi1prime", p.phi1prime},
         {"secularAtOne", p.secularAtOne},
         {"critical", p.critical},
         {"solver",
          {{"gResidual", p.gResidual},
           {"certificateTopEig", p.certificateTopEig},
           {"newtonIterations", p.newtonIterations},
           {"edgeResidual", p.edgeResidual}}}};
  // Magnitudes of the two sign conventions should agree; a mismatch is worth a look.
  j["signConventionsAgree"] = std::abs(std::abs(p.C) - std::abs(p.CAltSign)) <= 1e-9 * std::max(1.0, std::abs(p.C));
  return j;
}

json to_json(const qve::SupportInfo& s) {
  json iv = json::array();
  for (const auto& [a, b] : s.intervals) iv.push_back({a, b});
  return json{{"rightEdge", s.rightEdge}, {"leftEdge", s.leftEdge}, {"intervals", iv},
              {"edgeResidual", s.edgeResidual}};
}

json to_json(const sim::SimulationResult& r) {
  return json{{"seed", r.seed},
              {"topValue", r.topValue},
              {"secondValue", r.secondValue},
              {"overlapEmp", vec(r.overlapEmp)},
              {"overlapGlobal", r.overlapGlobal},
              {"lowrankError", r.lowrankError},
              {"residualBound", r.residualBound}};
}

json to_json(const sim::MonteCarloResult& mc, bool withRuns) {
  auto summ = [](const sim::Summary& s) { return json{{"mean", s.mean}, {"std", s.std}}; };
  json blocks = json::array();
  for (const auto& s : mc.overlapSq) blocks.push_back(summ(s));
  json j{{"samples", mc.runs.size()},
         {"topValue", summ(mc.topValue)},
         {"overlapSq", blocks},
         {"overlapGlobalSq", summ(mc.overlapGlobalSq)}};
  if (withRuns) {
    json runs = json::array();
    for (const auto& r : mc.runs) runs.push_back(to_json(r));
    j["runs"] = runs;
  }
  return j;
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) bad("write_json", "cannot open " + path.string());
  out << j.dump(2) << '\n';
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const json& meta,
                     const std::vector<std::string>& header)
    : owner_(std::fopen(path.c_str(), "w")) {
  if (!owner_) bad("CsvWriter", "cannot open " + path.string());
  for (const auto& [key, value] : meta.items())
    std::fprintf(owner_.get(), "# %s: %s\n", key.c_str(), value.dump().c_str());
  for (size_t i = 0; i < header.size(); ++i)
    std::fprintf(owner_.get(), "%s%s", i ? "," : "", header[i].c_str());
  std::fputc('\n', owner_.get());
}

void CsvWriter::row(const std::vector<double>& values) {
  for (size_t i = 0; i < values.size(); ++i)
    std::fprintf(owner_.get(), "%s%s", i ? "," : "", num(values[i]).c_str());
  std::fputc('\n', owner_.get());
}

void write_density_csv(const std::filesystem::path& path, const qve::DensityCurve& c, const json& meta) {
  const size_t K = c.componentDensities.size();
  std::vector<std::string> header{"x", "density"};
  for (size_t k = 0; k < K; ++k) header.push_back("density_" + std::to_string(k + 1));
  header.push_back("failed");
  CsvWriter w(path, meta, header);
  for (size_t i = 0; i < c.grid.size(); ++i) {
    std::vector<double> row{c.grid[i], c.density[i]};
    for (size_t k = 0; k < K; ++k) row.push_back(c.componentDensities[k][i]);
    row.push_back(c.failed[i] ? 1.0 : 0.0);
    w.row(row);
  }
}

void write_histogram_csv(const std::filesystem::path& path, const sim::Histogram& h, const json& meta) {
  CsvWriter w(path, meta, {"bin_left", "bin_right", "count"});
  for (size_t b = 0; b < h.counts.size(); ++b)
    w.row({h.edges[b], h.edges[b + 1], static_cast<double>(h.counts[b])});
}

namespace {

template <class T>
void put_le(std::ofstream& out, T v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  out.write(reinterpret_cast<const char*>(&bits), 8);
}

template <class T>
T get_le(std::ifstream& in) {
  std::uint64_t bits = 0;
  in.read(reinterpret_cast<char*>(&bits), 8);
  if (!in) bad("read_eigenvalues_binary", "truncated file");
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  T v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace

void write_eigenvalues_binary(const std::filesystem::path& path, const std::vector<double>& values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) bad("write_eigenvalues_binary", "cannot open " + path.string());
  put_le<std::uint64_t>(out, values.size());
  for (double v : values) put_le<double>(out, v);
}

std::vector<double> read_eigenvalues_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) bad("read_eigenvalues_binary", "cannot open " + path.string());
  const auto n = get_le<std::uint64_t>(in);
  std::vector<double> out(n);
  for (auto& v : out) v = get_le<double>(in);
  return out;
}

}  // namespace blockspike::io
