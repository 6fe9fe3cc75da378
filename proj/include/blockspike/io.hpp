#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "blockspike/model.hpp"
#include "blockspike/qve.hpp"
#include "blockspike/sim.hpp"
#include "blockspike/theory.hpp"

namespace blockspike::io {

using nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

/// Parses {"K":2, "rho":[...], "S":[[...],[...]], "prior":"gaussian"}. Keys are case
/// sensitive and "prior" is optional. Malformed input throws BadConfig; bad values throw
/// whatever validate throws.
ModelParams model_from_json(const json& j);
ModelParams load_model(const std::filesystem::path& path);
json model_to_json(const ModelParams& m);

/// FNV-1a over the compact dump of model_to_json.
std::uint64_t model_hash(const ModelParams& m);
std::string hex(std::uint64_t v);

/// Common metadata block: model hash, seed, tool version, solver tolerances.
json metadata(const ModelParams& m, std::uint64_t seed);

json to_json(const theory::TheoryPrediction& p);
json to_json(const qve::SupportInfo& s);
json to_json(const sim::SimulationResult& r);
json to_json(const sim::MonteCarloResult& mc, bool withRuns = true);

/// Writes `j` pretty-printed. Throws BadConfig when the file cannot be opened.
void write_json(const std::filesystem::path& path, const json& j);

/// CSV with '#'-prefixed metadata lines above the header row.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const json& meta, const std::vector<std::string>& header);
  void row(const std::vector<double>& values);

 private:
  struct Closer {
    void operator()(std::FILE* f) const { if (f) std::fclose(f); }
  };
  std::unique_ptr<std::FILE, Closer> owner_;
};

void write_density_csv(const std::filesystem::path& path, const qve::DensityCurve& c, const json& meta);
void write_histogram_csv(const std::filesystem::path& path, const sim::Histogram& h, const json& meta);

/// 8-byte little-endian length header followed by little-endian float64 values.
void write_eigenvalues_binary(const std::filesystem::path& path, const std::vector<double>& values);
std::vector<double> read_eigenvalues_binary(const std::filesystem::path& path);

}  // namespace blockspike::io
