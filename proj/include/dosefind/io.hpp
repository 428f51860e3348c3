#pragma once

// JSON and CSV encodings shared by the command-line tool, the HTTP service
// and the Python module. Dose levels are 1-based in every external format.
//
// Parsers accept partial objects (missing keys keep their defaults) and reject
// unknown keys and mistyped values with a ConfigError naming the dotted path.

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "dosefind/simulation.hpp"

namespace dosefind::io {

using json = nlohmann::ordered_json;

EscalationConfig parse_design(const json& j, const std::string& path = "design");
PriorSpec parse_prior(const json& j, const std::string& path = "prior");
McmcConfig parse_mcmc(const json& j, const std::string& path = "mcmc");
DoseGrid parse_grid(const json& j, const std::string& path = "grid");
ScenarioSpec parse_scenario(const json& j, const std::string& path = "scenario");
/// Outcome records; `dose_level` is 1-based in the payload.
std::vector<OutcomeRecord> parse_outcomes(const json& j, const std::string& path = "outcomes");
/// Accepts a JSON number or a decimal string (for seeds beyond 2^53).
std::uint64_t parse_seed(const json& j, const std::string& path);

json to_json(const EscalationConfig& cfg);
json to_json(const PriorSpec& prior);
json to_json(const McmcConfig& mcmc);
json to_json(const DoseGrid& grid);
json to_json(const ScenarioSpec& scenario);
json to_json(const OutcomeRecord& rec);
json to_json(const DoseSummary& s, std::size_t level, double dose);
json to_json(const Decision& d, const DoseGrid& grid);
json to_json(const TrialState& s);
json to_json(const OperatingCharacteristics& oc);

/// Seeds are written as decimal strings so JavaScript clients keep every bit.
std::string seed_string(std::uint64_t seed);

/// Inputs of one batch simulation.
struct RunConfig {
  ScenarioSpec scenario;
  EscalationConfig design;
  PriorSpec prior;
  McmcConfig mcmc;
  int replicates = 1000;
  std::uint64_t seed = 20240101;
  int parallelism = 1;
};

/// Top-level keys: scenario (builtin name or object), design, prior, mcmc,
/// replicates, seed, parallelism. A run manifest is also accepted; its "run"
/// member is parsed.
RunConfig parse_run_config(const json& j);
json to_json(const RunConfig& rc);

/// Per-level table in the layout of the reference result tables: one row per
/// dose followed by none / target / over_toxic / total summary rows.
std::string oc_table_csv(const ScenarioSpec& scenario, const OperatingCharacteristics& oc);
/// Replicate-averaged posterior-mean curves next to the scenario truth.
std::string curves_csv(const ScenarioSpec& scenario, const OperatingCharacteristics& oc);
/// Run record: the full run config under "run" plus output file names and
/// headline results.
json manifest(const RunConfig& rc, const OperatingCharacteristics& oc,
              const std::vector<std::string>& outputs);

/// Reads and parses a JSON file; errors name the file.
json read_json_file(const std::filesystem::path& path);
/// Writes through a temporary file in the same directory and renames it.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace dosefind::io
