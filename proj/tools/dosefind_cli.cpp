// Batch simulation front end: `dosefind simulate` and `dosefind list-scenarios`.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <mutex>

#include "CLI11.hpp"
#include "dosefind/errors.hpp"
#include "dosefind/io.hpp"

namespace fs = std::filesystem;
using dosefind::ConfigError;
using dosefind::io::json;

namespace {

struct Overrides {
  std::string config_file;
  std::string scenario;
  std::string scenario_file;
  std::optional<int> replicates;
  std::optional<std::string> seed;
  std::optional<int> parallelism;
  std::string out_dir = ".";
  bool quiet = false;

  // Design keys.
  std::optional<std::string> tox_mode;
  std::optional<double> tox_lower, tox_upper, eff_bound, overdose_cutoff, bio_threshold;
  std::optional<std::string> bio_direction;
  std::optional<int> cohort_size, max_patients, min_cohort_observed;
  std::optional<bool> stop_on_retest, tox_only;

  // MCMC keys.
  std::optional<int> burn_in, kept_draws, thin, n_chains;
  std::optional<std::string> mcmc_seed;

  // Prior overrides as key=value with dotted keys, e.g. alpha1.mean=-1.
  std::vector<std::string> prior_sets;
};

template <class T>
void put(json& obj, const char* key, const std::optional<T>& v) {
  if (v) obj[key] = *v;
}

// Overrides are merged into the JSON form of the config so the same parser
// (and its field-named errors) handles both routes.
json merged_config(const Overrides& o) {
  json cfg = json::object();
  if (!o.config_file.empty()) {
    cfg = dosefind::io::read_json_file(o.config_file);
    if (!cfg.is_object()) throw ConfigError(o.config_file, "expected a JSON object");
    if (cfg.contains("run") && cfg.contains("outputs")) cfg = cfg["run"];
  }
  if (!o.scenario.empty() && !o.scenario_file.empty()) {
    throw ConfigError("scenario", "--scenario and --scenario-file are exclusive");
  }
  if (!o.scenario.empty()) cfg["scenario"] = o.scenario;
  if (!o.scenario_file.empty()) cfg["scenario"] = dosefind::io::read_json_file(o.scenario_file);

  put(cfg, "replicates", o.replicates);
  put(cfg, "seed", o.seed);
  put(cfg, "parallelism", o.parallelism);

  json& design = cfg["design"];
  if (design.is_null()) design = json::object();
  if (o.tox_mode || o.tox_lower || o.tox_upper) {
    json& tox = design["tox_rule"];
    if (tox.is_null()) tox = json::object();
    put(tox, "mode", o.tox_mode);
    put(tox, "lower", o.tox_lower);
    put(tox, "upper", o.tox_upper);
  }
  put(design, "eff_bound", o.eff_bound);
  put(design, "overdose_cutoff", o.overdose_cutoff);
  put(design, "cohort_size", o.cohort_size);
  put(design, "max_patients", o.max_patients);
  put(design, "min_cohort_observed", o.min_cohort_observed);
  put(design, "stop_on_retest", o.stop_on_retest);
  put(design, "tox_only", o.tox_only);
  if (o.bio_direction || o.bio_threshold) {
    json& bio = design["bio_rule"];
    if (bio.is_null()) bio = json::object();
    put(bio, "direction", o.bio_direction);
    put(bio, "threshold", o.bio_threshold);
  }

  json& mcmc = cfg["mcmc"];
  if (mcmc.is_null()) mcmc = json::object();
  put(mcmc, "burn_in", o.burn_in);
  put(mcmc, "kept_draws", o.kept_draws);
  put(mcmc, "thin", o.thin);
  put(mcmc, "n_chains", o.n_chains);
  put(mcmc, "seed", o.mcmc_seed);

  json& prior = cfg["prior"];
  if (prior.is_null()) prior = json::object();
  for (const auto& kv : o.prior_sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("prior", "expected key=value, got " + kv);
    const std::string key = kv.substr(0, eq);
    double value = 0;
    try {
      std::size_t used = 0;
      value = std::stod(kv.substr(eq + 1), &used);
      if (used != kv.size() - eq - 1) throw std::invalid_argument(kv);
    } catch (const std::exception&) {
      throw ConfigError("prior." + key, "expected a number");
    }
    const auto dot = key.find('.');
    if (dot == std::string::npos) {
      prior[key] = key == "wishart_df" ? json(static_cast<int>(value)) : json(value);
    } else {
      json& sub = prior[key.substr(0, dot)];
      if (sub.is_null()) sub = json::object();
      sub[key.substr(dot + 1)] = value;
    }
  }
  return cfg;
}

int run_simulate(const Overrides& o) {
  const auto rc = dosefind::io::parse_run_config(merged_config(o));
  const auto design = dosefind::design_for(rc.scenario, rc.design);
  dosefind::io::RunConfig recorded = rc;
  recorded.design = design;

  std::mutex mu;
  auto progress = [&](int done) {
    if (o.quiet) return;
    std::lock_guard lock(mu);
    std::fprintf(stderr, "\r%s: %d/%d replicates", rc.scenario.name.c_str(), done,
                 rc.replicates);
    if (done == rc.replicates) std::fprintf(stderr, "\n");
  };
  const auto results = dosefind::run_replicates(rc.scenario, design, rc.prior, rc.mcmc,
                                                rc.replicates, rc.seed, rc.parallelism, progress);
  const auto oc = dosefind::aggregate(rc.scenario, design, results);

  const std::vector<std::string> names{"oc_table.csv", "curves.csv", "manifest.json"};
  const std::vector<std::string> contents{
      dosefind::io::oc_table_csv(rc.scenario, oc), dosefind::io::curves_csv(rc.scenario, oc),
      dosefind::io::manifest(recorded, oc, names).dump(2) + "\n"};

  const fs::path dir(o.out_dir);
  fs::create_directories(dir);
  std::vector<fs::path> written;
  try {
    for (std::size_t i = 0; i < names.size(); ++i) {
      dosefind::io::write_file_atomic(dir / names[i], contents[i]);
      written.push_back(dir / names[i]);
    }
  } catch (...) {
    for (const auto& p : written) fs::remove(p);
    throw;
  }
  std::printf("%s: target %.1f%%, over-toxic %.1f%%, none %.1f%%, mean enrolled %.1f\n",
              rc.scenario.name.c_str(), oc.target_pct, oc.over_toxic_pct, oc.none_pct,
              oc.mean_total_enrolled);
  return 0;
}

int run_list(bool as_json) {
  if (as_json) {
    json all = json::array();
    for (const auto& s : dosefind::builtin_scenarios()) all.push_back(dosefind::io::to_json(s));
    std::printf("%s\n", all.dump(2).c_str());
    return 0;
  }
  for (const auto& s : dosefind::builtin_scenarios()) {
    std::string targets;
    for (std::size_t t : s.target_levels) {
      targets += (targets.empty() ? "" : ",") + std::to_string(t + 1);
    }
    std::string bio = "-";
    if (s.bio_rule) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "bio %s %g",
                    s.bio_rule->direction == dosefind::BioRule::Direction::kAtLeast ? ">=" : "<=",
                    s.bio_rule->threshold);
      bio = buf;
    }
    std::printf("%-10s targets %-4s %-11s %s\n", s.name.c_str(), targets.c_str(), bio.c_str(),
                s.description.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian latent-probit dose finding: trial simulation"};
  app.require_subcommand(1);

  Overrides o;
  auto* sim = app.add_subcommand("simulate", "Run replicate trials and write operating characteristics");
  sim->add_option("--config", o.config_file, "JSON run config or a previous manifest.json");
  sim->add_option("--scenario", o.scenario, "Builtin scenario name (see list-scenarios)");
  sim->add_option("--scenario-file", o.scenario_file, "JSON scenario definition");
  sim->add_option("--replicates", o.replicates, "Number of simulated trials");
  sim->add_option("--seed", o.seed, "Base seed");
  sim->add_option("--parallelism", o.parallelism, "Worker threads");
  sim->add_option("--out-dir", o.out_dir, "Directory for oc_table.csv, curves.csv, manifest.json");
  sim->add_flag("--quiet", o.quiet, "No progress output");

  sim->add_option("--tox-mode", o.tox_mode, "interval or bound");
  sim->add_option("--tox-lower", o.tox_lower, "Lower end of the target DLT interval");
  sim->add_option("--tox-upper", o.tox_upper, "Upper DLT bound T_u");
  sim->add_option("--eff-bound", o.eff_bound, "Efficacy response lower bound");
  sim->add_option("--overdose-cutoff", o.overdose_cutoff, "Overdose probability cutoff");
  sim->add_option("--cohort-size", o.cohort_size);
  sim->add_option("--max-patients", o.max_patients);
  sim->add_option("--min-cohort-observed", o.min_cohort_observed);
  sim->add_option("--stop-on-retest", o.stop_on_retest, "true or false");
  sim->add_option("--tox-only", o.tox_only, "Toxicity-only comparator (true or false)");
  sim->add_option("--bio-direction", o.bio_direction, ">= or <=");
  sim->add_option("--bio-threshold", o.bio_threshold);
  sim->add_option("--burn-in", o.burn_in);
  sim->add_option("--kept-draws", o.kept_draws);
  sim->add_option("--thin", o.thin);
  sim->add_option("--chains", o.n_chains);
  sim->add_option("--mcmc-seed", o.mcmc_seed);
  sim->add_option("--prior", o.prior_sets, "Prior override key=value, e.g. alpha1.mean=-1");

  bool list_json = false;
  auto* list = app.add_subcommand("list-scenarios", "Print the builtin scenarios");
  list->add_flag("--json", list_json, "Full definitions as JSON");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) return run_simulate(o);
    return run_list(list_json);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: invalid %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
