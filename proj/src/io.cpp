#include "dosefind/io.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <system_error>
#include <unistd.h>

#include "dosefind/errors.hpp"

namespace dosefind::io {

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

// Walks one JSON object, handing out members and remembering which were read
// so the rest can be reported as unknown.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError(path_, "expected an object");
  }

  const json* get(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() || it->is_null() ? nullptr : &*it;
  }

  std::string at(const std::string& key) const { return join(path_, key); }

  void number(const std::string& key, double& out) {
    if (const json* v = get(key)) out = as_number(*v, at(key));
  }
  void integer(const std::string& key, int& out) {
    if (const json* v = get(key)) out = as_int(*v, at(key));
  }
  void boolean(const std::string& key, bool& out) {
    if (const json* v = get(key)) {
      if (!v->is_boolean()) throw ConfigError(at(key), "expected true or false");
      out = v->get<bool>();
    }
  }
  void text(const std::string& key, std::string& out) {
    if (const json* v = get(key)) {
      if (!v->is_string()) throw ConfigError(at(key), "expected a string");
      out = v->get<std::string>();
    }
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw ConfigError(at(item.key()), "unknown key");
    }
  }

  static double as_number(const json& v, const std::string& path) {
    if (!v.is_number()) throw ConfigError(path, "expected a number");
    return v.get<double>();
  }
  static int as_int(const json& v, const std::string& path) {
    if (!v.is_number_integer()) throw ConfigError(path, "expected an integer");
    const auto x = v.get<long long>();
    if (x < -2147483647LL || x > 2147483647LL) throw ConfigError(path, "integer out of range");
    return static_cast<int>(x);
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::vector<double> numbers(const json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(Fields::as_number(v[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

std::size_t level_from_json(const json& v, const std::string& path) {
  const int one_based = Fields::as_int(v, path);
  if (one_based < 1) throw ConfigError(path, "dose levels are numbered from 1");
  return static_cast<std::size_t>(one_based - 1);
}

json level_or_null(const std::optional<std::size_t>& level) {
  return level ? json(*level + 1) : json(nullptr);
}

json levels(const std::vector<std::size_t>& xs) {
  json a = json::array();
  for (std::size_t x : xs) a.push_back(x + 1);
  return a;
}

BioRule parse_bio_rule(const json& j, const std::string& path) {
  BioRule r;
  Fields f(j, path);
  if (const json* v = f.get("direction")) {
    const std::string s = v->is_string() ? v->get<std::string>() : "";
    if (s == ">=" || s == "at_least") {
      r.direction = BioRule::Direction::kAtLeast;
    } else if (s == "<=" || s == "at_most") {
      r.direction = BioRule::Direction::kAtMost;
    } else {
      throw ConfigError(f.at("direction"), "expected \">=\" or \"<=\"");
    }
  }
  f.number("threshold", r.threshold);
  f.finish();
  return r;
}

json bio_rule_json(const BioRule& r) {
  return {{"direction", r.direction == BioRule::Direction::kAtLeast ? ">=" : "<="},
          {"threshold", r.threshold}};
}

NormalPrior parse_normal(const json& j, const std::string& path, NormalPrior def) {
  Fields f(j, path);
  f.number("mean", def.mean);
  f.number("variance", def.variance);
  f.finish();
  return def;
}

ConfigError prefixed(const std::string& path, const ConfigError& e) {
  const std::string msg = std::string(e.what()).substr(e.field().size() + 2);
  return ConfigError(join(path, e.field()), msg);
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", x);
  return buf;
}

std::string fmt_dose(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

}  // namespace

std::string seed_string(std::uint64_t seed) { return std::to_string(seed); }

std::uint64_t parse_seed(const json& j, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer()) {
    if (j.get<long long>() < 0) throw ConfigError(path, "seed must be non-negative");
    return static_cast<std::uint64_t>(j.get<long long>());
  }
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    std::size_t used = 0;
    try {
      if (s.empty() || s[0] == '-') throw std::invalid_argument(s);
      const unsigned long long v = std::stoull(s, &used, 10);
      if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError(path, "expected a non-negative integer seed");
  }
  throw ConfigError(path, "expected a non-negative integer seed");
}

EscalationConfig parse_design(const json& j, const std::string& path) {
  EscalationConfig c;
  Fields f(j, path);
  if (const json* v = f.get("tox_rule")) {
    Fields t(*v, f.at("tox_rule"));
    if (const json* m = t.get("mode")) {
      const std::string s = m->is_string() ? m->get<std::string>() : "";
      if (s == "interval") {
        c.tox_rule.mode = ToxRule::Mode::kInterval;
      } else if (s == "bound") {
        c.tox_rule.mode = ToxRule::Mode::kBound;
      } else {
        throw ConfigError(t.at("mode"), "expected \"interval\" or \"bound\"");
      }
    }
    t.number("lower", c.tox_rule.lower);
    t.number("upper", c.tox_rule.upper);
    t.finish();
  }
  f.number("eff_bound", c.eff_bound);
  if (const json* v = f.get("bio_rule")) c.bio_rule = parse_bio_rule(*v, f.at("bio_rule"));
  f.number("overdose_cutoff", c.overdose_cutoff);
  f.integer("cohort_size", c.cohort_size);
  f.integer("max_patients", c.max_patients);
  f.boolean("stop_on_retest", c.stop_on_retest);
  f.integer("min_cohort_observed", c.min_cohort_observed);
  f.boolean("tox_only", c.tox_only);
  f.finish();
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw prefixed(path, e);
  }
  return c;
}

PriorSpec parse_prior(const json& j, const std::string& path) {
  PriorSpec p;
  Fields f(j, path);
  const std::pair<const char*, NormalPrior*> normals[] = {
      {"alpha1", &p.alpha1}, {"beta1", &p.beta1}, {"alpha2", &p.alpha2},
      {"beta2", &p.beta2},   {"gamma2", &p.gamma2}, {"alpha3", &p.alpha3},
      {"beta3", &p.beta3},   {"gamma3", &p.gamma3}};
  for (const auto& [key, target] : normals) {
    if (const json* v = f.get(key)) *target = parse_normal(*v, f.at(key), *target);
  }
  f.number("zeta_low", p.zeta_low);
  f.number("zeta_high", p.zeta_high);
  f.integer("wishart_df", p.wishart_df);
  f.finish();
  return p;
}

McmcConfig parse_mcmc(const json& j, const std::string& path) {
  McmcConfig m;
  Fields f(j, path);
  f.integer("burn_in", m.burn_in);
  f.integer("kept_draws", m.kept_draws);
  f.integer("thin", m.thin);
  if (const json* v = f.get("seed")) m.seed = parse_seed(*v, f.at("seed"));
  f.integer("n_chains", m.n_chains);
  f.finish();
  m.validate();
  return m;
}

DoseGrid parse_grid(const json& j, const std::string& path) {
  Fields f(j, path);
  std::vector<double> doses{60, 75, 90, 105, 120, 135, 150, 165, 180};
  double reference = 180;
  bool standardize = false;
  if (const json* v = f.get("doses")) doses = numbers(*v, f.at("doses"));
  f.number("reference_dose", reference);
  f.boolean("standardize", standardize);
  f.finish();
  try {
    return DoseGrid(std::move(doses), reference, standardize);
  } catch (const ConfigError& e) {
    throw prefixed(path, e);
  }
}

ScenarioSpec parse_scenario(const json& j, const std::string& path) {
  ScenarioSpec s;
  Fields f(j, path);
  f.text("name", s.name);
  f.text("description", s.description);
  if (const json* v = f.get("grid")) s.grid = parse_grid(*v, f.at("grid"));
  if (const json* v = f.get("true_tox")) s.true_tox = numbers(*v, f.at("true_tox"));
  if (const json* v = f.get("true_eff")) s.true_eff = numbers(*v, f.at("true_eff"));
  if (const json* v = f.get("true_bio")) s.true_bio = numbers(*v, f.at("true_bio"));
  if (const json* v = f.get("bio_rule")) s.bio_rule = parse_bio_rule(*v, f.at("bio_rule"));
  if (const json* v = f.get("target_levels")) {
    if (!v->is_array()) throw ConfigError(f.at("target_levels"), "expected an array");
    for (std::size_t i = 0; i < v->size(); ++i) {
      s.target_levels.push_back(
          level_from_json((*v)[i], f.at("target_levels") + "[" + std::to_string(i) + "]"));
    }
  }
  f.number("outcome_correlation", s.outcome_correlation);
  f.finish();
  try {
    s.validate();
  } catch (const ConfigError& e) {
    throw prefixed(path, e);
  }
  return s;
}

std::vector<OutcomeRecord> parse_outcomes(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path, "expected an array of outcome records");
  std::vector<OutcomeRecord> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string at = path + "[" + std::to_string(i) + "]";
    Fields f(j[i], at);
    OutcomeRecord r;
    const json* level = f.get("dose_level");
    if (!level) throw ConfigError(f.at("dose_level"), "required");
    r.dose_level = level_from_json(*level, f.at("dose_level"));
    const json* tox = f.get("y_tox");
    const json* eff = f.get("y_eff");
    if (!tox) throw ConfigError(f.at("y_tox"), "required");
    if (!eff) throw ConfigError(f.at("y_eff"), "required");
    r.y_tox = Fields::as_int(*tox, f.at("y_tox"));
    r.y_eff = Fields::as_int(*eff, f.at("y_eff"));
    if (const json* bio = f.get("y_bio")) r.y_bio = Fields::as_int(*bio, f.at("y_bio"));
    f.finish();
    if (r.y_tox != 0 && r.y_tox != 1) throw ConfigError(f.at("y_tox"), "must be 0 or 1");
    if (r.y_eff < 0 || r.y_eff > 2) throw ConfigError(f.at("y_eff"), "must be 0, 1 or 2");
    if (r.y_bio && *r.y_bio != 0 && *r.y_bio != 1) {
      throw ConfigError(f.at("y_bio"), "must be 0 or 1");
    }
    out.push_back(r);
  }
  return out;
}

json to_json(const EscalationConfig& c) {
  json tox = {{"mode", c.tox_rule.mode == ToxRule::Mode::kInterval ? "interval" : "bound"}};
  if (c.tox_rule.mode == ToxRule::Mode::kInterval) tox["lower"] = c.tox_rule.lower;
  tox["upper"] = c.tox_rule.upper;
  return {{"tox_rule", tox},
          {"eff_bound", c.eff_bound},
          {"bio_rule", c.bio_rule ? bio_rule_json(*c.bio_rule) : json(nullptr)},
          {"overdose_cutoff", c.overdose_cutoff},
          {"cohort_size", c.cohort_size},
          {"max_patients", c.max_patients},
          {"stop_on_retest", c.stop_on_retest},
          {"min_cohort_observed", c.min_cohort_observed},
          {"tox_only", c.tox_only}};
}

json to_json(const PriorSpec& p) {
  auto n = [](const NormalPrior& x) { return json{{"mean", x.mean}, {"variance", x.variance}}; };
  return {{"alpha1", n(p.alpha1)}, {"beta1", n(p.beta1)},   {"alpha2", n(p.alpha2)},
          {"beta2", n(p.beta2)},   {"gamma2", n(p.gamma2)}, {"alpha3", n(p.alpha3)},
          {"beta3", n(p.beta3)},   {"gamma3", n(p.gamma3)}, {"zeta_low", p.zeta_low},
          {"zeta_high", p.zeta_high}, {"wishart_df", p.wishart_df}};
}

json to_json(const McmcConfig& m) {
  return {{"burn_in", m.burn_in},
          {"kept_draws", m.kept_draws},
          {"thin", m.thin},
          {"seed", seed_string(m.seed)},
          {"n_chains", m.n_chains}};
}

json to_json(const DoseGrid& g) {
  return {{"doses", g.raw_doses()},
          {"reference_dose", g.reference_dose()},
          {"standardize", g.standardized()}};
}

json to_json(const ScenarioSpec& s) {
  json j = {{"name", s.name}, {"description", s.description}, {"grid", to_json(s.grid)},
            {"true_tox", s.true_tox}, {"true_eff", s.true_eff}};
  j["true_bio"] = s.true_bio ? json(*s.true_bio) : json(nullptr);
  j["bio_rule"] = s.bio_rule ? bio_rule_json(*s.bio_rule) : json(nullptr);
  j["target_levels"] = levels(s.target_levels);
  j["outcome_correlation"] = s.outcome_correlation;
  return j;
}

json to_json(const OutcomeRecord& r) {
  json j = {{"dose_level", r.dose_level + 1}, {"y_tox", r.y_tox}, {"y_eff", r.y_eff}};
  if (r.y_bio) j["y_bio"] = *r.y_bio;
  return j;
}

json to_json(const DoseSummary& s, std::size_t level, double dose) {
  json j = {{"level", level + 1},
            {"dose", dose},
            {"tox_mean", s.tox_mean},
            {"tox_lo", s.tox_lo},
            {"tox_hi", s.tox_hi},
            {"eff_mean", s.eff_mean},
            {"eff_lo", s.eff_lo},
            {"eff_hi", s.eff_hi}};
  if (s.bio_mean) {
    j["bio_mean"] = *s.bio_mean;
    j["bio_lo"] = *s.bio_lo;
    j["bio_hi"] = *s.bio_hi;
  }
  j["overdose_risk"] = s.overdose_risk;
  j["target_prob"] = s.target_prob;
  j["tox_var_plugin"] = s.tox_var_plugin;
  j["tox_var_latent"] = s.tox_var_latent;
  return j;
}

json to_json(const Decision& d, const DoseGrid& grid) {
  json doses = json::array();
  for (std::size_t j = 0; j < d.doses.size(); ++j) {
    doses.push_back(to_json(d.doses[j], j, grid.raw_doses()[j]));
  }
  return {{"kind", to_string(d.kind)},
          {"j_recommend", level_or_null(d.j_recommend)},
          {"next_dose", level_or_null(d.next_dose)},
          {"admissible", levels(d.admissible)},
          {"doses", doses},
          {"mcmc_seed", seed_string(d.mcmc_seed)},
          {"posterior_converged", d.posterior_converged}};
}

json to_json(const TrialState& s) {
  json records = json::array();
  for (const auto& r : s.records) records.push_back(to_json(r));
  return {{"status", to_string(s.status)},
          {"current_dose", s.current_dose + 1},
          {"enrolled", s.records.size()},
          {"records", records},
          {"cohorts_at_dose", s.cohorts_at_dose},
          {"dose_history", levels(s.dose_history)},
          {"recommendation_history", levels(s.recommendation_history)},
          {"final_recommendation", level_or_null(s.final_recommendation)}};
}

json to_json(const OperatingCharacteristics& oc) {
  return {{"scenario", oc.scenario},
          {"n_replicates", oc.n_replicates},
          {"selection_pct", oc.selection_pct},
          {"mean_enrolled", oc.mean_enrolled},
          {"none_pct", oc.none_pct},
          {"target_pct", oc.target_pct},
          {"over_toxic_pct", oc.over_toxic_pct},
          {"mean_target_patients", oc.mean_target_patients},
          {"mean_over_toxic_patients", oc.mean_over_toxic_patients},
          {"mean_total_enrolled", oc.mean_total_enrolled},
          {"target_levels", levels(oc.target_levels)},
          {"over_toxic_levels", levels(oc.over_toxic_levels)},
          {"mean_tox_curve", oc.mean_tox_curve},
          {"mean_eff_curve", oc.mean_eff_curve},
          {"mean_bio_curve", oc.mean_bio_curve}};
}

RunConfig parse_run_config(const json& j) {
  if (j.is_object() && j.contains("run") && j.contains("outputs")) return parse_run_config(j["run"]);
  RunConfig rc;
  Fields f(j, "");
  if (const json* v = f.get("scenario")) {
    if (v->is_string()) {
      const auto found = find_builtin_scenario(v->get<std::string>());
      if (!found) throw ConfigError("scenario", "unknown builtin scenario " + v->dump());
      rc.scenario = *found;
    } else {
      rc.scenario = parse_scenario(*v, "scenario");
    }
  } else {
    throw ConfigError("scenario", "required");
  }
  if (const json* v = f.get("design")) rc.design = parse_design(*v, "design");
  if (const json* v = f.get("prior")) rc.prior = parse_prior(*v, "prior");
  if (const json* v = f.get("mcmc")) rc.mcmc = parse_mcmc(*v, "mcmc");
  f.integer("replicates", rc.replicates);
  if (const json* v = f.get("seed")) rc.seed = parse_seed(*v, "seed");
  f.integer("parallelism", rc.parallelism);
  f.finish();
  if (rc.replicates < 1) throw ConfigError("replicates", "must be >= 1");
  if (rc.parallelism < 1) throw ConfigError("parallelism", "must be >= 1");
  return rc;
}

json to_json(const RunConfig& rc) {
  return {{"scenario", to_json(rc.scenario)}, {"design", to_json(rc.design)},
          {"prior", to_json(rc.prior)},       {"mcmc", to_json(rc.mcmc)},
          {"replicates", rc.replicates},      {"seed", seed_string(rc.seed)},
          {"parallelism", rc.parallelism}};
}

std::string oc_table_csv(const ScenarioSpec& sc, const OperatingCharacteristics& oc) {
  std::ostringstream out;
  const bool bio = sc.true_bio.has_value();
  out << "scenario,row,level,dose,true_tox,true_eff" << (bio ? ",true_bio" : "")
      << ",selection_pct,mean_enrolled\n";
  for (std::size_t j = 0; j < sc.grid.size(); ++j) {
    out << sc.name << ",level," << j + 1 << ',' << fmt_dose(sc.grid.raw_doses()[j]) << ','
        << fmt(sc.true_tox[j]) << ',' << fmt(sc.true_eff[j]);
    if (bio) out << ',' << fmt((*sc.true_bio)[j]);
    out << ',' << fmt(oc.selection_pct[j]) << ',' << fmt(oc.mean_enrolled[j]) << '\n';
  }
  auto summary = [&](const char* row, double pct, const std::string& enrolled) {
    out << sc.name << ',' << row << ",,,," << (bio ? "," : "") << ',' << fmt(pct) << ','
        << enrolled << '\n';
  };
  summary("none", oc.none_pct, "");
  summary("target", oc.target_pct, fmt(oc.mean_target_patients));
  summary("over_toxic", oc.over_toxic_pct, fmt(oc.mean_over_toxic_patients));
  summary("total", 100.0, fmt(oc.mean_total_enrolled));
  return out.str();
}

std::string curves_csv(const ScenarioSpec& sc, const OperatingCharacteristics& oc) {
  std::ostringstream out;
  const bool bio = sc.true_bio.has_value() && oc.mean_bio_curve.size() == sc.grid.size();
  out << "level,dose,true_tox,mean_tox,true_eff,mean_eff" << (bio ? ",true_bio,mean_bio" : "")
      << '\n';
  for (std::size_t j = 0; j < sc.grid.size(); ++j) {
    out << j + 1 << ',' << fmt_dose(sc.grid.raw_doses()[j]) << ',' << fmt(sc.true_tox[j]) << ','
        << fmt(oc.mean_tox_curve[j]) << ',' << fmt(sc.true_eff[j]) << ','
        << fmt(oc.mean_eff_curve[j]);
    if (bio) out << ',' << fmt((*sc.true_bio)[j]) << ',' << fmt(oc.mean_bio_curve[j]);
    out << '\n';
  }
  return out.str();
}

json manifest(const RunConfig& rc, const OperatingCharacteristics& oc,
              const std::vector<std::string>& outputs) {
  return {{"run", to_json(rc)},
          {"outputs", outputs},
          {"summary",
           {{"target_pct", oc.target_pct},
            {"over_toxic_pct", oc.over_toxic_pct},
            {"none_pct", oc.none_pct},
            {"mean_total_enrolled", oc.mean_total_enrolled}}}};
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), "cannot open file");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string(), std::string("invalid JSON: ") + e.what());
  }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  const auto tmp = path.parent_path() /
                   ("." + path.filename().string() + ".tmp" + std::to_string(::getpid()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw std::runtime_error("cannot rename into " + path.string() + ": " + ec.message());
  }
}

}  // namespace dosefind::io
