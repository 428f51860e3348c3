#include "dosefind/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "dosefind/errors.hpp"
#include "dosefind/normal.hpp"

namespace dosefind {

namespace {

void check_probs(const std::vector<double>& v, std::size_t n, const std::string& field) {
  if (v.size() != n) throw ConfigError(field, "length must match the dose grid");
  for (double p : v) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(field, "probabilities must lie in [0, 1]");
  }
}

ScenarioSpec make(std::string name, std::string description, std::vector<double> tox,
                  std::vector<double> eff, std::vector<std::size_t> targets_one_based,
                  std::optional<std::vector<double>> bio = std::nullopt,
                  std::optional<BioRule> rule = std::nullopt) {
  ScenarioSpec s;
  s.name = std::move(name);
  s.description = std::move(description);
  s.true_tox = std::move(tox);
  s.true_eff = std::move(eff);
  s.true_bio = std::move(bio);
  s.bio_rule = rule;
  for (std::size_t t : targets_one_based) s.target_levels.push_back(t - 1);
  return s;
}

std::vector<ScenarioSpec> make_builtins() {
  const std::vector<double> tox_a{0.01, 0.05, 0.10, 0.18, 0.27, 0.38, 0.5, 0.55, 0.7};
  const std::vector<double> bio_up{0.08, 0.12, 0.23, 0.28, 0.35, 0.41, 0.46, 0.51, 0.54};
  using D = BioRule::Direction;
  std::vector<ScenarioSpec> v;
  v.push_back(make("scenario1",
                   "Two target candidates; efficacy plateau, similar for target doses; "
                   "response rate just above cut-off",
                   tox_a, {0.05, 0.1, 0.18, 0.22, 0.23, 0.24, 0.25, 0.26, 0.27}, {4, 5}));
  v.push_back(make("scenario2",
                   "Two target candidates; efficacy plateau, similar for target doses; "
                   "high response rate",
                   tox_a, {0.05, 0.1, 0.18, 0.38, 0.4, 0.42, 0.44, 0.45, 0.46}, {4, 5}));
  v.push_back(make("scenario3",
                   "Two target candidates; efficacy plateau, monotone for target doses; "
                   "increasing response rate for target doses",
                   tox_a, {0.05, 0.1, 0.18, 0.28, 0.4, 0.42, 0.44, 0.45, 0.46}, {4, 5}));
  v.push_back(make("scenario4",
                   "Two target candidates; efficacy bell shape, peak in mid dose level; "
                   "decreasing response rate for target doses",
                   tox_a, {0.05, 0.15, 0.25, 0.38, 0.25, 0.2, 0.19, 0.19, 0.19}, {4, 5}));
  v.push_back(make("scenario5",
                   "Two target candidates; efficacy bell shape, peak in early dose level; "
                   "decreasing response rate for target doses",
                   {0.01, 0.05, 0.08, 0.12, 0.18, 0.27, 0.38, 0.5, 0.55},
                   {0.05, 0.15, 0.25, 0.38, 0.25, 0.2, 0.19, 0.19, 0.19}, {5, 6}));
  v.push_back(make("scenario6",
                   "One target candidate; efficacy bell shape; target dose with highest response",
                   {0.01, 0.05, 0.10, 0.14, 0.25, 0.35, 0.5, 0.55, 0.7},
                   {0.05, 0.1, 0.18, 0.25, 0.38, 0.28, 0.2, 0.19, 0.19}, {5}));
  v.push_back(make("scenario7",
                   "Three outcomes; efficacy plateau just above cut-off; safety-type "
                   "biomarker increasing with dose, must stay at or below 0.3",
                   tox_a, {0.05, 0.10, 0.18, 0.22, 0.23, 0.24, 0.25, 0.26, 0.27}, {4}, bio_up,
                   BioRule{D::kAtMost, 0.3}));
  v.push_back(make("scenario8",
                   "Three outcomes; high efficacy plateau; efficacy-type biomarker "
                   "increasing with dose, at least 0.25",
                   tox_a, {0.05, 0.10, 0.18, 0.38, 0.4, 0.42, 0.44, 0.45, 0.46}, {4, 5}, bio_up,
                   BioRule{D::kAtLeast, 0.25}));
  v.push_back(make("scenario9",
                   "Three outcomes; efficacy increasing then plateau; safety biomarker "
                   "decreasing with dose, must stay at or above 0.5",
                   tox_a, {0.05, 0.10, 0.18, 0.28, 0.4, 0.42, 0.44, 0.45, 0.46}, {4},
                   std::vector<double>{0.80, 0.78, 0.65, 0.55, 0.43, 0.35, 0.30, 0.2, 0.2},
                   BioRule{D::kAtLeast, 0.5}));
  return v;
}

}  // namespace

void ScenarioSpec::validate() const {
  if (name.empty()) throw ConfigError("name", "scenario name is empty");
  const std::size_t n = grid.size();
  check_probs(true_tox, n, "true_tox");
  check_probs(true_eff, n, "true_eff");
  if (true_bio) check_probs(*true_bio, n, "true_bio");
  if (bio_rule && !true_bio) throw ConfigError("bio_rule", "requires true_bio");
  for (std::size_t t : target_levels) {
    if (t >= n) throw ConfigError("target_levels", "level outside the dose grid");
  }
  if (!(std::abs(outcome_correlation) < 1.0)) {
    throw ConfigError("outcome_correlation", "must lie in (-1, 1)");
  }
  if (true_bio && outcome_correlation < -0.5) {
    throw ConfigError("outcome_correlation", "must be >= -0.5 with three outcomes");
  }
}

const std::vector<ScenarioSpec>& builtin_scenarios() {
  static const std::vector<ScenarioSpec> scenarios = make_builtins();
  return scenarios;
}

std::optional<ScenarioSpec> find_builtin_scenario(const std::string& name) {
  for (const auto& s : builtin_scenarios()) {
    if (s.name == name) return s;
  }
  return std::nullopt;
}

std::vector<OutcomeRecord> generate_cohort_outcomes(const ScenarioSpec& scenario,
                                                    std::size_t level, int n, Rng& rng) {
  std::vector<OutcomeRecord> out;
  out.reserve(n);
  const double pt = scenario.true_tox.at(level);
  const double pe = scenario.true_eff.at(level);
  const bool has_bio = scenario.true_bio.has_value();
  const double pb = has_bio ? scenario.true_bio->at(level) : 0.0;
  const double rho = scenario.outcome_correlation;
  for (int i = 0; i < n; ++i) {
    OutcomeRecord rec;
    rec.dose_level = level;
    bool tox = false, resp = false, bio = false;
    if (rho == 0.0) {
      tox = rng.uniform() < pt;
      resp = rng.uniform() < pe;
      if (has_bio) bio = rng.uniform() < pb;
    } else {
      // Equicorrelated Gaussian latents thresholded at the true margins.
      const double x1 = rng.normal(), x2 = rng.normal();
      const double s = std::sqrt(1.0 - rho * rho);
      const double z1 = x1;
      const double z2 = rho * x1 + s * x2;
      tox = z1 < norm_quantile(pt);
      resp = z2 < norm_quantile(pe);
      if (has_bio) {
        const double l32 = rho * (1.0 - rho) / s;
        const double l33 = std::sqrt(std::max(0.0, 1.0 - rho * rho - l32 * l32));
        const double z3 = rho * x1 + l32 * x2 + l33 * rng.normal();
        bio = z3 < norm_quantile(pb);
      }
    }
    rec.y_tox = tox ? 1 : 0;
    rec.y_eff = resp ? (rng.uniform() < 0.5 ? 1 : 2) : 0;
    if (has_bio) rec.y_bio = bio ? 1 : 0;
    out.push_back(rec);
  }
  return out;
}

EscalationConfig design_for(const ScenarioSpec& scenario, EscalationConfig base) {
  if (!base.tox_only && !base.bio_rule && scenario.bio_rule) base.bio_rule = scenario.bio_rule;
  return base;
}

ReplicateResult run_trial(const ScenarioSpec& scenario, const EscalationConfig& cfg,
                          const PriorSpec& prior, const McmcConfig& mcmc, std::uint64_t seed) {
  ReplicateResult res;
  res.seed = seed;
  Rng rng(derive_seed(seed, 0));
  TrialState state = TrialState::start(scenario.grid);
  std::uint64_t step = 0;
  while (state.active()) {
    const std::size_t dose = state.current_dose;
    const auto cohort = generate_cohort_outcomes(scenario, dose, cfg.cohort_size, rng);
    McmcConfig step_mcmc = mcmc;
    step_mcmc.seed = derive_seed(seed, 1 + step++);
    StepResult sr = run_escalation_step(state, cohort, prior, step_mcmc, cfg);
    res.steps.push_back({dose, std::move(sr.decision)});
    state = std::move(sr.state);
  }
  res.selected_level = state.final_recommendation;
  res.patients_per_level.assign(scenario.grid.size(), 0);
  for (const auto& r : state.records) ++res.patients_per_level[r.dose_level];
  res.total_enrolled = static_cast<int>(state.records.size());
  for (const auto& d : res.steps.back().decision.doses) {
    res.tox_curve.push_back(d.tox_mean);
    res.eff_curve.push_back(d.eff_mean);
    if (d.bio_mean) res.bio_curve.push_back(*d.bio_mean);
  }
  return res;
}

std::vector<std::size_t> over_toxic_levels(const ScenarioSpec& scenario, double tu) {
  std::vector<std::size_t> out;
  const std::size_t top =
      scenario.target_levels.empty()
          ? 0
          : *std::max_element(scenario.target_levels.begin(), scenario.target_levels.end());
  for (std::size_t j = 0; j < scenario.true_tox.size(); ++j) {
    const bool above = scenario.target_levels.empty() || j > top;
    if (above && scenario.true_tox[j] > tu) out.push_back(j);
  }
  return out;
}

std::uint64_t replicate_seed(std::uint64_t base_seed, std::size_t r) {
  return derive_seed(base_seed, static_cast<std::uint64_t>(r));
}

std::vector<ReplicateResult> run_replicates(const ScenarioSpec& scenario,
                                            const EscalationConfig& cfg, const PriorSpec& prior,
                                            const McmcConfig& mcmc, int n_replicates,
                                            std::uint64_t base_seed, int parallelism,
                                            const std::function<void(int)>& progress) {
  scenario.validate();
  cfg.validate();
  prior.validate(cfg.model_kind());
  mcmc.validate();
  if (n_replicates < 1) throw ConfigError("replicates", "must be >= 1");
  if (cfg.bio_rule && !scenario.true_bio) {
    throw ConfigError("bio_rule", "scenario has no biomarker outcome");
  }

  std::vector<ReplicateResult> results(n_replicates);
  std::atomic<int> next{0};
  std::atomic<int> done{0};
  auto worker = [&] {
    for (int r = next++; r < n_replicates; r = next++) {
      results[r] = run_trial(scenario, cfg, prior, mcmc, replicate_seed(base_seed, r));
      const int finished = ++done;
      if (progress) progress(finished);
    }
  };
  const int threads = std::clamp(parallelism, 1, n_replicates);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  return results;
}

OperatingCharacteristics aggregate(const ScenarioSpec& scenario, const EscalationConfig& cfg,
                                   const std::vector<ReplicateResult>& results) {
  OperatingCharacteristics oc;
  const std::size_t levels = scenario.grid.size();
  oc.scenario = scenario.name;
  oc.n_replicates = static_cast<int>(results.size());
  oc.target_levels = scenario.target_levels;
  oc.over_toxic_levels = over_toxic_levels(scenario, cfg.tox_rule.upper);
  oc.selection_pct.assign(levels, 0.0);
  oc.mean_enrolled.assign(levels, 0.0);
  oc.mean_tox_curve.assign(levels, 0.0);
  oc.mean_eff_curve.assign(levels, 0.0);
  const bool bio = !results.empty() && results.front().bio_curve.size() == levels;
  if (bio) oc.mean_bio_curve.assign(levels, 0.0);

  const double n = static_cast<double>(results.size());
  auto in = [](const std::vector<std::size_t>& set, std::size_t j) {
    return std::find(set.begin(), set.end(), j) != set.end();
  };
  std::vector<long> selected(levels, 0), enrolled(levels, 0);
  long none = 0, total = 0;
  for (const auto& r : results) {
    if (r.selected_level) {
      ++selected[*r.selected_level];
    } else {
      ++none;
    }
    for (std::size_t j = 0; j < levels; ++j) {
      enrolled[j] += r.patients_per_level[j];
      oc.mean_tox_curve[j] += r.tox_curve[j] / n;
      oc.mean_eff_curve[j] += r.eff_curve[j] / n;
      if (bio) oc.mean_bio_curve[j] += r.bio_curve[j] / n;
    }
    total += r.total_enrolled;
  }
  for (std::size_t j = 0; j < levels; ++j) {
    oc.selection_pct[j] = 100.0 * static_cast<double>(selected[j]) / n;
    oc.mean_enrolled[j] = static_cast<double>(enrolled[j]) / n;
  }
  oc.none_pct = 100.0 * static_cast<double>(none) / n;
  oc.mean_total_enrolled = static_cast<double>(total) / n;
  for (std::size_t j = 0; j < levels; ++j) {
    if (in(oc.target_levels, j)) {
      oc.target_pct += oc.selection_pct[j];
      oc.mean_target_patients += oc.mean_enrolled[j];
    }
    if (in(oc.over_toxic_levels, j)) {
      oc.over_toxic_pct += oc.selection_pct[j];
      oc.mean_over_toxic_patients += oc.mean_enrolled[j];
    }
  }
  return oc;
}

OperatingCharacteristics run_simulation(const ScenarioSpec& scenario, const EscalationConfig& cfg,
                                        const PriorSpec& prior, const McmcConfig& mcmc,
                                        int n_replicates, std::uint64_t base_seed,
                                        int parallelism) {
  const auto results =
      run_replicates(scenario, cfg, prior, mcmc, n_replicates, base_seed, parallelism);
  return aggregate(scenario, cfg, results);
}

}  // namespace dosefind
