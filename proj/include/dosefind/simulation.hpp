#pragma once

// Virtual trials and operating characteristics.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dosefind/escalation.hpp"
#include "dosefind/rng.hpp"

namespace dosefind {

struct ScenarioSpec {
  std::string name;
  std::string description;
  DoseGrid grid{{60, 75, 90, 105, 120, 135, 150, 165, 180}, 180};
  std::vector<double> true_tox;
  std::vector<double> true_eff;
  std::optional<std::vector<double>> true_bio;
  /// Direction and cut-off of the biomarker target rule for this scenario.
  std::optional<BioRule> bio_rule;
  std::vector<std::size_t> target_levels;  // zero-based
  /// Latent correlation used to generate outcomes; 0 gives independent margins.
  double outcome_correlation = 0.0;

  /// Throws ConfigError naming the first inconsistent field.
  void validate() const;
};

/// The nine scenarios of the reference simulation study (two-outcome 1-6,
/// three-outcome 7-9), named "scenario1" ... "scenario9".
const std::vector<ScenarioSpec>& builtin_scenarios();

/// Lookup by name; empty if unknown.
std::optional<ScenarioSpec> find_builtin_scenario(const std::string& name);

/// Draw a cohort of n patients at `level`. Efficacy responders are split
/// evenly between categories 1 and 2.
std::vector<OutcomeRecord> generate_cohort_outcomes(const ScenarioSpec& scenario,
                                                    std::size_t level, int n, Rng& rng);

/// Design for a scenario: copies the scenario's biomarker rule into `base`
/// unless the design is toxicity-only or already carries one.
EscalationConfig design_for(const ScenarioSpec& scenario, EscalationConfig base);

struct StepLog {
  std::size_t dose = 0;  // level the cohort was treated at
  Decision decision;
};

struct ReplicateResult {
  std::optional<std::size_t> selected_level;
  std::vector<int> patients_per_level;
  int total_enrolled = 0;
  std::uint64_t seed = 0;
  std::vector<StepLog> steps;
  /// Posterior-mean plug-in curves from the final fit.
  std::vector<double> tox_curve;
  std::vector<double> eff_curve;
  std::vector<double> bio_curve;
};

/// Full escalation loop from the lowest level to a stop. Deterministic in `seed`.
ReplicateResult run_trial(const ScenarioSpec& scenario, const EscalationConfig& cfg,
                          const PriorSpec& prior, const McmcConfig& mcmc, std::uint64_t seed);

struct OperatingCharacteristics {
  std::string scenario;
  int n_replicates = 0;
  std::vector<double> selection_pct;  // per level
  std::vector<double> mean_enrolled;  // per level
  double none_pct = 0.0;
  double target_pct = 0.0;
  double over_toxic_pct = 0.0;
  double mean_target_patients = 0.0;
  double mean_over_toxic_patients = 0.0;
  double mean_total_enrolled = 0.0;
  std::vector<std::size_t> target_levels;
  std::vector<std::size_t> over_toxic_levels;
  /// Posterior-mean curves averaged over replicates.
  std::vector<double> mean_tox_curve;
  std::vector<double> mean_eff_curve;
  std::vector<double> mean_bio_curve;
};

/// Levels above the highest target level whose true DLT rate exceeds tu.
std::vector<std::size_t> over_toxic_levels(const ScenarioSpec& scenario, double tu);

/// Seed of replicate r under a base seed.
std::uint64_t replicate_seed(std::uint64_t base_seed, std::size_t r);

/// Runs replicates 0..n-1 on up to `parallelism` threads. Results are in
/// replicate order and do not depend on the thread count. `progress`, when
/// set, is called after each replicate completes (from worker threads).
std::vector<ReplicateResult> run_replicates(const ScenarioSpec& scenario,
                                            const EscalationConfig& cfg, const PriorSpec& prior,
                                            const McmcConfig& mcmc, int n_replicates,
                                            std::uint64_t base_seed, int parallelism,
                                            const std::function<void(int)>& progress = {});

OperatingCharacteristics aggregate(const ScenarioSpec& scenario, const EscalationConfig& cfg,
                                   const std::vector<ReplicateResult>& results);

OperatingCharacteristics run_simulation(const ScenarioSpec& scenario, const EscalationConfig& cfg,
                                        const PriorSpec& prior, const McmcConfig& mcmc,
                                        int n_replicates, std::uint64_t base_seed,
                                        int parallelism);

}  // namespace dosefind
