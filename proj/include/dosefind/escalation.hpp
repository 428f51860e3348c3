#pragma once

// Dose-finding state machine: overdose-controlled admissibility, target-dose
// selection, one-level dose movement and stopping.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dosefind/inference.hpp"
#include "dosefind/model.hpp"

namespace dosefind {

struct EscalationConfig {
  ToxRule tox_rule;
  double eff_bound = 0.2;
  std::optional<BioRule> bio_rule;
  double overdose_cutoff = 0.4;
  int cohort_size = 3;
  int max_patients = 54;
  bool stop_on_retest = true;
  int min_cohort_observed = 3;
  /// Fit and decide on toxicity alone (efficacy and biomarker ignored).
  bool tox_only = false;

  void validate() const;

  /// Model implied by the design: toxicity only, toxicity + efficacy, or all
  /// three outcomes when a biomarker rule is configured.
  ModelKind model_kind() const noexcept {
    if (tox_only) return ModelKind::kToxOnly;
    return bio_rule ? ModelKind::kToxEffBio : ModelKind::kToxEff;
  }

  bool operator==(const EscalationConfig&) const = default;
};

enum class TrialStatus { kActive, kStoppedWithRecommendation, kStoppedNoRecommendation };

enum class DecisionKind { kEscalate, kStay, kDeEscalate, kStopRecommend, kStopNone };

std::string to_string(DecisionKind kind);
std::string to_string(TrialStatus status);

/// Per-dose posterior summaries at one decision point.
struct DoseSummary {
  double tox_mean = 0.0;
  double tox_lo = 0.0;  // 2.5% quantile of the plug-in probability
  double tox_hi = 0.0;  // 97.5% quantile
  double eff_mean = 0.0;
  double eff_lo = 0.0;
  double eff_hi = 0.0;
  std::optional<double> bio_mean;
  std::optional<double> bio_lo;
  std::optional<double> bio_hi;
  double overdose_risk = 0.0;
  double target_prob = 0.0;
  double tox_var_plugin = 0.0;
  double tox_var_latent = 0.0;
};

struct Decision {
  DecisionKind kind = DecisionKind::kStay;
  std::optional<std::size_t> j_recommend;
  /// Level for the next cohort; empty once the trial stops.
  std::optional<std::size_t> next_dose;
  std::vector<std::size_t> admissible;
  std::vector<DoseSummary> doses;
  std::uint64_t mcmc_seed = 0;
  bool posterior_converged = true;
};

struct TrialState {
  DoseGrid grid;
  std::vector<OutcomeRecord> records{};
  std::size_t current_dose = 0;
  std::vector<int> cohorts_at_dose{};
  std::vector<std::size_t> dose_history{};  // level of each completed cohort
  std::vector<std::size_t> recommendation_history{};
  TrialStatus status = TrialStatus::kActive;
  std::optional<std::size_t> final_recommendation{};

  /// Fresh trial at the lowest level.
  static TrialState start(DoseGrid grid);

  bool active() const noexcept { return status == TrialStatus::kActive; }
};

/// Levels whose latent-inclusive overdose probability is below the cutoff.
std::vector<std::size_t> admissible_doses(const PosteriorDraws& draws, const DoseGrid& grid,
                                          const EscalationConfig& cfg);

/// Target probability at each level under the configured rules.
std::vector<double> target_probabilities(const PosteriorDraws& draws, const DoseGrid& grid,
                                         const EscalationConfig& cfg);

/// Admissible level with the largest target probability, ties to the lower
/// level. Empty when nothing is admissible.
std::optional<std::size_t> select_target_dose(const PosteriorDraws& draws, const DoseGrid& grid,
                                              const EscalationConfig& cfg,
                                              std::span<const std::size_t> admissible);

/// Same selection from precomputed per-level target probabilities.
std::optional<std::size_t> select_target_dose(std::span<const double> target_probs,
                                              std::span<const std::size_t> admissible);

/// One level toward the recommendation.
std::size_t next_dose(std::size_t j_recommend, std::size_t j_current);

/// Stopping check after the latest cohort has been appended to `state`
/// (and before `j_recommend` is pushed onto its recommendation history).
/// The retest stop needs two completed cohorts at `j_recommend` and the
/// previous recommendation equal to it. Returns the stop kind, or empty to
/// continue.
std::optional<DecisionKind> check_stopping(const TrialState& state,
                                           std::span<const std::size_t> admissible,
                                           std::optional<std::size_t> j_recommend,
                                           const EscalationConfig& cfg);

/// Per-dose posterior summaries from a set of draws.
std::vector<DoseSummary> summarize_doses(const PosteriorDraws& draws, const DoseGrid& grid,
                                         const EscalationConfig& cfg);

struct StepResult {
  Decision decision;
  TrialState state;
};

/// Append a cohort, refit, and decide. Throws LifecycleError on a stopped
/// trial and ProtocolError for outcomes at the wrong dose or too few of them.
StepResult run_escalation_step(const TrialState& state, std::span<const OutcomeRecord> outcomes,
                               const PriorSpec& prior, const McmcConfig& mcmc,
                               const EscalationConfig& cfg);

}  // namespace dosefind
