#include "dosefind/escalation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dosefind/errors.hpp"
#include "dosefind/normal.hpp"

namespace dosefind {

namespace {

double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

struct Band {
  double mean;
  double lo;
  double hi;
};

Band band(std::vector<double> xs) {
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  std::sort(xs.begin(), xs.end());
  return {mean, quantile_sorted(xs, 0.025), quantile_sorted(xs, 0.975)};
}

std::optional<double> eff_bound_for(const EscalationConfig& cfg) {
  if (cfg.tox_only) return std::nullopt;
  return cfg.eff_bound;
}

}  // namespace

void EscalationConfig::validate() const {
  tox_rule.validate();
  if (!tox_only && !(eff_bound > 0.0 && eff_bound < 1.0)) {
    throw ConfigError("eff_bound", "must lie in (0, 1)");
  }
  if (bio_rule && !(bio_rule->threshold > 0.0 && bio_rule->threshold < 1.0)) {
    throw ConfigError("bio_rule.threshold", "must lie in (0, 1)");
  }
  if (!(overdose_cutoff > 0.0 && overdose_cutoff <= 1.0)) {
    throw ConfigError("overdose_cutoff", "must lie in (0, 1]");
  }
  if (cohort_size < 1) throw ConfigError("cohort_size", "must be >= 1");
  if (max_patients < cohort_size) throw ConfigError("max_patients", "must be >= cohort_size");
  if (min_cohort_observed < 1) throw ConfigError("min_cohort_observed", "must be >= 1");
}

std::string to_string(DecisionKind kind) {
  switch (kind) {
    case DecisionKind::kEscalate: return "escalate";
    case DecisionKind::kStay: return "stay";
    case DecisionKind::kDeEscalate: return "de_escalate";
    case DecisionKind::kStopRecommend: return "stop_recommend";
    case DecisionKind::kStopNone: return "stop_none";
  }
  return "unknown";
}

std::string to_string(TrialStatus status) {
  switch (status) {
    case TrialStatus::kActive: return "active";
    case TrialStatus::kStoppedWithRecommendation: return "stopped_with_recommendation";
    case TrialStatus::kStoppedNoRecommendation: return "stopped_no_recommendation";
  }
  return "unknown";
}

TrialState TrialState::start(DoseGrid grid) {
  const std::size_t n = grid.size();
  TrialState s{.grid = std::move(grid)};
  s.cohorts_at_dose.assign(n, 0);
  return s;
}

std::vector<std::size_t> admissible_doses(const PosteriorDraws& draws, const DoseGrid& grid,
                                          const EscalationConfig& cfg) {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    if (overdose_probability(draws, grid.covariate(j), cfg.tox_rule.upper) < cfg.overdose_cutoff) {
      out.push_back(j);
    }
  }
  return out;
}

std::vector<double> target_probabilities(const PosteriorDraws& draws, const DoseGrid& grid,
                                         const EscalationConfig& cfg) {
  std::vector<double> out(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) {
    out[j] = target_probability(draws, grid.covariate(j), cfg.tox_rule, eff_bound_for(cfg),
                                cfg.tox_only ? std::nullopt : cfg.bio_rule);
  }
  return out;
}

std::optional<std::size_t> select_target_dose(std::span<const double> target_probs,
                                              std::span<const std::size_t> admissible) {
  std::optional<std::size_t> best;
  for (std::size_t j : admissible) {
    // Strict comparison keeps the lower level on ties.
    if (!best || target_probs[j] > target_probs[*best] ||
        (target_probs[j] == target_probs[*best] && j < *best)) {
      best = j;
    }
  }
  return best;
}

std::optional<std::size_t> select_target_dose(const PosteriorDraws& draws, const DoseGrid& grid,
                                              const EscalationConfig& cfg,
                                              std::span<const std::size_t> admissible) {
  if (admissible.empty()) return std::nullopt;
  const auto probs = target_probabilities(draws, grid, cfg);
  return select_target_dose(probs, admissible);
}

std::size_t next_dose(std::size_t j_recommend, std::size_t j_current) {
  if (j_recommend > j_current) return j_current + 1;
  if (j_recommend < j_current) return j_current - 1;
  return j_current;
}

std::optional<DecisionKind> check_stopping(const TrialState& state,
                                           std::span<const std::size_t> admissible,
                                           std::optional<std::size_t> j_recommend,
                                           const EscalationConfig& cfg) {
  const bool lowest_admissible =
      std::find(admissible.begin(), admissible.end(), std::size_t{0}) != admissible.end();
  if (!lowest_admissible || !j_recommend) return DecisionKind::kStopNone;
  const auto enrolled = static_cast<int>(state.records.size());
  if (enrolled + cfg.cohort_size > cfg.max_patients) return DecisionKind::kStopRecommend;
  // "Tested twice and recommended again": the standing recommendation must
  // already be this level.
  const bool repeated = !state.recommendation_history.empty() &&
                        state.recommendation_history.back() == *j_recommend;
  if (cfg.stop_on_retest && repeated && state.cohorts_at_dose.at(*j_recommend) >= 2) {
    return DecisionKind::kStopRecommend;
  }
  return std::nullopt;
}

std::vector<DoseSummary> summarize_doses(const PosteriorDraws& draws, const DoseGrid& grid,
                                         const EscalationConfig& cfg) {
  const auto targets = target_probabilities(draws, grid, cfg);
  std::vector<DoseSummary> out(grid.size());
  std::vector<double> buf(draws.size());
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const double d = grid.covariate(j);
    DoseSummary& s = out[j];

    const auto plug = posterior_tox_risk(draws, d, false);
    const auto latent = posterior_tox_risk(draws, d, true);
    s.tox_var_plugin = sample_variance(plug);
    s.tox_var_latent = sample_variance(latent);
    std::size_t over = 0;
    for (double r : latent) over += r >= cfg.tox_rule.upper ? 1 : 0;
    s.overdose_risk = static_cast<double>(over) / static_cast<double>(latent.size());
    const Band t = band(plug);
    s.tox_mean = t.mean;
    s.tox_lo = t.lo;
    s.tox_hi = t.hi;

    if (draws.kind != ModelKind::kToxOnly) {
      for (std::size_t i = 0; i < draws.size(); ++i) buf[i] = eff_response_prob(draws.draws[i], d);
      const Band e = band(buf);
      s.eff_mean = e.mean;
      s.eff_lo = e.lo;
      s.eff_hi = e.hi;
    }
    if (draws.kind == ModelKind::kToxEffBio) {
      for (std::size_t i = 0; i < draws.size(); ++i) buf[i] = bio_response_prob(draws.draws[i], d);
      const Band b = band(buf);
      s.bio_mean = b.mean;
      s.bio_lo = b.lo;
      s.bio_hi = b.hi;
    }
    s.target_prob = targets[j];
  }
  return out;
}

StepResult run_escalation_step(const TrialState& state, std::span<const OutcomeRecord> outcomes,
                               const PriorSpec& prior, const McmcConfig& mcmc,
                               const EscalationConfig& cfg) {
  if (!state.active()) throw LifecycleError("trial has already stopped");
  if (static_cast<int>(outcomes.size()) < cfg.min_cohort_observed) {
    throw ProtocolError("cohort has " + std::to_string(outcomes.size()) +
                        " observed patients; at least " +
                        std::to_string(cfg.min_cohort_observed) + " required");
  }
  if (state.records.size() + outcomes.size() > static_cast<std::size_t>(cfg.max_patients)) {
    throw ProtocolError("cohort would exceed the maximum sample size");
  }
  const ModelKind kind = cfg.model_kind();
  for (const auto& rec : outcomes) {
    if (rec.dose_level != state.current_dose) {
      throw ProtocolError("outcome at level " + std::to_string(rec.dose_level + 1) +
                          " but the current level is " + std::to_string(state.current_dose + 1));
    }
    validate_record(rec, state.grid.size());
    if (kind == ModelKind::kToxEffBio && !rec.y_bio) {
      throw ProtocolError("biomarker outcome missing for a three-outcome design");
    }
  }

  TrialState next = state;
  next.records.insert(next.records.end(), outcomes.begin(), outcomes.end());
  ++next.cohorts_at_dose[state.current_dose];
  next.dose_history.push_back(state.current_dose);

  const PosteriorDraws draws = sample_posterior(next.records, next.grid, prior, mcmc, kind);

  Decision dec;
  dec.mcmc_seed = mcmc.seed;
  dec.posterior_converged = draws.converged;
  dec.doses = summarize_doses(draws, next.grid, cfg);
  std::vector<double> targets;
  for (std::size_t j = 0; j < dec.doses.size(); ++j) {
    if (dec.doses[j].overdose_risk < cfg.overdose_cutoff) dec.admissible.push_back(j);
    targets.push_back(dec.doses[j].target_prob);
  }
  dec.j_recommend = select_target_dose(targets, dec.admissible);

  if (const auto stop = check_stopping(next, dec.admissible, dec.j_recommend, cfg)) {
    dec.kind = *stop;
    if (*stop == DecisionKind::kStopRecommend) {
      next.status = TrialStatus::kStoppedWithRecommendation;
      next.final_recommendation = dec.j_recommend;
      next.recommendation_history.push_back(*dec.j_recommend);
    } else {
      next.status = TrialStatus::kStoppedNoRecommendation;
      dec.j_recommend.reset();
    }
    return {std::move(dec), std::move(next)};
  }

  const std::size_t j_rec = *dec.j_recommend;
  next.recommendation_history.push_back(j_rec);
  const std::size_t nd = next_dose(j_rec, state.current_dose);
  dec.next_dose = nd;
  dec.kind = nd > state.current_dose   ? DecisionKind::kEscalate
             : nd < state.current_dose ? DecisionKind::kDeEscalate
                                       : DecisionKind::kStay;
  next.current_dose = nd;
  return {std::move(dec), std::move(next)};
}

}  // namespace dosefind
