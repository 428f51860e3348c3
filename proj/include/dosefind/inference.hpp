#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dosefind/model.hpp"

namespace dosefind {

struct NormalPrior {
  double mean = 0.0;
  double variance = 1.0;

  bool operator==(const NormalPrior&) const = default;
};

/// Independent normal priors on the regression coefficients, a uniform prior
/// on the efficacy cut point and a normalized-Wishart prior on the latent
/// correlation matrix. Normal scales are variances.
struct PriorSpec {
  NormalPrior alpha1{-1.0, 1.25};
  NormalPrior beta1{0.5, 1.25};
  NormalPrior alpha2{-0.5, 1.25};
  NormalPrior beta2{0.7, 1.25};
  NormalPrior gamma2{-0.4, 1.0};
  NormalPrior alpha3{-0.5, 1.25};
  NormalPrior beta3{0.7, 1.25};
  NormalPrior gamma3{-0.4, 1.0};
  double zeta_low = 0.0;
  double zeta_high = 6.0;
  int wishart_df = 3;

  /// Throws ConfigError naming the first invalid field.
  void validate(ModelKind kind) const;

  bool operator==(const PriorSpec&) const = default;
};

struct McmcConfig {
  int burn_in = 1000;
  int kept_draws = 4000;
  int thin = 1;
  std::uint64_t seed = 20240101;
  int n_chains = 1;

  void validate() const;

  bool operator==(const McmcConfig&) const = default;
};

struct ParamSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double ess = 0.0;
  double rhat = 1.0;  // split-chain potential scale reduction
};

struct PosteriorDraws {
  ModelKind kind = ModelKind::kToxEff;
  std::vector<ModelParams> draws;  // chain-major
  std::uint64_t seed = 0;
  int n_chains = 0;
  int kept_per_chain = 0;
  std::vector<ParamSummary> summary;
  double zeta_acceptance = 0.0;
  double rho_acceptance = 0.0;
  /// False when any parameter has split R-hat above 1.1 or ESS below 50.
  bool converged = true;

  std::size_t size() const noexcept { return draws.size(); }
};

/// Names of the sampled scalar parameters for a model kind, in summary order.
std::vector<std::string> parameter_names(ModelKind kind);
/// Values of those parameters for one draw, same order.
std::vector<double> parameter_values(const ModelParams& p, ModelKind kind);

/// Log prior density, -inf outside the support.
double log_prior(const ModelParams& p, const PriorSpec& prior, ModelKind kind);

/// Sum of log outcome probabilities. Empty data gives 0.
double log_likelihood(const ModelParams& p, std::span<const OutcomeRecord> data,
                      const DoseGrid& grid, ModelKind kind);

/// Data-augmentation Gibbs sampler with Metropolis steps for the cut point
/// and correlations. Bit-reproducible for a fixed configuration.
PosteriorDraws sample_posterior(std::span<const OutcomeRecord> data, const DoseGrid& grid,
                                const PriorSpec& prior, const McmcConfig& cfg, ModelKind kind);

// ---------------------------------------------------------------------------
// Overdose control and target area

/// Per-draw DLT probabilities at covariate d. With `latent_inclusive`, each
/// draw is mapped through Phi(alpha1 + beta1 d + eps), eps a standard normal
/// keyed on the draw index and dose.
std::vector<double> posterior_tox_risk(const PosteriorDraws& draws, double d,
                                       bool latent_inclusive);

/// Fraction of latent-inclusive DLT probabilities at or above tu.
double overdose_probability(const PosteriorDraws& draws, double d, double tu);

struct OverdoseReference {
  double risk;      // 1 - Phi(Phi^-1(tu) - Phi^-1(pi))
  double mean_dlt;  // Phi(Phi^-1(pi) / sqrt 2)
};

/// Closed form for a degenerate posterior at DLT probability pi.
OverdoseReference overdose_risk_reference(double pi, double tu);

/// The simulation route to the same quantities: draw n samples of
/// Phi(Phi^-1(pi) + eps) and report their mean and exceedance fraction.
OverdoseReference overdose_risk_monte_carlo(double pi, double tu, std::size_t n,
                                            std::uint64_t seed);

struct ToxRule {
  enum class Mode { kInterval, kBound };
  Mode mode = Mode::kInterval;
  double lower = 0.16;  // ignored in bound mode
  double upper = 0.33;

  void validate() const;
  bool contains(double p) const noexcept {
    return mode == Mode::kInterval ? (p >= lower && p <= upper) : p < upper;
  }

  bool operator==(const ToxRule&) const = default;
};

struct BioRule {
  enum class Direction { kAtLeast, kAtMost };
  Direction direction = Direction::kAtLeast;
  double threshold = 0.5;

  bool holds(double p) const noexcept {
    return direction == Direction::kAtLeast ? p >= threshold : p <= threshold;
  }

  bool operator==(const BioRule&) const = default;
};

/// Fraction of draws whose plug-in probabilities fall in the target area:
/// toxicity per `tox`, efficacy response >= eff_bound (skipped when absent)
/// and, if given, the biomarker rule.
double target_probability(const PosteriorDraws& draws, double d, const ToxRule& tox,
                          std::optional<double> eff_bound,
                          const std::optional<BioRule>& bio = std::nullopt);

/// Sample variance (n - 1 denominator).
double sample_variance(std::span<const double> xs);

}  // namespace dosefind
