#pragma once

// Latent Gaussian probit model for binary toxicity, ordinal efficacy and an
// optional binary biomarker.
//
//   Z_tox = alpha1 + beta1 d + e1                 Y_tox = 1{Z_tox > 0}
//   Z_eff = alpha2 + beta2 d + gamma2 d^2 + e2    Y_eff = 0 | 1 | 2 split at 0 and zeta
//   Z_bio = alpha3 + beta3 d + gamma3 d^2 + e3    Y_bio = 1{Z_bio > 0}
//
// (e1, e2[, e3]) is multivariate normal with unit variances and correlation
// matrix R. d is the log dose relative to a reference dose.

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace dosefind {

/// Natural log of dose / reference. Throws DomainError on non-positive input.
double log_relative_dose(double dose, double reference);

class DoseGrid {
 public:
  /// Throws ConfigError unless doses are positive and strictly increasing and
  /// the reference is positive. With `standardize`, the model covariate is the
  /// log relative dose centred and scaled by the grid mean and SD.
  DoseGrid(std::vector<double> raw_doses, double reference_dose, bool standardize = false);

  std::size_t size() const noexcept { return raw_.size(); }
  const std::vector<double>& raw_doses() const noexcept { return raw_; }
  double reference_dose() const noexcept { return reference_; }
  bool standardized() const noexcept { return standardize_; }

  /// log(raw_dose_j / reference_dose).
  const std::vector<double>& transformed() const noexcept { return transformed_; }

  /// The covariate the model sees at level j.
  double covariate(std::size_t level) const { return covariate_.at(level); }
  const std::vector<double>& covariates() const noexcept { return covariate_; }

  bool operator==(const DoseGrid&) const = default;

 private:
  std::vector<double> raw_;
  double reference_;
  bool standardize_;
  std::vector<double> transformed_;
  std::vector<double> covariate_;
};

/// Which outcomes enter the likelihood.
enum class ModelKind {
  kToxOnly,    // probit on toxicity alone
  kToxEff,     // toxicity + ordinal efficacy
  kToxEffBio,  // toxicity + ordinal efficacy + binary biomarker
};

/// Number of latent coordinates for a model kind.
constexpr int latent_dim(ModelKind kind) noexcept {
  switch (kind) {
    case ModelKind::kToxOnly: return 1;
    case ModelKind::kToxEff: return 2;
    case ModelKind::kToxEffBio: return 3;
  }
  return 0;
}

struct BiomarkerParams {
  double alpha3 = 0.0;
  double beta3 = 0.0;
  double gamma3 = 0.0;
  double rho13 = 0.0;  // toxicity-biomarker latent correlation
  double rho23 = 0.0;  // efficacy-biomarker latent correlation

  bool operator==(const BiomarkerParams&) const = default;
};

struct ModelParams {
  double alpha1 = 0.0;
  double beta1 = 0.0;
  double alpha2 = 0.0;
  double beta2 = 0.0;
  double gamma2 = 0.0;
  double zeta = 1.0;
  double rho = 0.0;
  std::optional<BiomarkerParams> bio;

  /// True when zeta > 0 and the implied unit-diagonal correlation matrix is
  /// positive semi-definite.
  bool valid() const noexcept;

  bool operator==(const ModelParams&) const = default;
};

struct OutcomeRecord {
  std::size_t dose_level = 0;
  int y_tox = 0;               // {0, 1}
  int y_eff = 0;               // {0, 1, 2}
  std::optional<int> y_bio;    // {0, 1}

  bool operator==(const OutcomeRecord&) const = default;
};

/// Throws ConfigError when a record has an out-of-range field or a dose level
/// outside a grid of `n_levels`.
void validate_record(const OutcomeRecord& rec, std::size_t n_levels);

double tox_latent_mean(const ModelParams& p, double d) noexcept;
double eff_latent_mean(const ModelParams& p, double d) noexcept;
/// Throws ConfigError when the biomarker block is absent.
double bio_latent_mean(const ModelParams& p, double d);

/// Phi(alpha1 + beta1 d).
double tox_prob(const ModelParams& p, double d) noexcept;

/// (Pr(Y_eff = 0), Pr(Y_eff = 1), Pr(Y_eff = 2)).
std::array<double, 3> eff_category_probs(const ModelParams& p, double d) noexcept;

/// Pr(Y_eff >= 1) = Phi(alpha2 + beta2 d + gamma2 d^2).
double eff_response_prob(const ModelParams& p, double d) noexcept;

/// Phi(alpha3 + beta3 d + gamma3 d^2). Throws ConfigError without a biomarker block.
double bio_response_prob(const ModelParams& p, double d);

/// Bivariate-normal probability of the (y_tox, y_eff) cell. Throws
/// DomainError when |rho| > 1 or an outcome is out of range.
double joint_cell_prob(const ModelParams& p, double d, int y_tox, int y_eff);

/// Probability of a full outcome record at covariate d under `kind`. For the
/// three-outcome model this is a trivariate rectangle probability.
double record_prob(const ModelParams& p, ModelKind kind, double d, const OutcomeRecord& rec);

/// Latent interval implied by an observed outcome, on the latent scale.
struct Interval {
  double lo;
  double hi;
};
Interval tox_interval(int y_tox) noexcept;
Interval eff_interval(int y_eff, double zeta) noexcept;
Interval bio_interval(int y_bio) noexcept;

}  // namespace dosefind
