#include "dosefind/inference.hpp"

#include <bit>
#include <cmath>
#include <numbers>
#include <numeric>

#include "dosefind/errors.hpp"
#include "dosefind/normal.hpp"
#include "dosefind/rng.hpp"

namespace dosefind {

namespace {

constexpr std::uint64_t kLatentSalt = 0x6c61746e7473616cULL;

double normal_logpdf(double x, const NormalPrior& np) {
  const double z = x - np.mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * np.variance) + z * z / np.variance);
}

void check_normal(const NormalPrior& np, const char* field) {
  if (!(np.variance > 0.0) || !std::isfinite(np.variance) || !std::isfinite(np.mean)) {
    throw ConfigError(std::string("prior.") + field, "variance must be positive and finite");
  }
}

// Log normalizing constant of the density |R|^(eta - 1) over p x p
// correlation matrices (the LKJ family). A Wishart(df, I) matrix rescaled to
// unit diagonal has exactly this density with eta = (df - p + 1) / 2.
double lkj_log_norm(int p, double eta) {
  double log_c = 0.0;
  for (int k = 1; k < p; ++k) {
    const double b = eta + 0.5 * (p - k - 1);
    const double log_beta = 2.0 * std::lgamma(b) - std::lgamma(2.0 * b);
    log_c += (2.0 * eta - 2.0 + p - k) * (p - k) * std::numbers::ln2 + (p - k) * log_beta;
  }
  return log_c;
}

double correlation_det(const ModelParams& p, ModelKind kind) {
  if (kind == ModelKind::kToxEff) return 1.0 - p.rho * p.rho;
  const double r12 = p.rho;
  const double r13 = p.bio->rho13;
  const double r23 = p.bio->rho23;
  return 1.0 - r12 * r12 - r13 * r13 - r23 * r23 + 2.0 * r12 * r13 * r23;
}

}  // namespace

void PriorSpec::validate(ModelKind kind) const {
  check_normal(alpha1, "alpha1");
  check_normal(beta1, "beta1");
  if (kind != ModelKind::kToxOnly) {
    check_normal(alpha2, "alpha2");
    check_normal(beta2, "beta2");
    check_normal(gamma2, "gamma2");
    if (!(zeta_low >= 0.0) || !(zeta_high > zeta_low) || !std::isfinite(zeta_high)) {
      throw ConfigError("prior.zeta", "bounds must satisfy 0 <= low < high");
    }
  }
  if (kind == ModelKind::kToxEffBio) {
    check_normal(alpha3, "alpha3");
    check_normal(beta3, "beta3");
    check_normal(gamma3, "gamma3");
  }
  if (wishart_df < latent_dim(kind)) {
    throw ConfigError("prior.wishart_df", "must be at least the latent dimension");
  }
}

void McmcConfig::validate() const {
  if (burn_in < 1) throw ConfigError("mcmc.burn_in", "must be >= 1");
  if (kept_draws < 100) throw ConfigError("mcmc.kept_draws", "must be >= 100");
  if (thin < 1) throw ConfigError("mcmc.thin", "must be >= 1");
  if (n_chains < 1) throw ConfigError("mcmc.n_chains", "must be >= 1");
}

std::vector<std::string> parameter_names(ModelKind kind) {
  std::vector<std::string> names{"alpha1", "beta1"};
  if (kind == ModelKind::kToxOnly) return names;
  names.insert(names.end(), {"alpha2", "beta2", "gamma2", "zeta", "rho"});
  if (kind == ModelKind::kToxEffBio) {
    names.insert(names.end(), {"alpha3", "beta3", "gamma3", "rho13", "rho23"});
  }
  return names;
}

std::vector<double> parameter_values(const ModelParams& p, ModelKind kind) {
  std::vector<double> v{p.alpha1, p.beta1};
  if (kind == ModelKind::kToxOnly) return v;
  v.insert(v.end(), {p.alpha2, p.beta2, p.gamma2, p.zeta, p.rho});
  if (kind == ModelKind::kToxEffBio) {
    const auto& b = p.bio.value();
    v.insert(v.end(), {b.alpha3, b.beta3, b.gamma3, b.rho13, b.rho23});
  }
  return v;
}

double log_prior(const ModelParams& p, const PriorSpec& prior, ModelKind kind) {
  double lp = normal_logpdf(p.alpha1, prior.alpha1) + normal_logpdf(p.beta1, prior.beta1);
  if (kind == ModelKind::kToxOnly) return lp;

  lp += normal_logpdf(p.alpha2, prior.alpha2) + normal_logpdf(p.beta2, prior.beta2) +
        normal_logpdf(p.gamma2, prior.gamma2);
  if (!(p.zeta > prior.zeta_low && p.zeta < prior.zeta_high)) return -kInf;
  lp -= std::log(prior.zeta_high - prior.zeta_low);

  if (kind == ModelKind::kToxEffBio) {
    if (!p.bio) return -kInf;
    lp += normal_logpdf(p.bio->alpha3, prior.alpha3) + normal_logpdf(p.bio->beta3, prior.beta3) +
          normal_logpdf(p.bio->gamma3, prior.gamma3);
  }
  const int dim = latent_dim(kind);
  const double det = correlation_det(p, kind);
  if (!(det > 0.0) || !p.valid()) return -kInf;
  const double eta = 0.5 * (prior.wishart_df - dim + 1);
  lp += (eta - 1.0) * std::log(det) - lkj_log_norm(dim, eta);
  return lp;
}

double log_likelihood(const ModelParams& p, std::span<const OutcomeRecord> data,
                      const DoseGrid& grid, ModelKind kind) {
  double ll = 0.0;
  for (const auto& rec : data) {
    ll += std::log(record_prob(p, kind, grid.covariate(rec.dose_level), rec));
  }
  return ll;
}

std::vector<double> posterior_tox_risk(const PosteriorDraws& draws, double d,
                                       bool latent_inclusive) {
  std::vector<double> out;
  out.reserve(draws.size());
  const auto dose_key = std::bit_cast<std::uint64_t>(d);
  for (std::size_t i = 0; i < draws.size(); ++i) {
    double z = tox_latent_mean(draws.draws[i], d);
    if (latent_inclusive) z += keyed_normal(i, dose_key, draws.seed ^ kLatentSalt);
    out.push_back(norm_cdf(z));
  }
  return out;
}

double overdose_probability(const PosteriorDraws& draws, double d, double tu) {
  if (draws.size() == 0) return 0.0;
  const auto risks = posterior_tox_risk(draws, d, true);
  std::size_t over = 0;
  for (double r : risks) over += r >= tu ? 1 : 0;
  return static_cast<double>(over) / static_cast<double>(risks.size());
}

OverdoseReference overdose_risk_reference(double pi, double tu) {
  if (!(pi > 0.0 && pi < 1.0) || !(tu > 0.0 && tu < 1.0)) {
    throw DomainError("overdose_risk_reference: pi and tu must lie in (0, 1)");
  }
  const double z = norm_quantile(pi);
  return {norm_sf(norm_quantile(tu) - z), norm_cdf(z / std::numbers::sqrt2)};
}

OverdoseReference overdose_risk_monte_carlo(double pi, double tu, std::size_t n,
                                            std::uint64_t seed) {
  if (!(pi > 0.0 && pi < 1.0) || !(tu > 0.0 && tu < 1.0) || n == 0) {
    throw DomainError("overdose_risk_monte_carlo: pi, tu in (0, 1) and n > 0 required");
  }
  Rng rng(seed);
  const double z = norm_quantile(pi);
  double sum = 0.0;
  std::size_t over = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = norm_cdf(z + rng.normal());
    sum += v;
    over += v >= tu ? 1 : 0;
  }
  const double dn = static_cast<double>(n);
  return {static_cast<double>(over) / dn, sum / dn};
}

void ToxRule::validate() const {
  if (!(upper > 0.0 && upper < 1.0)) throw ConfigError("tox_rule.upper", "must lie in (0, 1)");
  if (mode == Mode::kInterval && !(lower > 0.0 && lower < upper)) {
    throw ConfigError("tox_rule.lower", "must satisfy 0 < lower < upper");
  }
}

double target_probability(const PosteriorDraws& draws, double d, const ToxRule& tox,
                          std::optional<double> eff_bound, const std::optional<BioRule>& bio) {
  if (draws.size() == 0) return 0.0;
  std::size_t hits = 0;
  for (const auto& p : draws.draws) {
    if (!tox.contains(tox_prob(p, d))) continue;
    if (eff_bound && !(eff_response_prob(p, d) >= *eff_bound)) continue;
    if (bio && !bio->holds(bio_response_prob(p, d))) continue;
    ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(draws.size());
}

double sample_variance(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double n = static_cast<double>(xs.size());
  const double m = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return ss / (n - 1.0);
}

}  // namespace dosefind
