#include "dosefind/model.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "dosefind/errors.hpp"
#include "dosefind/normal.hpp"

namespace dosefind {

double log_relative_dose(double dose, double reference) {
  if (!(dose > 0.0) || !(reference > 0.0)) {
    throw DomainError("log_relative_dose: dose and reference must be positive");
  }
  return std::log(dose / reference);
}

DoseGrid::DoseGrid(std::vector<double> raw_doses, double reference_dose, bool standardize)
    : raw_(std::move(raw_doses)), reference_(reference_dose), standardize_(standardize) {
  if (raw_.empty()) throw ConfigError("doses", "dose grid is empty");
  if (!(reference_ > 0.0)) throw ConfigError("reference_dose", "must be positive");
  for (std::size_t j = 0; j < raw_.size(); ++j) {
    if (!(raw_[j] > 0.0)) throw ConfigError("doses", "doses must be positive");
    if (j > 0 && !(raw_[j] > raw_[j - 1])) {
      throw ConfigError("doses", "doses must be strictly increasing");
    }
  }
  transformed_.reserve(raw_.size());
  for (double x : raw_) transformed_.push_back(std::log(x / reference_));

  covariate_ = transformed_;
  if (standardize_ && raw_.size() > 1) {
    const double n = static_cast<double>(raw_.size());
    const double mean = std::accumulate(transformed_.begin(), transformed_.end(), 0.0) / n;
    double ss = 0.0;
    for (double t : transformed_) ss += (t - mean) * (t - mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    for (double& c : covariate_) c = (c - mean) / sd;
  }
}

bool ModelParams::valid() const noexcept {
  if (!(zeta > 0.0) || !std::isfinite(zeta)) return false;
  if (!(std::abs(rho) <= 1.0)) return false;
  if (!bio) return true;
  const double r12 = rho;
  const double r13 = bio->rho13;
  const double r23 = bio->rho23;
  if (!(std::abs(r13) <= 1.0) || !(std::abs(r23) <= 1.0)) return false;
  const double det = 1.0 - r12 * r12 - r13 * r13 - r23 * r23 + 2.0 * r12 * r13 * r23;
  return det >= -1e-12;
}

void validate_record(const OutcomeRecord& rec, std::size_t n_levels) {
  if (rec.dose_level >= n_levels) {
    throw ConfigError("dose_level", "level " + std::to_string(rec.dose_level + 1) +
                                        " outside a grid of " + std::to_string(n_levels));
  }
  if (rec.y_tox != 0 && rec.y_tox != 1) throw ConfigError("y_tox", "must be 0 or 1");
  if (rec.y_eff < 0 || rec.y_eff > 2) throw ConfigError("y_eff", "must be 0, 1 or 2");
  if (rec.y_bio && *rec.y_bio != 0 && *rec.y_bio != 1) {
    throw ConfigError("y_bio", "must be 0 or 1");
  }
}

double tox_latent_mean(const ModelParams& p, double d) noexcept {
  return p.alpha1 + p.beta1 * d;
}

double eff_latent_mean(const ModelParams& p, double d) noexcept {
  return p.alpha2 + p.beta2 * d + p.gamma2 * d * d;
}

double bio_latent_mean(const ModelParams& p, double d) {
  if (!p.bio) throw ConfigError("bio", "model has no biomarker block");
  return p.bio->alpha3 + p.bio->beta3 * d + p.bio->gamma3 * d * d;
}

double tox_prob(const ModelParams& p, double d) noexcept {
  return norm_cdf(tox_latent_mean(p, d));
}

std::array<double, 3> eff_category_probs(const ModelParams& p, double d) noexcept {
  const double eta = eff_latent_mean(p, d);
  const double p0 = norm_cdf(-eta);
  const double p2 = norm_sf(p.zeta - eta);
  // Difference of whichever tail pair avoids cancellation.
  const double p1 = eta > 0.5 * p.zeta ? norm_cdf(p.zeta - eta) - norm_cdf(-eta)
                                       : norm_sf(-eta) - norm_sf(p.zeta - eta);
  return {p0, p1, p2};
}

double eff_response_prob(const ModelParams& p, double d) noexcept {
  return norm_cdf(eff_latent_mean(p, d));
}

double bio_response_prob(const ModelParams& p, double d) {
  return norm_cdf(bio_latent_mean(p, d));
}

Interval tox_interval(int y_tox) noexcept {
  return y_tox == 1 ? Interval{0.0, kInf} : Interval{-kInf, 0.0};
}

Interval eff_interval(int y_eff, double zeta) noexcept {
  switch (y_eff) {
    case 0: return {-kInf, 0.0};
    case 1: return {0.0, zeta};
    default: return {zeta, kInf};
  }
}

Interval bio_interval(int y_bio) noexcept { return tox_interval(y_bio); }

double joint_cell_prob(const ModelParams& p, double d, int y_tox, int y_eff) {
  if (!(std::abs(p.rho) <= 1.0)) throw DomainError("joint_cell_prob: |rho| > 1");
  if (y_tox != 0 && y_tox != 1) throw DomainError("joint_cell_prob: y_tox must be 0 or 1");
  if (y_eff < 0 || y_eff > 2) throw DomainError("joint_cell_prob: y_eff must be 0, 1 or 2");
  const double mt = tox_latent_mean(p, d);
  const double me = eff_latent_mean(p, d);
  const Interval t = tox_interval(y_tox);
  const Interval e = eff_interval(y_eff, p.zeta);
  return bvn_rect(t.lo - mt, t.hi - mt, e.lo - me, e.hi - me, p.rho);
}

double record_prob(const ModelParams& p, ModelKind kind, double d, const OutcomeRecord& rec) {
  switch (kind) {
    case ModelKind::kToxOnly: {
      const double pt = tox_prob(p, d);
      return rec.y_tox == 1 ? pt : 1.0 - pt;
    }
    case ModelKind::kToxEff:
      return joint_cell_prob(p, d, rec.y_tox, rec.y_eff);
    case ModelKind::kToxEffBio: {
      if (!rec.y_bio) throw ConfigError("y_bio", "three-outcome model needs a biomarker outcome");
      const double mt = tox_latent_mean(p, d);
      const double me = eff_latent_mean(p, d);
      const double mb = bio_latent_mean(p, d);
      const Interval t = tox_interval(rec.y_tox);
      const Interval e = eff_interval(rec.y_eff, p.zeta);
      const Interval b = bio_interval(*rec.y_bio);
      return tvn_rect({t.lo - mt, e.lo - me, b.lo - mb}, {t.hi - mt, e.hi - me, b.hi - mb},
                      p.rho, p.bio->rho13, p.bio->rho23);
    }
  }
  return 0.0;
}

}  // namespace dosefind
