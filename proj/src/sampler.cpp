// Posterior sampling for the latent probit model by data augmentation.
//
// One sweep:
//   1. (zeta, Z_eff) block: random-walk Metropolis on zeta with Z_eff
//      integrated out given the other latents, then Z_eff redrawn.
//   2. Z_tox (and Z_bio) from their truncated conditionals.
//   3. Regression coefficients from their Gaussian full conditional.
//   4. Each off-diagonal correlation by random-walk Metropolis given the
//      latent residuals.
// Step sizes adapt toward 30% acceptance during burn-in only.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <future>

#include "dosefind/diagnostics.hpp"
#include "dosefind/errors.hpp"
#include "dosefind/inference.hpp"
#include "dosefind/normal.hpp"
#include "dosefind/rng.hpp"

namespace dosefind {

namespace {

constexpr int kMaxK = 3;
constexpr double kTargetAcceptance = 0.3;

// log(Phi(u) - Phi(l)) for l < u without cancellation in either tail.
double log_interval_prob(double l, double u) {
  const double p = l > 0.0 ? norm_sf(l) - norm_sf(u) : norm_cdf(u) - norm_cdf(l);
  return p > 0.0 ? std::log(p) : -kInf;
}

struct SmallMat {
  std::array<double, kMaxK * kMaxK> a{};
  double& operator()(int i, int j) { return a[i * kMaxK + j]; }
  double operator()(int i, int j) const { return a[i * kMaxK + j]; }
};

// Determinant and inverse of a unit-diagonal correlation matrix of size k.
bool invert_corr(const SmallMat& r, int k, SmallMat& inv, double& det) {
  if (k == 1) {
    det = 1.0;
    inv(0, 0) = 1.0;
    return true;
  }
  if (k == 2) {
    det = 1.0 - r(0, 1) * r(0, 1);
    if (!(det > 1e-12)) return false;
    inv(0, 0) = inv(1, 1) = 1.0 / det;
    inv(0, 1) = inv(1, 0) = -r(0, 1) / det;
    return true;
  }
  const double a = r(0, 1), b = r(0, 2), c = r(1, 2);
  det = 1.0 - a * a - b * b - c * c + 2.0 * a * b * c;
  if (!(det > 1e-12) || std::abs(a) >= 1.0 || std::abs(b) >= 1.0 || std::abs(c) >= 1.0) {
    return false;
  }
  inv(0, 0) = (1.0 - c * c) / det;
  inv(1, 1) = (1.0 - b * b) / det;
  inv(2, 2) = (1.0 - a * a) / det;
  inv(0, 1) = inv(1, 0) = (b * c - a) / det;
  inv(0, 2) = inv(2, 0) = (a * c - b) / det;
  inv(1, 2) = inv(2, 1) = (a * b - c) / det;
  return true;
}

struct Patient {
  int level;
  int y_eff;
  std::array<double, kMaxK> lo;  // fixed bounds for tox and bio coordinates
  std::array<double, kMaxK> hi;
};

class Chain {
 public:
  Chain(std::span<const OutcomeRecord> data, const DoseGrid& grid, const PriorSpec& prior,
        ModelKind kind, std::uint64_t seed)
      : kind_(kind),
        k_(latent_dim(kind)),
        p_(kind == ModelKind::kToxOnly ? 2 : (kind == ModelKind::kToxEff ? 5 : 8)),
        prior_(prior),
        cov_(grid.covariates()),
        rng_(seed) {
    const std::size_t levels = grid.size();
    count_.assign(levels, 0);
    patients_.reserve(data.size());
    for (const auto& rec : data) {
      Patient pt{};
      pt.level = static_cast<int>(rec.dose_level);
      pt.y_eff = rec.y_eff;
      const Interval t = tox_interval(rec.y_tox);
      pt.lo[0] = t.lo;
      pt.hi[0] = t.hi;
      if (k_ == 3) {
        const Interval b = bio_interval(*rec.y_bio);
        pt.lo[2] = b.lo;
        pt.hi[2] = b.hi;
      }
      patients_.push_back(pt);
      ++count_[rec.dose_level];
    }

    // Prior precision (diagonal) and precision-weighted mean.
    std::vector<NormalPrior> np{prior.alpha1, prior.beta1};
    if (k_ >= 2) np.insert(np.end(), {prior.alpha2, prior.beta2, prior.gamma2});
    if (k_ == 3) np.insert(np.end(), {prior.alpha3, prior.beta3, prior.gamma3});
    prior_prec_.resize(p_);
    prior_shift_.resize(p_);
    coef_.resize(p_);
    for (int a = 0; a < p_; ++a) {
      prior_prec_[a] = 1.0 / np[a].variance;
      prior_shift_[a] = np[a].mean / np[a].variance;
      coef_[a] = np[a].mean;
    }

    zeta_ = (prior.zeta_low < 1.0 && 1.0 < prior.zeta_high)
                ? 1.0
                : 0.5 * (prior.zeta_low + prior.zeta_high);
    for (int i = 0; i < k_; ++i) corr_(i, i) = 1.0;
    invert_corr(corr_, k_, prec_, det_);

    z_.assign(patients_.size() * kMaxK, 0.0);
    mean_.assign(levels * kMaxK, 0.0);
    update_means();
    // Start latents from independent truncated marginals.
    for (std::size_t i = 0; i < patients_.size(); ++i) {
      const Patient& pt = patients_[i];
      for (int k = 0; k < k_; ++k) {
        const auto [lo, hi] = bounds(pt, k);
        z_[i * kMaxK + k] = rng_.truncated_normal(mean_[pt.level * kMaxK + k], 1.0, lo, hi);
      }
    }
  }

  void run(int burn_in, int kept, int thin, std::vector<ModelParams>& out) {
    const int total = burn_in + kept * thin;
    for (int it = 0; it < total; ++it) {
      const bool adapt = it < burn_in;
      const double gain = adapt ? 1.0 / std::sqrt(1.0 + it / 10.0) : 0.0;
      if (k_ >= 2) update_zeta(gain);
      update_latents(k_ >= 2 ? 1 : -1);
      update_coefficients();
      if (k_ >= 2) update_correlations(gain);
      if (!adapt && (it - burn_in + 1) % thin == 0) out.push_back(current());
    }
  }

  double zeta_acceptance() const { return zeta_tries_ ? double(zeta_acc_) / zeta_tries_ : 0.0; }
  double rho_acceptance() const { return rho_tries_ ? double(rho_acc_) / rho_tries_ : 0.0; }

 private:
  std::pair<double, double> bounds(const Patient& pt, int k) const {
    if (k == 1) {
      const Interval e = eff_interval(pt.y_eff, zeta_);
      return {e.lo, e.hi};
    }
    return {pt.lo[k], pt.hi[k]};
  }

  // Design value of coefficient slot a for latent k at covariate d; the
  // layout is (alpha1, beta1 | alpha2, beta2, gamma2 | alpha3, beta3, gamma3).
  static int block_start(int k) { return k == 0 ? 0 : (k == 1 ? 2 : 5); }
  static int block_len(int k) { return k == 0 ? 2 : 3; }

  void update_means() {
    for (std::size_t j = 0; j < cov_.size(); ++j) {
      const double d = cov_[j];
      mean_[j * kMaxK] = coef_[0] + coef_[1] * d;
      if (k_ >= 2) mean_[j * kMaxK + 1] = coef_[2] + coef_[3] * d + coef_[4] * d * d;
      if (k_ == 3) mean_[j * kMaxK + 2] = coef_[5] + coef_[6] * d + coef_[7] * d * d;
    }
  }

  // Conditional mean and sd of latent k given the others for patient i.
  std::pair<double, double> conditional(std::size_t i, int k) const {
    const Patient& pt = patients_[i];
    const double* m = &mean_[pt.level * kMaxK];
    const double* z = &z_[i * kMaxK];
    double shift = 0.0;
    for (int l = 0; l < k_; ++l) {
      if (l != k) shift += prec_(k, l) * (z[l] - m[l]);
    }
    return {m[k] - shift / prec_(k, k), 1.0 / std::sqrt(prec_(k, k))};
  }

  // Redraw every latent coordinate except `skip`.
  void update_latents(int skip) {
    for (std::size_t i = 0; i < patients_.size(); ++i) {
      for (int k = 0; k < k_; ++k) {
        if (k == skip) continue;
        const auto [mu, sd] = conditional(i, k);
        const auto [lo, hi] = bounds(patients_[i], k);
        z_[i * kMaxK + k] = rng_.truncated_normal(mu, sd, lo, hi);
      }
    }
  }

  double zeta_loglik(double zeta, const std::vector<double>& cmean, double sd) const {
    double ll = 0.0;
    for (std::size_t i = 0; i < patients_.size(); ++i) {
      const int y = patients_[i].y_eff;
      if (y == 0) continue;
      const double c = cmean[i];
      ll += y == 1 ? log_interval_prob(-c / sd, (zeta - c) / sd) : std::log(norm_cdf((c - zeta) / sd));
    }
    return ll;
  }

  void update_zeta(double gain) {
    std::vector<double>& cmean = scratch_;
    cmean.resize(patients_.size());
    double sd = 1.0;
    for (std::size_t i = 0; i < patients_.size(); ++i) {
      std::tie(cmean[i], sd) = conditional(i, 1);
    }
    const double proposal = zeta_ + zeta_step_ * rng_.normal();
    bool accepted = false;
    if (proposal > prior_.zeta_low && proposal < prior_.zeta_high && proposal > 0.0) {
      const double log_ratio = zeta_loglik(proposal, cmean, sd) - zeta_loglik(zeta_, cmean, sd);
      if (std::log(rng_.uniform()) < log_ratio) {
        zeta_ = proposal;
        accepted = true;
      }
    }
    ++zeta_tries_;
    zeta_acc_ += accepted ? 1 : 0;
    if (gain > 0.0) {
      zeta_step_ = std::clamp(zeta_step_ * std::exp(gain * ((accepted ? 1.0 : 0.0) - kTargetAcceptance)),
                              1e-3, 10.0);
    }
    for (std::size_t i = 0; i < patients_.size(); ++i) {
      const auto [lo, hi] = bounds(patients_[i], 1);
      z_[i * kMaxK + 1] = rng_.truncated_normal(cmean[i], sd, lo, hi);
    }
  }

  void update_coefficients() {
    const std::size_t levels = cov_.size();
    // Latent sums per dose level.
    std::vector<double>& sums = level_sums_;
    sums.assign(levels * kMaxK, 0.0);
    for (std::size_t i = 0; i < patients_.size(); ++i) {
      const int j = patients_[i].level;
      for (int k = 0; k < k_; ++k) sums[j * kMaxK + k] += z_[i * kMaxK + k];
    }

    Eigen::MatrixXd prec = Eigen::MatrixXd::Zero(p_, p_);
    Eigen::VectorXd shift(p_);
    for (int a = 0; a < p_; ++a) {
      prec(a, a) = prior_prec_[a];
      shift(a) = prior_shift_[a];
    }
    std::array<double, 3> x{};
    for (std::size_t j = 0; j < levels; ++j) {
      if (count_[j] == 0) continue;
      const double d = cov_[j];
      x = {1.0, d, d * d};
      const double n = static_cast<double>(count_[j]);
      for (int k = 0; k < k_; ++k) {
        double qs = 0.0;
        for (int l = 0; l < k_; ++l) qs += prec_(k, l) * sums[j * kMaxK + l];
        for (int u = 0; u < block_len(k); ++u) {
          shift(block_start(k) + u) += x[u] * qs;
          for (int l = 0; l < k_; ++l) {
            for (int v = 0; v < block_len(l); ++v) {
              prec(block_start(k) + u, block_start(l) + v) += n * prec_(k, l) * x[u] * x[v];
            }
          }
        }
      }
    }
    const Eigen::LLT<Eigen::MatrixXd> llt(prec);
    Eigen::VectorXd mean = llt.solve(shift);
    Eigen::VectorXd noise(p_);
    for (int a = 0; a < p_; ++a) noise(a) = rng_.normal();
    mean += llt.matrixU().solve(noise);
    for (int a = 0; a < p_; ++a) coef_[a] = mean(a);
    update_means();
  }

  double corr_logtarget(const SmallMat& inv, double det, const SmallMat& scatter) const {
    const double n = static_cast<double>(patients_.size());
    const double eta_minus_one = 0.5 * (prior_.wishart_df - k_ - 1);
    double tr = 0.0;
    for (int a = 0; a < k_; ++a) {
      for (int b = 0; b < k_; ++b) tr += inv(a, b) * scatter(b, a);
    }
    return (eta_minus_one - 0.5 * n) * std::log(det) - 0.5 * tr;
  }

  void update_correlations(double gain) {
    SmallMat scatter;
    for (std::size_t i = 0; i < patients_.size(); ++i) {
      const double* m = &mean_[patients_[i].level * kMaxK];
      const double* z = &z_[i * kMaxK];
      for (int a = 0; a < k_; ++a) {
        for (int b = 0; b < k_; ++b) scatter(a, b) += (z[a] - m[a]) * (z[b] - m[b]);
      }
    }
    double current = corr_logtarget(prec_, det_, scatter);
    int pair = 0;
    for (int a = 0; a < k_; ++a) {
      for (int b = a + 1; b < k_; ++b, ++pair) {
        SmallMat proposal = corr_;
        const double r = corr_(a, b) + rho_step_[pair] * rng_.normal();
        bool accepted = false;
        if (std::abs(r) < 1.0) {
          proposal(a, b) = proposal(b, a) = r;
          SmallMat inv;
          double det = 0.0;
          if (invert_corr(proposal, k_, inv, det)) {
            const double cand = corr_logtarget(inv, det, scatter);
            if (std::log(rng_.uniform()) < cand - current) {
              corr_ = proposal;
              prec_ = inv;
              det_ = det;
              current = cand;
              accepted = true;
            }
          }
        }
        ++rho_tries_;
        rho_acc_ += accepted ? 1 : 0;
        if (gain > 0.0) {
          rho_step_[pair] = std::clamp(
              rho_step_[pair] * std::exp(gain * ((accepted ? 1.0 : 0.0) - kTargetAcceptance)),
              1e-3, 4.0);
        }
      }
    }
  }

  ModelParams current() const {
    ModelParams p;
    p.alpha1 = coef_[0];
    p.beta1 = coef_[1];
    if (k_ >= 2) {
      p.alpha2 = coef_[2];
      p.beta2 = coef_[3];
      p.gamma2 = coef_[4];
      p.zeta = zeta_;
      p.rho = corr_(0, 1);
    }
    if (k_ == 3) {
      p.bio = BiomarkerParams{coef_[5], coef_[6], coef_[7], corr_(0, 2), corr_(1, 2)};
    }
    return p;
  }

  ModelKind kind_;
  int k_;
  int p_;
  PriorSpec prior_;
  std::vector<double> cov_;
  Rng rng_;

  std::vector<Patient> patients_;
  std::vector<int> count_;
  std::vector<double> prior_prec_;
  std::vector<double> prior_shift_;

  std::vector<double> coef_;
  double zeta_ = 1.0;
  SmallMat corr_;
  SmallMat prec_;
  double det_ = 1.0;
  std::vector<double> z_;
  std::vector<double> mean_;

  double zeta_step_ = 0.5;
  std::array<double, 3> rho_step_{0.3, 0.3, 0.3};
  long zeta_tries_ = 0, zeta_acc_ = 0, rho_tries_ = 0, rho_acc_ = 0;

  std::vector<double> scratch_;
  std::vector<double> level_sums_;
};

void summarize(PosteriorDraws& out) {
  const auto names = parameter_names(out.kind);
  const std::size_t np = names.size();
  const auto per_chain = static_cast<std::size_t>(out.kept_per_chain);
  std::vector<std::vector<std::vector<double>>> traces(
      np, std::vector<std::vector<double>>(out.n_chains));
  for (int c = 0; c < out.n_chains; ++c) {
    for (std::size_t s = 0; s < per_chain; ++s) {
      const auto vals = parameter_values(out.draws[c * per_chain + s], out.kind);
      for (std::size_t q = 0; q < np; ++q) traces[q][c].push_back(vals[q]);
    }
  }
  out.summary.clear();
  out.converged = true;
  for (std::size_t q = 0; q < np; ++q) {
    ParamSummary ps;
    ps.name = names[q];
    double sum = 0.0, sq = 0.0, n = 0.0;
    for (const auto& ch : traces[q]) {
      for (double v : ch) {
        sum += v;
        sq += v * v;
        n += 1.0;
      }
    }
    ps.mean = sum / n;
    ps.sd = std::sqrt(std::max(0.0, (sq - n * ps.mean * ps.mean) / (n - 1.0)));
    ps.ess = effective_sample_size(traces[q]);
    ps.rhat = split_rhat(traces[q]);
    if (ps.rhat > 1.1 || ps.ess < 50.0) out.converged = false;
    out.summary.push_back(std::move(ps));
  }
}

}  // namespace

PosteriorDraws sample_posterior(std::span<const OutcomeRecord> data, const DoseGrid& grid,
                                const PriorSpec& prior, const McmcConfig& cfg, ModelKind kind) {
  prior.validate(kind);
  cfg.validate();
  for (const auto& rec : data) {
    validate_record(rec, grid.size());
    if (kind == ModelKind::kToxEffBio && !rec.y_bio) {
      throw ConfigError("y_bio", "three-outcome model needs a biomarker outcome on every record");
    }
  }

  PosteriorDraws out;
  out.kind = kind;
  out.seed = cfg.seed;
  out.n_chains = cfg.n_chains;
  out.kept_per_chain = cfg.kept_draws;

  struct ChainResult {
    std::vector<ModelParams> draws;
    double zeta_acc;
    double rho_acc;
  };
  auto run_chain = [&](int c) {
    Chain chain(data, grid, prior, kind, derive_seed(cfg.seed, static_cast<std::uint64_t>(c)));
    ChainResult r;
    r.draws.reserve(cfg.kept_draws);
    chain.run(cfg.burn_in, cfg.kept_draws, cfg.thin, r.draws);
    r.zeta_acc = chain.zeta_acceptance();
    r.rho_acc = chain.rho_acceptance();
    return r;
  };

  std::vector<ChainResult> results;
  if (cfg.n_chains == 1) {
    results.push_back(run_chain(0));
  } else {
    std::vector<std::future<ChainResult>> futures;
    for (int c = 0; c < cfg.n_chains; ++c) {
      futures.push_back(std::async(std::launch::async, run_chain, c));
    }
    for (auto& f : futures) results.push_back(f.get());
  }

  out.draws.reserve(static_cast<std::size_t>(cfg.n_chains) * cfg.kept_draws);
  for (const auto& r : results) {
    out.draws.insert(out.draws.end(), r.draws.begin(), r.draws.end());
    out.zeta_acceptance += r.zeta_acc / cfg.n_chains;
    out.rho_acceptance += r.rho_acc / cfg.n_chains;
  }
  summarize(out);
  return out;
}

}  // namespace dosefind
