#include "doctest.h"

#include <cmath>

#include "dosefind/errors.hpp"
#include "dosefind/model.hpp"
#include "dosefind/normal.hpp"
#include "generators.hpp"
#include "oracles.hpp"

using namespace dosefind;

namespace {

ModelParams with_tox(double a1, double b1) {
  ModelParams p;
  p.alpha1 = a1;
  p.beta1 = b1;
  return p;
}

ModelParams with_eff(double a2, double b2, double g2, double zeta = 1.0) {
  ModelParams p;
  p.alpha2 = a2;
  p.beta2 = b2;
  p.gamma2 = g2;
  p.zeta = zeta;
  return p;
}

// Cell probability from the 2-D quadrature oracle.
double cell_oracle(const ModelParams& p, double d, int yt, int ye) {
  const double mt = p.alpha1 + p.beta1 * d;
  const double me = p.alpha2 + p.beta2 * d + p.gamma2 * d * d;
  const double tlo = yt == 1 ? 0.0 : -kInf, thi = yt == 1 ? kInf : 0.0;
  const double elo = ye == 0 ? -kInf : (ye == 1 ? 0.0 : p.zeta);
  const double ehi = ye == 0 ? 0.0 : (ye == 1 ? p.zeta : kInf);
  return oracle::bvn_rect_quadrature(tlo - mt, thi - mt, elo - me, ehi - me, p.rho);
}

}  // namespace

TEST_CASE("log relative dose") {
  CHECK(log_relative_dose(180, 180) == 0.0);
  CHECK(log_relative_dose(60, 180) == doctest::Approx(-1.0986122886681098).epsilon(1e-15));
  CHECK_THROWS_AS(log_relative_dose(0, 180), DomainError);
  CHECK_THROWS_AS(log_relative_dose(60, -1), DomainError);
}

TEST_CASE("dose grid") {
  const DoseGrid g({60, 75, 90, 105, 120, 135, 150, 165, 180}, 180);
  REQUIRE(g.size() == 9);
  for (std::size_t j = 0; j < g.size(); ++j) {
    CHECK(g.transformed()[j] == std::log(g.raw_doses()[j] / 180.0));
    CHECK(g.covariate(j) == g.transformed()[j]);
    if (j > 0) CHECK(g.transformed()[j] > g.transformed()[j - 1]);
  }
  CHECK_THROWS_AS(DoseGrid({60, 60}, 180), ConfigError);
  CHECK_THROWS_AS(DoseGrid({-1, 60}, 180), ConfigError);
  CHECK_THROWS_AS(DoseGrid({60, 90}, 0), ConfigError);
  CHECK_THROWS_AS(DoseGrid({}, 180), ConfigError);

  const DoseGrid s({60, 90, 120, 180}, 180, true);
  double mean = 0.0;
  for (double c : s.covariates()) mean += c;
  CHECK(std::abs(mean) < 1e-12);
}

TEST_CASE("toxicity probability") {
  CHECK(tox_prob(with_tox(0.0, 3.7), 0.0) == 0.5);
  CHECK(tox_prob(with_tox(-1.0, 0.5), 0.0) == doctest::Approx(0.15866).epsilon(1e-4));
  CHECK(tox_prob(with_tox(-1.0, 0.5), -1.0986) == doctest::Approx(0.06069).epsilon(1e-3));
}

TEST_CASE("efficacy latent mean and categories") {
  CHECK(eff_latent_mean(with_eff(-0.5, 0.7, -0.4), 0.0) == -0.5);
  CHECK(eff_latent_mean(with_eff(0.0, 1.0, -1.0), 1.0) == 0.0);
  CHECK(eff_latent_mean(with_eff(-0.5, 0.7, -0.4), -1.0986) ==
        doctest::Approx(-1.7518).epsilon(1e-4));

  const auto c = eff_category_probs(with_eff(0.0, 0.0, 0.0, 1.0), 0.3);
  CHECK(c[0] == doctest::Approx(0.5));
  CHECK(c[1] == doctest::Approx(0.34134).epsilon(1e-4));
  CHECK(c[2] == doctest::Approx(0.15866).epsilon(1e-4));

  const auto hi = eff_category_probs(with_eff(40.0, 0.0, 0.0, 1.0), 0.0);
  CHECK(hi[0] == 0.0);
  CHECK(hi[1] == 0.0);
  CHECK(hi[2] == 1.0);

  CHECK(eff_response_prob(with_eff(0.0, 0.0, 0.0), 0.2) == 0.5);
  CHECK(eff_response_prob(with_eff(-0.5, 0.7, -0.4), 0.0) == doctest::Approx(0.30854).epsilon(1e-4));
}

TEST_CASE("efficacy properties on random parameters") {
  gen::Source src(21);
  for (int i = 0; i < 1000; ++i) {
    const ModelParams p = src.params();
    const double d = src.dose();
    const auto c = eff_category_probs(p, d);
    CHECK(std::abs(c[0] + c[1] + c[2] - 1.0) < 1e-12);
    CHECK(c[1] >= 0.0);
    CHECK(std::abs(eff_response_prob(p, d) - (1.0 - c[0])) < 1e-12);
    const double t = tox_prob(p, d);
    CHECK(t > 0.0);
    CHECK(t < 1.0);
  }
}

TEST_CASE("monotone toxicity and efficacy peak") {
  gen::Source src(22);
  for (int i = 0; i < 200; ++i) {
    ModelParams p = src.params();
    p.beta1 = std::abs(p.beta1);
    double prev = 0.0;
    for (double d = -2.0; d <= 1.0; d += 0.05) {
      const double t = tox_prob(p, d);
      CHECK(t >= prev);
      prev = t;
    }
    p.gamma2 = -src.uniform(0.2, 2.0);
    const double peak = -p.beta2 / (2.0 * p.gamma2);
    double best_d = 0.0, best = -1.0;
    for (double d = peak - 1.0; d <= peak + 1.0; d += 1e-3) {
      const double e = eff_response_prob(p, d);
      if (e > best) {
        best = e;
        best_d = d;
      }
    }
    CHECK(std::abs(best_d - peak) < 2e-3);
  }
}

TEST_CASE("biomarker probability") {
  ModelParams p;
  CHECK_THROWS_AS(bio_response_prob(p, 0.0), ConfigError);
  p.bio = BiomarkerParams{};
  CHECK(bio_response_prob(p, -0.7) == 0.5);
  p.bio = BiomarkerParams{-1.0, 0.5, 0.0, 0.0, 0.0};
  CHECK(bio_response_prob(p, 0.0) == doctest::Approx(0.15866).epsilon(1e-4));
}

TEST_CASE("joint cell probability examples") {
  ModelParams p;
  p.zeta = 1.0;
  CHECK(joint_cell_prob(p, 0.0, 1, 0) == doctest::Approx(0.25).epsilon(1e-12));
  p.rho = 0.5;
  CHECK(joint_cell_prob(p, 0.0, 0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-10));
  p.rho = 1.0;
  CHECK(joint_cell_prob(p, 0.0, 1, 0) == doctest::Approx(0.0));
  p.rho = 1.2;
  CHECK_THROWS_AS(joint_cell_prob(p, 0.0, 1, 0), DomainError);
  p.rho = 0.0;
  CHECK_THROWS_AS(joint_cell_prob(p, 0.0, 2, 0), DomainError);
}

TEST_CASE("joint cells: sum, factorization, marginals, quadrature oracle") {
  gen::Source src(23);
  for (int i = 0; i < 300; ++i) {
    ModelParams p = src.params();
    const double d = src.dose();
    double sum = 0.0;
    for (int yt = 0; yt <= 1; ++yt) {
      double marg = 0.0;
      for (int ye = 0; ye <= 2; ++ye) {
        const double c = joint_cell_prob(p, d, yt, ye);
        CHECK(std::abs(c - cell_oracle(p, d, yt, ye)) < 1e-6);
        sum += c;
        marg += c;
      }
      const double t = tox_prob(p, d);
      CHECK(std::abs(marg - (yt == 1 ? t : 1.0 - t)) < 1e-6);
    }
    CHECK(std::abs(sum - 1.0) < 1e-6);

    p.rho = 0.0;
    const auto e = eff_category_probs(p, d);
    const double t = tox_prob(p, d);
    for (int ye = 0; ye <= 2; ++ye) {
      CHECK(std::abs(joint_cell_prob(p, d, 1, ye) - t * e[ye]) < 1e-7);
      CHECK(std::abs(joint_cell_prob(p, d, 0, ye) - (1.0 - t) * e[ye]) < 1e-7);
    }
  }
}

TEST_CASE("record probabilities") {
  gen::Source src(24);
  for (int i = 0; i < 100; ++i) {
    const ModelParams p = src.params_bio();
    const double d = src.dose();
    double total = 0.0;
    for (int yt = 0; yt <= 1; ++yt) {
      for (int ye = 0; ye <= 2; ++ye) {
        double over_bio = 0.0;
        for (int yb = 0; yb <= 1; ++yb) {
          const double c = record_prob(p, ModelKind::kToxEffBio, d, {0, yt, ye, yb});
          CHECK(c >= 0.0);
          over_bio += c;
        }
        CHECK(std::abs(over_bio - joint_cell_prob(p, d, yt, ye)) < 1e-7);
        total += over_bio;
      }
    }
    CHECK(std::abs(total - 1.0) < 1e-7);
    CHECK(record_prob(p, ModelKind::kToxOnly, d, {0, 1, 2, std::nullopt}) == tox_prob(p, d));
  }
}

TEST_CASE("parameter and record validation") {
  ModelParams p;
  CHECK(p.valid());
  p.zeta = 0.0;
  CHECK_FALSE(p.valid());
  p.zeta = 1.0;
  p.bio = BiomarkerParams{0, 0, 0, 0.9, -0.9};
  p.rho = 0.9;
  CHECK_FALSE(p.valid());

  CHECK_NOTHROW(validate_record({8, 1, 2, 1}, 9));
  CHECK_THROWS_AS(validate_record({9, 0, 0, std::nullopt}, 9), ConfigError);
  CHECK_THROWS_AS(validate_record({0, 2, 0, std::nullopt}, 9), ConfigError);
  CHECK_THROWS_AS(validate_record({0, 0, 3, std::nullopt}, 9), ConfigError);
  CHECK_THROWS_AS(validate_record({0, 0, 0, 5}, 9), ConfigError);
}
