#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dosefind/errors.hpp"
#include "dosefind/simulation.hpp"
#include "generators.hpp"
#include "oracles.hpp"

using namespace dosefind;

namespace {

McmcConfig quick_mcmc() {
  McmcConfig m;
  m.burn_in = 300;
  m.kept_draws = 1000;
  return m;
}

ScenarioSpec builtin(const std::string& name) { return *find_builtin_scenario(name); }

// Naive recomputation of the aggregate statistics from replicate results.
void check_aggregate(const ScenarioSpec& sc, const OperatingCharacteristics& oc,
                     const std::vector<ReplicateResult>& rs, double tu) {
  const std::size_t L = sc.grid.size();
  const double n = static_cast<double>(rs.size());
  std::vector<double> over;
  const std::size_t top = *std::max_element(sc.target_levels.begin(), sc.target_levels.end());
  for (std::size_t j = top + 1; j < L; ++j) {
    if (sc.true_tox[j] > tu) over.push_back(static_cast<double>(j));
  }
  double target = 0, overtox = 0, none = 0, other = 0, enrolled_total = 0;
  std::vector<double> sel(L, 0), enr(L, 0);
  for (const auto& r : rs) {
    enrolled_total += r.total_enrolled;
    for (std::size_t j = 0; j < L; ++j) enr[j] += r.patients_per_level[j];
    if (!r.selected_level) {
      none += 1;
      continue;
    }
    const std::size_t s = *r.selected_level;
    sel[s] += 1;
    const bool is_target =
        std::find(sc.target_levels.begin(), sc.target_levels.end(), s) != sc.target_levels.end();
    const bool is_over = std::find(over.begin(), over.end(), static_cast<double>(s)) != over.end();
    if (is_target) target += 1;
    else if (is_over) overtox += 1;
    else other += 1;
  }
  CHECK(oc.n_replicates == static_cast<int>(rs.size()));
  CHECK(oc.target_pct == doctest::Approx(100 * target / n));
  CHECK(oc.over_toxic_pct == doctest::Approx(100 * overtox / n));
  CHECK(oc.none_pct == doctest::Approx(100 * none / n));
  CHECK(oc.target_pct + oc.over_toxic_pct + oc.none_pct + 100 * other / n ==
        doctest::Approx(100.0));
  double sel_sum = oc.none_pct;
  double enr_sum = 0;
  for (std::size_t j = 0; j < L; ++j) {
    CHECK(oc.selection_pct[j] == doctest::Approx(100 * sel[j] / n));
    CHECK(oc.mean_enrolled[j] == doctest::Approx(enr[j] / n));
    CHECK(oc.selection_pct[j] >= 0.0);
    CHECK(oc.selection_pct[j] <= 100.0);
    sel_sum += oc.selection_pct[j];
    enr_sum += oc.mean_enrolled[j];
  }
  CHECK(sel_sum == doctest::Approx(100.0));
  CHECK(enr_sum == doctest::Approx(oc.mean_total_enrolled));
  CHECK(oc.mean_total_enrolled == doctest::Approx(enrolled_total / n));
}

}  // namespace

TEST_CASE("builtin scenarios") {
  const auto& all = builtin_scenarios();
  REQUIRE(all.size() == 9);
  for (std::size_t i = 0; i < all.size(); ++i) {
    CHECK(all[i].name == "scenario" + std::to_string(i + 1));
    CHECK_NOTHROW(all[i].validate());
    CHECK(all[i].grid.raw_doses() ==
          std::vector<double>{60, 75, 90, 105, 120, 135, 150, 165, 180});
    CHECK(all[i].true_bio.has_value() == (i >= 6));
    CHECK(all[i].bio_rule.has_value() == (i >= 6));
  }
  const auto s1 = builtin("scenario1");
  CHECK(s1.true_tox == std::vector<double>{0.01, 0.05, 0.10, 0.18, 0.27, 0.38, 0.5, 0.55, 0.7});
  CHECK(s1.target_levels == std::vector<std::size_t>{3, 4});
  CHECK(builtin("scenario6").target_levels == std::vector<std::size_t>{4});
  CHECK(builtin("scenario5").target_levels == std::vector<std::size_t>{4, 5});
  const auto s9 = builtin("scenario9");
  CHECK(*s9.true_bio ==
        std::vector<double>{0.80, 0.78, 0.65, 0.55, 0.43, 0.35, 0.30, 0.2, 0.2});
  CHECK(s9.bio_rule->direction == BioRule::Direction::kAtLeast);
  CHECK(s9.bio_rule->threshold == 0.5);
  CHECK(builtin("scenario8").bio_rule->threshold == 0.25);
  CHECK(builtin("scenario8").bio_rule->direction == BioRule::Direction::kAtLeast);
  CHECK(builtin("scenario7").bio_rule->threshold == 0.3);
  CHECK(builtin("scenario4").description.find("bell shape") != std::string::npos);
  CHECK_FALSE(find_builtin_scenario("scenario10").has_value());
}

TEST_CASE("over-toxic levels") {
  CHECK(over_toxic_levels(builtin("scenario1"), 0.33) == std::vector<std::size_t>{5, 6, 7, 8});
  CHECK(over_toxic_levels(builtin("scenario5"), 0.33) == std::vector<std::size_t>{6, 7, 8});
  CHECK(over_toxic_levels(builtin("scenario6"), 0.33) == std::vector<std::size_t>{5, 6, 7, 8});
}

TEST_CASE("scenario validation") {
  auto field_of = [](const ScenarioSpec& s) -> std::string {
    try {
      s.validate();
    } catch (const ConfigError& e) {
      return e.field();
    }
    return "";
  };
  auto s = builtin("scenario1");
  s.true_tox.pop_back();
  CHECK(field_of(s) == "true_tox");
  s = builtin("scenario1");
  s.true_eff[2] = 1.2;
  CHECK(field_of(s) == "true_eff");
  s = builtin("scenario1");
  s.target_levels.push_back(9);
  CHECK(field_of(s) == "target_levels");
  s = builtin("scenario1");
  s.bio_rule = BioRule{};
  CHECK(field_of(s) == "bio_rule");
  s = builtin("scenario1");
  s.name.clear();
  CHECK(field_of(s) == "name");
}

TEST_CASE("cohort outcome generation") {
  auto sc = builtin("scenario8");
  sc.true_tox[0] = 0.0;
  sc.true_eff[0] = 1.0;
  Rng rng(11);
  for (const auto& r : generate_cohort_outcomes(sc, 0, 500, rng)) {
    CHECK(r.y_tox == 0);
    CHECK(r.y_eff >= 1);
    CHECK(r.y_bio.has_value());
    CHECK(r.dose_level == 0);
  }

  const int n = 100000;
  const auto big = generate_cohort_outcomes(sc, 4, n, rng);  // tox 0.27, eff 0.4, bio 0.35
  double tox = 0, eff1 = 0, eff2 = 0, bio = 0, both = 0;
  for (const auto& r : big) {
    tox += r.y_tox;
    eff1 += r.y_eff == 1;
    eff2 += r.y_eff == 2;
    bio += *r.y_bio;
    both += r.y_tox == 1 && r.y_eff > 0;
  }
  auto within = [n](double count, double p) {
    const double se = std::sqrt(p * (1 - p) / n);
    return std::abs(count / n - p) < 3 * se;
  };
  CHECK(within(tox, 0.27));
  CHECK(within(eff1 + eff2, 0.40));
  CHECK(within(eff1, 0.20));
  CHECK(within(eff2, 0.20));
  CHECK(within(bio, 0.35));
  CHECK(within(both, 0.27 * 0.40));  // independent margins

  const auto two = generate_cohort_outcomes(builtin("scenario1"), 2, 50, rng);
  for (const auto& r : two) CHECK_FALSE(r.y_bio.has_value());
}

TEST_CASE("correlated outcome generation keeps margins") {
  auto sc = builtin("scenario2");
  sc.outcome_correlation = 0.5;
  Rng rng(5);
  const int n = 100000;
  const auto recs = generate_cohort_outcomes(sc, 4, n, rng);  // tox 0.27, eff 0.40
  double tox = 0, eff = 0, both = 0;
  for (const auto& r : recs) {
    tox += r.y_tox;
    eff += r.y_eff > 0;
    both += r.y_tox == 1 && r.y_eff > 0;
  }
  const double p11 = oracle::bvn_rect_quadrature(-9, oracle::quantile(0.27), -9,
                                                 oracle::quantile(0.40), 0.5);
  auto within = [n](double count, double p) {
    return std::abs(count / n - p) < 3 * std::sqrt(p * (1 - p) / n);
  };
  CHECK(within(tox, 0.27));
  CHECK(within(eff, 0.40));
  CHECK(within(both, p11));
  CHECK(p11 > 0.27 * 0.40);
}

TEST_CASE("design for a scenario") {
  EscalationConfig base;
  const auto d8 = design_for(builtin("scenario8"), base);
  REQUIRE(d8.bio_rule.has_value());
  CHECK(d8.bio_rule->threshold == 0.25);
  CHECK(d8.model_kind() == ModelKind::kToxEffBio);
  CHECK(design_for(builtin("scenario1"), base) == base);
  base.tox_only = true;
  CHECK(design_for(builtin("scenario8"), base).model_kind() == ModelKind::kToxOnly);
}

TEST_CASE("trial runs are reproducible and respect design bounds") {
  const auto sc = builtin("scenario1");
  const EscalationConfig cfg;
  const PriorSpec prior;
  const auto mcmc = quick_mcmc();
  const auto a = run_trial(sc, cfg, prior, mcmc, 1234);
  const auto b = run_trial(sc, cfg, prior, mcmc, 1234);
  CHECK(a.selected_level == b.selected_level);
  CHECK(a.patients_per_level == b.patients_per_level);
  CHECK(a.tox_curve == b.tox_curve);
  REQUIRE(a.steps.size() == b.steps.size());

  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto r = run_trial(sc, cfg, prior, mcmc, seed);
    CHECK(r.total_enrolled >= 3);
    CHECK(r.total_enrolled <= 54);
    CHECK(std::accumulate(r.patients_per_level.begin(), r.patients_per_level.end(), 0) ==
          r.total_enrolled);
    REQUIRE_FALSE(r.steps.empty());
    CHECK(r.steps.front().dose == 0);
    for (std::size_t k = 1; k < r.steps.size(); ++k) {
      const auto prev = static_cast<long>(r.steps[k - 1].dose);
      const auto cur = static_cast<long>(r.steps[k].dose);
      CHECK(std::abs(cur - prev) <= 1);
      CHECK(r.steps[k - 1].decision.next_dose == std::optional<std::size_t>(r.steps[k].dose));
    }
    for (const auto& s : r.steps) {
      if (s.decision.j_recommend) {
        const auto& adm = s.decision.admissible;
        CHECK(std::find(adm.begin(), adm.end(), *s.decision.j_recommend) != adm.end());
      }
    }
    CHECK(r.selected_level == r.steps.back().decision.j_recommend);
  }
}

TEST_CASE("a toxic lowest dose mostly ends without a recommendation") {
  ScenarioSpec sc = builtin("scenario1");
  sc.name = "toxic";
  sc.true_tox[0] = 0.9;
  McmcConfig mcmc;
  mcmc.burn_in = 200;
  mcmc.kept_draws = 800;
  const auto rs = run_replicates(sc, EscalationConfig{}, PriorSpec{}, mcmc, 200, 77, 1);
  const auto none = std::count_if(rs.begin(), rs.end(),
                                  [](const ReplicateResult& r) { return !r.selected_level; });
  CHECK(none > 180);
}

TEST_CASE("aggregation matches a naive recount and ignores order and threads") {
  const auto sc = builtin("scenario5");
  const EscalationConfig cfg;
  McmcConfig mcmc;
  mcmc.burn_in = 100;
  mcmc.kept_draws = 400;
  const auto serial = run_replicates(sc, cfg, PriorSpec{}, mcmc, 12, 42, 1);
  const auto threaded = run_replicates(sc, cfg, PriorSpec{}, mcmc, 12, 42, 4);
  for (std::size_t r = 0; r < serial.size(); ++r) {
    CHECK(serial[r].seed == replicate_seed(42, r));
    CHECK(serial[r].selected_level == threaded[r].selected_level);
    CHECK(serial[r].patients_per_level == threaded[r].patients_per_level);
    CHECK(serial[r].tox_curve == threaded[r].tox_curve);
  }
  const auto oc = aggregate(sc, cfg, serial);
  check_aggregate(sc, oc, serial, cfg.tox_rule.upper);

  auto shuffled = serial;
  gen::Source src(9);
  std::shuffle(shuffled.begin(), shuffled.end(), src.engine());
  const auto oc2 = aggregate(sc, cfg, shuffled);
  CHECK(oc2.selection_pct == oc.selection_pct);
  CHECK(oc2.target_pct == oc.target_pct);
  CHECK(oc2.over_toxic_pct == oc.over_toxic_pct);
  CHECK(oc2.mean_total_enrolled == doctest::Approx(oc.mean_total_enrolled));
}

TEST_CASE("aggregation property over synthetic replicate sets") {
  gen::Source src(2024);
  const auto sc = builtin("scenario1");
  const EscalationConfig cfg;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = src.integer(1, 40);
    std::vector<ReplicateResult> rs(n);
    for (auto& r : rs) {
      r.patients_per_level.assign(9, 0);
      const int cohorts = src.integer(1, 18);
      for (int c = 0; c < cohorts; ++c) r.patients_per_level[src.integer(0, 8)] += 3;
      r.total_enrolled = 3 * cohorts;
      if (src.uniform(0.0, 1.0) < 0.9) r.selected_level = static_cast<std::size_t>(src.integer(0, 8));
      r.tox_curve.assign(9, 0.1);
      r.eff_curve.assign(9, 0.2);
    }
    check_aggregate(sc, aggregate(sc, cfg, rs), rs, cfg.tox_rule.upper);
  }
}

TEST_CASE("simulation rejects bad inputs") {
  const auto sc = builtin("scenario1");
  CHECK_THROWS_AS(run_replicates(sc, EscalationConfig{}, PriorSpec{}, McmcConfig{}, 0, 1, 1),
                  ConfigError);
  EscalationConfig bio;
  bio.bio_rule = BioRule{};
  CHECK_THROWS_AS(run_replicates(sc, bio, PriorSpec{}, McmcConfig{}, 1, 1, 1), ConfigError);
}
