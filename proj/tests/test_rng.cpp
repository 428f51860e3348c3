#include "doctest.h"

#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include "dosefind/diagnostics.hpp"
#include "dosefind/rng.hpp"
#include "oracles.hpp"

using namespace dosefind;

TEST_CASE("seed derivation is stable and collision free on a range") {
  static_assert(derive_seed(1, 2) == derive_seed(1, 2));
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 10000; ++i) seen.insert(derive_seed(42, i));
  CHECK(seen.size() == 10000);
  CHECK(derive_seed(42, 0) != derive_seed(43, 0));
}

TEST_CASE("streams are reproducible") {
  Rng a(7), b(7), c(8);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const double x = a.normal();
    CHECK(x == b.normal());
    differs = differs || x != c.normal();
  }
  CHECK(differs);
  CHECK(keyed_normal(3, 4, 5) == keyed_normal(3, 4, 5));
  CHECK(keyed_normal(3, 4, 5) != keyed_normal(4, 3, 5));
}

TEST_CASE("normal draws have standard moments") {
  Rng rng(99);
  std::vector<double> xs(200000);
  for (double& x : xs) x = rng.normal();
  CHECK(std::abs(oracle::sample_mean(xs)) < 0.01);
  CHECK(std::abs(oracle::sample_var(xs) - 1.0) < 0.015);
  CHECK(oracle::ks_statistic(xs, oracle::cdf) < 1.63 / std::sqrt(xs.size()));

  std::vector<double> keyed(100000);
  for (std::size_t i = 0; i < keyed.size(); ++i) keyed[i] = keyed_normal(i, 17, 0);
  CHECK(oracle::ks_statistic(keyed, oracle::cdf) < 1.63 / std::sqrt(keyed.size()));
}

TEST_CASE("truncated normal stays in bounds and matches the truncated cdf") {
  Rng rng(5);
  struct Case {
    double lo, hi;
  };
  for (const Case c : {Case{-std::numeric_limits<double>::infinity(), 0.0}, Case{0.0, std::numeric_limits<double>::infinity()}, Case{1.5, 2.0}, Case{6.0, std::numeric_limits<double>::infinity()},
                       Case{-std::numeric_limits<double>::infinity(), -7.0}, Case{-0.3, 0.4}}) {
    const double plo = oracle::cdf(c.lo), phi = oracle::cdf(c.hi);
    std::vector<double> xs(20000);
    for (double& x : xs) {
      x = rng.truncated_std_normal(c.lo, c.hi);
      REQUIRE(x >= c.lo);
      REQUIRE(x <= c.hi);
    }
    if (phi - plo > 1e-6) {
      auto F = [&](double x) { return (oracle::cdf(x) - plo) / (phi - plo); };
      CHECK(oracle::ks_statistic(xs, F) < 1.63 / std::sqrt(xs.size()));
    }
  }
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.truncated_normal(2.0, 0.5, 1.0, 1.2);
    CHECK(x >= 1.0);
    CHECK(x <= 1.2);
  }
}

TEST_CASE("effective sample size and split R-hat") {
  SUBCASE("independent draws") {
    Rng rng(1);
    std::vector<std::vector<double>> chains(2, std::vector<double>(4000));
    for (auto& c : chains) {
      for (double& x : c) x = rng.normal();
    }
    const double ess = effective_sample_size(chains);
    CHECK(ess > 6000);
    CHECK(ess < 10000);
    CHECK(split_rhat(chains) < 1.01);
  }
  SUBCASE("AR(1) chain matches the analytic ESS") {
    // For x_t = phi x_{t-1} + e_t the integrated autocorrelation time is (1 + phi) / (1 - phi).
    Rng rng(2);
    const double phi = 0.8;
    std::vector<std::vector<double>> chains(1, std::vector<double>(100000));
    double x = 0.0;
    for (double& v : chains[0]) {
      x = phi * x + std::sqrt(1 - phi * phi) * rng.normal();
      v = x;
    }
    const double expected = 100000.0 * (1 - phi) / (1 + phi);
    CHECK(std::abs(effective_sample_size(chains) / expected - 1.0) < 0.15);
  }
  SUBCASE("chains stuck in different places") {
    std::vector<std::vector<double>> chains{std::vector<double>(500), std::vector<double>(500)};
    Rng rng(3);
    for (double& v : chains[0]) v = rng.normal();
    for (double& v : chains[1]) v = 5.0 + rng.normal();
    CHECK(split_rhat(chains) > 1.5);
  }
  SUBCASE("constant input") {
    std::vector<std::vector<double>> chains{std::vector<double>(100, 2.0)};
    CHECK(split_rhat(chains) == 1.0);
  }
}
