// Acceptance run: reproduces the reference operating characteristics and
// checks the numerical and behavioural guarantees. Prints one PASS/FAIL line
// per criterion and exits non-zero if any fails.
//
// DOSEFIND_ACCEPTANCE_REPLICATES sets the replicate count for the simulation
// criteria (default 200). At 1000 or more the table tolerance tightens to 8.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "dosefind/inference.hpp"
#include "dosefind/io.hpp"
#include "dosefind/rng.hpp"
#include "dosefind/simulation.hpp"
#include "generators.hpp"
#include "oracles.hpp"

using namespace dosefind;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

void report(int n, const char* title, const Outcome& o, bool& all) {
  std::printf("criterion %d %s: %s (%s)\n", n, o.pass ? "PASS" : "FAIL", title, o.detail.c_str());
  std::fflush(stdout);
  all = all && o.pass;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

int env_int(const char* name, int def) {
  const char* v = std::getenv(name);
  return v ? std::max(1, std::atoi(v)) : def;
}

struct Run {
  ScenarioSpec scenario;
  EscalationConfig design;
  std::vector<ReplicateResult> results;
  OperatingCharacteristics oc;
};

Run simulate(const std::string& name, bool tox_only, int reps, int threads) {
  Run r;
  r.scenario = *find_builtin_scenario(name);
  EscalationConfig base;
  base.tox_only = tox_only;
  r.design = design_for(r.scenario, base);
  const auto t0 = std::chrono::steady_clock::now();
  r.results = run_replicates(r.scenario, r.design, PriorSpec{}, McmcConfig{}, reps, 20240101,
                             threads);
  r.oc = aggregate(r.scenario, r.design, r.results);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("  %s%s: target %.1f%%, over-toxic %.1f%%, none %.1f%%, mean n %.1f (%d reps, %.0f s)\n",
              name.c_str(), tox_only ? " tox-only" : "", r.oc.target_pct, r.oc.over_toxic_pct,
              r.oc.none_pct, r.oc.mean_total_enrolled, reps, secs);
  std::fflush(stdout);
  return r;
}

bool within(double x, double ref, double tol) { return std::abs(x - ref) <= tol; }

// Criterion 4 oracle: Phi(Phi^-1(pi) + eps) simulated with an independent generator.
std::pair<double, double> overdose_mc_oracle(double pi, double tu, int n, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> z;
  const double q = oracle::quantile(pi);
  double sum = 0.0;
  int over = 0;
  for (int i = 0; i < n; ++i) {
    const double p = oracle::cdf(q + z(eng));
    sum += p;
    over += p > tu;
  }
  return {static_cast<double>(over) / n, sum / n};
}

double cell_oracle(const ModelParams& p, double d, int yt, int ye) {
  const double inf = std::numeric_limits<double>::infinity();
  const double m1 = tox_latent_mean(p, d), m2 = eff_latent_mean(p, d);
  const double lo1 = yt == 1 ? -m1 : -inf, hi1 = yt == 1 ? inf : -m1;
  const double lo2 = ye == 0 ? -inf : (ye == 1 ? -m2 : p.zeta - m2);
  const double hi2 = ye == 0 ? -m2 : (ye == 1 ? p.zeta - m2 : inf);
  return oracle::bvn_rect_quadrature(lo1, hi1, lo2, hi2, p.rho, 1e-10);
}

std::vector<OutcomeRecord> latent_cohorts(const ModelParams& p, const DoseGrid& grid,
                                          const std::vector<int>& per_level, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> z;
  std::vector<OutcomeRecord> out;
  for (std::size_t j = 0; j < per_level.size(); ++j) {
    const double d = grid.covariate(j);
    for (int i = 0; i < per_level[j]; ++i) {
      const double e1 = z(eng);
      const double e2 = p.rho * e1 + std::sqrt(1 - p.rho * p.rho) * z(eng);
      OutcomeRecord r;
      r.dose_level = j;
      r.y_tox = tox_latent_mean(p, d) + e1 > 0;
      const double ze = eff_latent_mean(p, d) + e2;
      r.y_eff = ze <= 0 ? 0 : (ze <= p.zeta ? 1 : 2);
      out.push_back(r);
    }
  }
  return out;
}

// Exhaustive audit of one replicate's log; returns an empty string when clean.
std::string audit(const ReplicateResult& r, const EscalationConfig& cfg) {
  if (r.steps.empty()) return "no cohorts";
  if (r.steps.front().dose != 0) return "first cohort not at level 1";
  if (r.total_enrolled > cfg.max_patients) return "enrollment above maximum";
  if (r.total_enrolled != cfg.cohort_size * static_cast<int>(r.steps.size()))
    return "enrollment does not match cohorts";
  std::size_t highest = 0;
  for (std::size_t k = 0; k < r.steps.size(); ++k) {
    const auto& s = r.steps[k];
    const auto& adm = s.decision.admissible;
    if (s.dose > highest + 1) return "skipped an untried level";
    highest = std::max(highest, s.dose);
    if (k > 0) {
      const auto& prev = r.steps[k - 1];
      if (prev.decision.next_dose != s.dose) return "cohort not at the announced level";
      if (s.dose > prev.dose + 1) return "escalated by more than one level";
    }
    if (s.decision.j_recommend &&
        std::find(adm.begin(), adm.end(), *s.decision.j_recommend) == adm.end())
      return "recommendation outside the admissible set";
    if (s.decision.next_dose && *s.decision.next_dose > s.dose + 1) return "next dose skips";
    if (k + 1 < r.steps.size() && !s.decision.next_dose) return "cohort after a stop";
  }
  const auto& last = r.steps.back().decision;
  if (last.next_dose) return "trial ended without a stop";
  if (r.selected_level) {
    if (std::find(last.admissible.begin(), last.admissible.end(), *r.selected_level) ==
        last.admissible.end())
      return "final selection outside the admissible set";
  }
  return {};
}

}  // namespace

int main() {
  const int reps = env_int("DOSEFIND_ACCEPTANCE_REPLICATES", 200);
  const int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  const double table_tol = reps >= 1000 ? 8.0 : 12.0;
  bool all = true;
  std::vector<Run> runs;

  // 1. Two-outcome table.
  {
    const double target_ref[] = {74, 73, 71, 75, 69, 47};
    const double over_ref[] = {19, 21, 22, 17, 3, 27};
    Outcome o;
    std::string misses;
    for (int s = 0; s < 6; ++s) {
      runs.push_back(simulate("scenario" + std::to_string(s + 1), false, reps, threads));
      const auto& oc = runs.back().oc;
      const bool ok = within(oc.target_pct, target_ref[s], table_tol) &&
                      within(oc.over_toxic_pct, over_ref[s], table_tol);
      if (!ok) {
        o.pass = false;
        misses += fmt(" S%.0f %.1f/%.1f vs %.0f/", s + 1, oc.target_pct, oc.over_toxic_pct,
                      target_ref[s]) +
                  fmt("%.0f;", over_ref[s]);
      }
    }
    o.detail = fmt("tolerance +-%.0f at %.0f replicates", table_tol, reps) +
               (misses.empty() ? "" : ";" + misses);
    report(1, "joint design, scenarios 1-6", o, all);
  }

  // 2. Toxicity-only comparator.
  {
    runs.push_back(simulate("scenario1", true, reps, threads));
    const double t = runs.back().oc.target_pct;
    Outcome o{within(t, 70, 8), fmt("target %.1f%% vs 70 +-8 at %.0f replicates", t, reps)};
    report(2, "toxicity-only comparator, scenario 1", o, all);
  }

  // 3. Three-outcome table.
  {
    runs.push_back(simulate("scenario8", false, reps, threads));
    const auto& oc = runs.back().oc;
    Outcome o{within(oc.target_pct, 76, 10) && within(oc.over_toxic_pct, 15, 8),
              fmt("target %.1f%% vs 76 +-10, over-toxic %.1f%% vs 15 +-8 at %.0f replicates",
                  oc.target_pct, oc.over_toxic_pct, reps)};
    report(3, "three outcomes, scenario 8", o, all);
  }

  // 4. Overdose calibration closed forms.
  {
    Outcome o;
    double worst = 0.0;
    for (double pi : {0.1, 0.2, 0.3}) {
      for (double tu : {0.3, 0.33}) {
        const double risk = 1.0 - oracle::cdf(oracle::quantile(tu) - oracle::quantile(pi));
        const double mean = oracle::cdf(oracle::quantile(pi) / std::sqrt(2.0));
        const auto ref = overdose_risk_reference(pi, tu);
        const auto lib = overdose_risk_monte_carlo(pi, tu, 100000, 7);
        const auto ind = overdose_mc_oracle(pi, tu, 100000, 11);
        if (std::abs(ref.risk - risk) > 1e-9 || std::abs(ref.mean_dlt - mean) > 1e-9) o.pass = false;
        for (double e : {std::abs(lib.risk - risk), std::abs(lib.mean_dlt - mean),
                         std::abs(ind.first - risk), std::abs(ind.second - mean)}) {
          worst = std::max(worst, e);
        }
      }
    }
    const double half = overdose_risk_reference(0.3, 0.3).risk;
    o.pass = o.pass && worst <= 0.01 && std::abs(half - 0.5) < 1e-12;
    o.detail = fmt("max Monte Carlo error %.4f at 1e5 draws; risk(0.3, 0.3) = %.15f", worst, half);
    report(4, "overdose calibration closed forms", o, all);
  }

  // 5. Variance inflation on every decision's draws from runs 1-3.
  {
    Outcome o;
    long checked = 0, strict = 0;
    std::string first_bad;
    for (const auto& run : runs) {
      for (const auto& r : run.results) {
        for (const auto& s : r.steps) {
          for (std::size_t j = 0; j < s.decision.doses.size(); ++j) {
            const auto& ds = s.decision.doses[j];
            ++checked;
            const bool finite = std::isfinite(ds.tox_var_plugin);
            const bool ok = finite && ds.tox_var_plugin > 0 ? ds.tox_var_latent > ds.tox_var_plugin
                                                            : ds.tox_var_latent >= ds.tox_var_plugin;
            strict += finite && ds.tox_var_plugin > 0;
            if (!ok && first_bad.empty()) {
              first_bad = run.scenario.name + fmt(" level %.0f: %.3g < %.3g", j + 1,
                                                  ds.tox_var_latent, ds.tox_var_plugin);
              o.pass = false;
            }
          }
        }
      }
    }
    o.detail = fmt("%.0f dose summaries, %.0f with non-degenerate draws", checked, strict) +
               (first_bad.empty() ? "" : "; first violation " + first_bad);
    report(5, "variance inflation", o, all);
  }

  // 6. Joint cell probabilities against quadrature.
  {
    gen::Source src(606);
    double worst_cell = 0.0, worst_sum = 0.0;
    for (int i = 0; i < 10000; ++i) {
      const ModelParams p = src.params();
      const double d = src.dose();
      double sum = 0.0;
      for (int yt = 0; yt <= 1; ++yt) {
        for (int ye = 0; ye <= 2; ++ye) {
          const double c = joint_cell_prob(p, d, yt, ye);
          worst_cell = std::max(worst_cell, std::abs(c - cell_oracle(p, d, yt, ye)));
          sum += c;
        }
      }
      worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
    }
    Outcome o{worst_cell <= 1e-6 && worst_sum <= 1e-6,
              fmt("10000 pairs; max cell error %.2e, max |sum - 1| %.2e", worst_cell, worst_sum)};
    report(6, "joint-probability oracle", o, all);
  }

  // 7. Posterior consistency with 600 patients.
  {
    const DoseGrid grid({60, 75, 90, 105, 120, 135, 150, 165, 180}, 180);
    ModelParams truth;
    truth.alpha1 = -0.5;
    truth.beta1 = 1.5;
    truth.alpha2 = 0.2;
    truth.beta2 = 0.8;
    truth.gamma2 = -0.6;
    truth.zeta = 1.0;
    truth.rho = 0.3;
    std::vector<int> per_level(9, 66);
    for (int j = 0; j < 6; ++j) ++per_level[j];
    const auto data = latent_cohorts(truth, grid, per_level, 42);
    const auto draws = sample_posterior(data, grid, PriorSpec{}, McmcConfig{}, ModelKind::kToxEff);
    double worst = 0.0;
    for (std::size_t j = 1; j <= 7; ++j) {
      const double x = grid.covariate(j);
      double t = 0.0, e = 0.0;
      for (const auto& p : draws.draws) {
        t += tox_prob(p, x);
        e += eff_response_prob(p, x);
      }
      worst = std::max({worst, std::abs(t / draws.size() - tox_prob(truth, x)),
                        std::abs(e / draws.size() - eff_response_prob(truth, x))});
    }
    Outcome o{data.size() == 600 && worst <= 0.05,
              fmt("%.0f patients; max curve error %.4f at levels 2-8", data.size(), worst)};
    report(7, "posterior consistency", o, all);
  }

  // 8. Escalation log audit over every replicate from runs 1-3.
  {
    Outcome o;
    long audited = 0;
    for (const auto& run : runs) {
      for (const auto& r : run.results) {
        ++audited;
        const std::string err = audit(r, run.design);
        if (!err.empty() && o.pass) {
          o.pass = false;
          o.detail = run.scenario.name + " seed " + io::seed_string(r.seed) + ": " + err + "; ";
        }
      }
    }
    o.detail += fmt("%.0f replicates audited", audited);
    report(8, "escalation invariants", o, all);
  }

  // 9. Determinism across thread counts.
  {
    const ScenarioSpec s = *find_builtin_scenario("scenario3");
    const EscalationConfig cfg = design_for(s, EscalationConfig{});
    std::vector<std::string> tables;
    for (int p : {1, 2, 5}) {
      const auto oc = run_simulation(s, cfg, PriorSpec{}, McmcConfig{}, 20, 77, p);
      tables.push_back(io::oc_table_csv(s, oc) + io::curves_csv(s, oc));
    }
    const bool same = tables[0] == tables[1] && tables[0] == tables[2];
    Outcome o{same, same ? "20 replicates at 1, 2 and 5 threads are byte-identical"
                         : "tables differ between thread counts"};
    report(9, "determinism", o, all);
  }

  std::printf("acceptance: %s\n", all ? "all criteria passed" : "some criteria failed");
  return all ? 0 : 1;
}
