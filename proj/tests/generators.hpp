#pragma once

// Random inputs for property tests.

#include <cstdint>
#include <random>

#include "dosefind/model.hpp"

namespace gen {

class Source {
 public:
  explicit Source(std::uint64_t seed) : eng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(eng_); }
  bool coin() { return integer(0, 1) == 1; }

  dosefind::ModelParams params(double max_abs_rho = 0.99) {
    dosefind::ModelParams p;
    p.alpha1 = uniform(-3.0, 2.0);
    p.beta1 = uniform(-1.0, 3.0);
    p.alpha2 = uniform(-2.5, 2.0);
    p.beta2 = uniform(-1.5, 2.5);
    p.gamma2 = uniform(-2.0, 0.5);
    p.zeta = uniform(0.05, 4.0);
    p.rho = uniform(-max_abs_rho, max_abs_rho);
    return p;
  }

  // Three-outcome parameters with a positive-definite correlation matrix.
  dosefind::ModelParams params_bio(double max_abs_rho = 0.9) {
    dosefind::ModelParams p = params(max_abs_rho);
    for (;;) {
      dosefind::BiomarkerParams b{uniform(-2.0, 2.0), uniform(-1.5, 1.5), uniform(-1.5, 0.5),
                                  uniform(-max_abs_rho, max_abs_rho),
                                  uniform(-max_abs_rho, max_abs_rho)};
      p.bio = b;
      const double det = 1.0 - p.rho * p.rho - b.rho13 * b.rho13 - b.rho23 * b.rho23 +
                         2.0 * p.rho * b.rho13 * b.rho23;
      if (det > 0.02) return p;
    }
  }

  double dose() { return uniform(-1.5, 0.5); }

  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

}  // namespace gen
