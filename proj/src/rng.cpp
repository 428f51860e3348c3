#include "dosefind/rng.hpp"

#include <algorithm>
#include <cmath>

#include "dosefind/normal.hpp"

namespace dosefind {

double keyed_normal(std::uint64_t key1, std::uint64_t key2, std::uint64_t salt) noexcept {
  const std::uint64_t bits = mix64(mix64(key1 ^ mix64(salt)) + mix64(key2 + 0x2545f4914f6cdd1dULL));
  return norm_quantile(to_unit_open(bits));
}

double Rng::normal() { return norm_quantile(uniform()); }

double Rng::truncated_std_normal(double a, double b) {
  if (!(a < b)) return a;
  if (a > 0.0) {
    // Upper tail: invert the survival function so small tails stay accurate.
    const double plo = norm_sf(b);
    const double phi = norm_sf(a);
    if (!(phi > plo)) return a;
    const double u = plo + uniform() * (phi - plo);
    return std::clamp(-norm_quantile(u), a, b);
  }
  const double plo = norm_cdf(a);
  const double phi = norm_cdf(b);
  if (!(phi > plo)) return b;
  const double u = plo + uniform() * (phi - plo);
  return std::clamp(norm_quantile(u), a, b);
}

double Rng::truncated_normal(double mean, double sd, double lo, double hi) {
  return mean + sd * truncated_std_normal((lo - mean) / sd, (hi - mean) / sd);
}

}  // namespace dosefind
