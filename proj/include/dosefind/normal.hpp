#pragma once

// Standard normal distribution primitives used by the latent probit model.

#include <array>
#include <limits>

namespace dosefind {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Standard normal density.
double norm_pdf(double x) noexcept;

/// Standard normal CDF, Phi(x). Computed from erfc, so the upper tail keeps
/// full relative precision through norm_sf.
double norm_cdf(double x) noexcept;

/// Upper tail 1 - Phi(x).
double norm_sf(double x) noexcept;

/// Inverse of Phi on (0, 1). Returns -inf / +inf at 0 / 1 and NaN outside.
/// Wichura's AS241 (PPND16), relative accuracy about 1e-16.
double norm_quantile(double p) noexcept;

/// Pr(X > h, Y > k) for a standard bivariate normal with correlation r.
/// Genz's BVNU (Drezner-Wesolowsky with Gauss-Legendre refinement);
/// absolute accuracy about 1e-15. Infinite h or k are accepted.
double bvn_upper(double h, double k, double r) noexcept;

/// Pr(lo1 < X < hi1, lo2 < Y < hi2) for a standard bivariate normal with
/// correlation r. Bounds may be infinite.
double bvn_rect(double lo1, double hi1, double lo2, double hi2, double r) noexcept;

/// Pr(lo < X < hi) for X ~ N(0, R), R a 3x3 correlation matrix given by its
/// off-diagonal entries (r12, r13, r23). Integrates the first coordinate
/// numerically against the conditional bivariate rectangle.
double tvn_rect(const std::array<double, 3>& lo, const std::array<double, 3>& hi,
                double r12, double r13, double r23);

}  // namespace dosefind
