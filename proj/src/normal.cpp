#include "dosefind/normal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace dosefind {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Half of the symmetric Gauss-Legendre rules of order 6, 12 and 20.
constexpr std::array<std::array<double, 10>, 3> kGlW = {{
    {0.1713244923791705, 0.3607615730481384, 0.4679139345726904},
    {0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
     0.2031674267230659, 0.2334925365383547, 0.2491470458134029},
    {0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
     0.08327674157670475, 0.1019301198172404, 0.1181945319615184,
     0.1316886384491766, 0.1420961093183821, 0.1491729864726037,
     0.1527533871307259},
}};
constexpr std::array<std::array<double, 10>, 3> kGlX = {{
    {-0.9324695142031522, -0.6612093864662647, -0.2386191860831970},
    {-0.9815606342467191, -0.9041172563704750, -0.7699026741943050,
     -0.5873179542866171, -0.3678314989981802, -0.1252334085114692},
    {-0.9931285991850949, -0.9639719272779138, -0.9122344282513259,
     -0.8391169718222188, -0.7463319064601508, -0.6360536807265150,
     -0.5108670019508271, -0.3737060887154196, -0.2277858511416451,
     -0.07652652113349733},
}};

// Finite-argument core of Genz's BVNU.
double bvnu_finite(double h, double k, double r) {
  int ng = 0;
  int lg = 3;
  if (std::abs(r) >= 0.3) {
    ng = 1;
    lg = 6;
  }
  if (std::abs(r) >= 0.75) {
    ng = 2;
    lg = 10;
  }
  const auto& w = kGlW[ng];
  const auto& x = kGlX[ng];

  double hk = h * k;
  double bvn = 0.0;
  if (std::abs(r) < 0.925) {
    const double hs = (h * h + k * k) / 2.0;
    const double asr = std::asin(r);
    for (int i = 0; i < lg; ++i) {
      double sn = std::sin(asr * (x[i] + 1.0) / 2.0);
      bvn += w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
      sn = std::sin(asr * (-x[i] + 1.0) / 2.0);
      bvn += w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
    }
    return bvn * asr / (2.0 * kTwoPi) + norm_cdf(-h) * norm_cdf(-k);
  }

  if (r < 0.0) {
    k = -k;
    hk = -hk;
  }
  if (std::abs(r) < 1.0) {
    const double as = (1.0 - r) * (1.0 + r);
    double a = std::sqrt(as);
    const double bs = (h - k) * (h - k);
    const double c = (4.0 - hk) / 8.0;
    const double d = (12.0 - hk) / 16.0;
    bvn = a * std::exp(-(bs / as + hk) / 2.0) *
          (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as * as / 5.0);
    if (hk > -160.0) {
      const double b = std::sqrt(bs);
      bvn -= std::exp(-hk / 2.0) * std::sqrt(kTwoPi) * norm_cdf(-b / a) * b *
             (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
    }
    a /= 2.0;
    for (int i = 0; i < lg; ++i) {
      double xs = (a * (x[i] + 1.0)) * (a * (x[i] + 1.0));
      double rs = std::sqrt(1.0 - xs);
      bvn += a * w[i] *
             (std::exp(-bs / (2.0 * xs) - hk / (1.0 + rs)) / rs -
              std::exp(-(bs / xs + hk) / 2.0) * (1.0 + c * xs * (1.0 + d * xs)));
      xs = as * (-x[i] + 1.0) * (-x[i] + 1.0) / 4.0;
      rs = std::sqrt(1.0 - xs);
      bvn += a * w[i] * std::exp(-(bs / xs + hk) / 2.0) *
             (std::exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs -
              (1.0 + c * xs * (1.0 + d * xs)));
    }
    bvn = -bvn / kTwoPi;
  }
  if (r > 0.0) return bvn + norm_cdf(-std::max(h, k));
  return -bvn + std::max(0.0, norm_cdf(-h) - norm_cdf(-k));
}

// Adaptive Gauss-Kronrod (7/15) on [a, b].
constexpr std::array<double, 8> kKronX = {
    0.991455371120812639, 0.949107912342758525, 0.864864423359769073,
    0.741531185599394440, 0.586087235467691130, 0.405845151377397167,
    0.207784955007898468, 0.0};
constexpr std::array<double, 8> kKronW = {
    0.022935322010529225, 0.063092092629978553, 0.104790010322250184,
    0.140653259715525919, 0.169004726639267903, 0.190350578064785410,
    0.204432940075298892, 0.209482141084727828};
constexpr std::array<double, 4> kGaussW = {
    0.129484966168869693, 0.279705391489276668, 0.381830050505118945,
    0.417959183673469388};

template <class F>
double gk15(const F& f, double a, double b, double& err) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = f(c);
  double kron = fc * kKronW[7];
  double gauss = fc * kGaussW[3];
  for (int i = 0; i < 7; ++i) {
    const double dx = h * kKronX[i];
    const double s = f(c - dx) + f(c + dx);
    kron += kKronW[i] * s;
    if (i % 2 == 1) gauss += kGaussW[i / 2] * s;
  }
  err = std::abs((kron - gauss) * h);
  return kron * h;
}

template <class F>
double integrate(const F& f, double a, double b, double tol, int depth) {
  double err = 0.0;
  const double whole = gk15(f, a, b, err);
  if (err <= tol || depth <= 0) return whole;
  const double m = 0.5 * (a + b);
  return integrate(f, a, m, tol / 2.0, depth - 1) + integrate(f, m, b, tol / 2.0, depth - 1);
}

}  // namespace

double norm_pdf(double x) noexcept {
  return std::exp(-0.5 * x * x) / std::sqrt(kTwoPi);
}

double norm_cdf(double x) noexcept {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

double norm_sf(double x) noexcept {
  return 0.5 * std::erfc(x / std::numbers::sqrt2);
}

double norm_quantile(double p) noexcept {
  if (std::isnan(p) || p < 0.0 || p > 1.0) return std::numeric_limits<double>::quiet_NaN();
  if (p == 0.0) return -kInf;
  if (p == 1.0) return kInf;

  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((r * 2509.0809287301226727 + 33430.575583588128105) * r +
                 67265.770927008700853) * r + 45921.953931549871457) * r +
               13731.693765509461125) * r + 1971.5909503065514427) * r +
             133.14166789178437745) * r + 3.387132872796366608) /
           (((((((r * 5226.495278852545925 + 28729.085735721942674) * r +
                 39307.89580009271061) * r + 21213.794301586595867) * r +
               5394.1960214247511077) * r + 687.1870074920579083) * r +
             42.313330701600911252) * r + 1.0);
  }

  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val = 0.0;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((r * 7.7454501427834140764e-4 + 0.0227238449892691845833) * r +
                0.24178072517745061177) * r + 1.27045825245236838258) * r +
              3.64784832476320460504) * r + 5.7694972214606914055) * r +
            4.6303378461565452959) * r + 1.42343711074968357734) /
          (((((((r * 1.05075007164441684324e-9 + 5.475938084995344946e-4) * r +
                0.0151986665636164571966) * r + 0.14810397642748007459) * r +
              0.68976733498510000455) * r + 1.6763848301838038494) * r +
            2.05319162663775882187) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((r * 2.01033439929228813265e-7 + 2.71155556874348757815e-5) * r +
                0.0012426609473880784386) * r + 0.026532189526576123093) * r +
              0.29656057182850489123) * r + 1.7848265399172913358) * r +
            5.4637849111641143699) * r + 6.6579046435011037772) /
          (((((((r * 2.04426310338993978564e-15 + 1.4215117583164458887e-7) * r +
                1.8463183175100546818e-5) * r + 7.868691311456132591e-4) * r +
              0.0148753612908506148525) * r + 0.13692988092273580531) * r +
            0.59983220655588793769) * r + 1.0);
  }
  return q < 0.0 ? -val : val;
}

double bvn_upper(double h, double k, double r) noexcept {
  if (h == kInf || k == kInf) return 0.0;
  if (h == -kInf) return k == -kInf ? 1.0 : norm_sf(k);
  if (k == -kInf) return norm_sf(h);
  return std::clamp(bvnu_finite(h, k, r), 0.0, 1.0);
}

double bvn_rect(double lo1, double hi1, double lo2, double hi2, double r) noexcept {
  if (!(lo1 < hi1) || !(lo2 < hi2)) return 0.0;
  const double p = bvn_upper(lo1, lo2, r) - bvn_upper(lo1, hi2, r) -
                   bvn_upper(hi1, lo2, r) + bvn_upper(hi1, hi2, r);
  return std::clamp(p, 0.0, 1.0);
}

double tvn_rect(const std::array<double, 3>& lo, const std::array<double, 3>& hi,
                double r12, double r13, double r23) {
  if (!(lo[0] < hi[0]) || !(lo[1] < hi[1]) || !(lo[2] < hi[2])) return 0.0;
  // (X2, X3) | X1 = x ~ N((r12 x, r13 x), C) with C the partial covariance.
  const double v2 = 1.0 - r12 * r12;
  const double v3 = 1.0 - r13 * r13;
  const double c23 = r23 - r12 * r13;
  constexpr double kDegenerate = 1e-14;
  if (v2 < kDegenerate || v3 < kDegenerate) {
    // Nearly collinear with X1: fall back to a fine fixed-step rule over x,
    // treating the degenerate coordinate as a deterministic function of x.
    const double s2 = std::sqrt(std::max(v2, 0.0));
    const double s3 = std::sqrt(std::max(v3, 0.0));
    auto cond = [&](double x) {
      auto prob1 = [&](double m, double s, double l, double u) {
        if (s < 1e-7) return (m > l && m < u) ? 1.0 : 0.0;
        return std::max(0.0, norm_cdf((u - m) / s) - norm_cdf((l - m) / s));
      };
      const double pa = prob1(r12 * x, s2, lo[1], hi[1]);
      const double pb = prob1(r13 * x, s3, lo[2], hi[2]);
      return norm_pdf(x) * pa * pb;
    };
    const double a = std::max(lo[0], -9.0);
    const double b = std::min(hi[0], 9.0);
    if (!(a < b)) return 0.0;
    return std::clamp(integrate(cond, a, b, 1e-11, 30), 0.0, 1.0);
  }
  const double s2 = std::sqrt(v2);
  const double s3 = std::sqrt(v3);
  const double rc = std::clamp(c23 / (s2 * s3), -1.0, 1.0);
  auto integrand = [&](double x) {
    const double m2 = r12 * x;
    const double m3 = r13 * x;
    return norm_pdf(x) * bvn_rect((lo[1] - m2) / s2, (hi[1] - m2) / s2,
                                  (lo[2] - m3) / s3, (hi[2] - m3) / s3, rc);
  };
  const double a = std::max(lo[0], -9.0);
  const double b = std::min(hi[0], 9.0);
  if (!(a < b)) return 0.0;
  return std::clamp(integrate(integrand, a, b, 1e-11, 30), 0.0, 1.0);
}

}  // namespace dosefind
