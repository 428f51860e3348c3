#include "dosefind/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace dosefind {

namespace {

double mean_of(std::span<const double> xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

// Autocovariance at lag k (biased, 1/n normalization).
double autocov(std::span<const double> xs, double mean, std::size_t lag) {
  const std::size_t n = xs.size();
  double s = 0.0;
  for (std::size_t i = 0; i + lag < n; ++i) s += (xs[i] - mean) * (xs[i + lag] - mean);
  return s / static_cast<double>(n);
}

double chain_ess(std::span<const double> xs) {
  const std::size_t n = xs.size();
  if (n < 4) return static_cast<double>(n);
  const double m = mean_of(xs);
  const double c0 = autocov(xs, m, 0);
  if (!(c0 > 0.0)) return static_cast<double>(n);

  // Sum of consecutive autocorrelation pairs while positive and non-increasing.
  double tau = -1.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  const std::size_t max_lag = std::min<std::size_t>(n - 1, 1000);
  for (std::size_t lag = 0; lag + 1 < max_lag; lag += 2) {
    double pair = (autocov(xs, m, lag) + autocov(xs, m, lag + 1)) / c0;
    if (pair <= 0.0) break;
    pair = std::min(pair, prev_pair);
    prev_pair = pair;
    tau += 2.0 * pair;
  }
  tau = std::max(tau, 1.0 / std::log10(static_cast<double>(n)));
  return static_cast<double>(n) / tau;
}

}  // namespace

double effective_sample_size(const std::vector<std::vector<double>>& chains) {
  double total = 0.0;
  for (const auto& c : chains) total += chain_ess(c);
  return total;
}

double split_rhat(const std::vector<std::vector<double>>& chains) {
  std::vector<std::span<const double>> halves;
  for (const auto& c : chains) {
    const std::size_t h = c.size() / 2;
    if (h < 2) return 1.0;
    halves.emplace_back(c.data(), h);
    halves.emplace_back(c.data() + (c.size() - h), h);
  }
  const std::size_t m = halves.size();
  const double n = static_cast<double>(halves.front().size());
  std::vector<double> means(m);
  double within = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    means[j] = mean_of(halves[j]);
    double ss = 0.0;
    for (double x : halves[j]) ss += (x - means[j]) * (x - means[j]);
    within += ss / (n - 1.0);
  }
  within /= static_cast<double>(m);
  const double grand = mean_of(means);
  double between = 0.0;
  for (double mu : means) between += (mu - grand) * (mu - grand);
  between *= n / static_cast<double>(m - 1);
  if (!(within > 0.0)) return 1.0;
  const double var_plus = (n - 1.0) / n * within + between / n;
  return std::sqrt(var_plus / within);
}

}  // namespace dosefind
