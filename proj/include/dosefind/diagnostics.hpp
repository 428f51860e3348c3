#pragma once

#include <span>
#include <vector>

namespace dosefind {

/// Effective sample size pooled over chains, using Geyer's initial monotone
/// positive sequence on the autocorrelations of each chain.
double effective_sample_size(const std::vector<std::vector<double>>& chains);

/// Split-chain R-hat: each chain is halved and the Gelman-Rubin statistic is
/// computed over the halves. Returns 1 for constant input.
double split_rhat(const std::vector<std::vector<double>>& chains);

}  // namespace dosefind
