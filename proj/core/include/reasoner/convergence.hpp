#pragma once

#include <vector>

#include "reasoner/archive.hpp"

namespace reasoner {

struct CoordinateReport {
  std::vector<double> per_coordinate;
  double mean = 0.0;
};

/// Split R-hat over the retained draws: every chain is halved, then the
/// classic between/within variance ratio is formed over the 2m half-chains.
/// Coordinates with zero within-chain variance report +infinity.
/// Requires at least 2 chains with 10 draws each.
CoordinateReport gelman_rubin(const SampleArchive& archive);

/// Effective sample size per coordinate: per-chain autocorrelation with
/// Geyer's initial monotone positive sequence, summed over chains. Constant
/// chains contribute 0.
CoordinateReport effective_sample_size(const SampleArchive& archive);

/// Single-chain ESS, exposed for testing against analytic autocorrelations.
double chain_ess(const std::vector<double>& draws);

}  // namespace reasoner
