#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "reasoner/archive.hpp"
#include "reasoner/posterior.hpp"

namespace reasoner {

struct HmcConfig {
  std::size_t n_chains = 8;
  std::size_t n_samples = 8000;  // retained draws over all chains
  std::size_t leapfrog_steps = 10;
  double target_acceptance = 0.6;
  std::size_t warmup_iterations = 1000;  // per chain
  std::uint64_t master_seed = 0;
  /// Each transition uses step * (1 + jitter * u), u uniform on [-1, 1], so
  /// the trajectory length cannot lock onto a period of the target.
  double step_jitter = 0.2;
  /// Post-warmup fraction of divergent transitions that aborts sampling.
  double max_divergence_rate = 0.5;

  void validate() const;
};

struct LeapfrogResult {
  std::vector<double> position;
  std::vector<double> momentum;
  double log_density = 0.0;
  bool finite = true;
};

/// L steps of the half-kick / drift / half-kick scheme for
/// H(xi, rho) = -log p(xi) + rho' diag(inv_mass) rho / 2.
LeapfrogResult leapfrog(const LatentPosterior& target, std::span<const double> position,
                        std::span<const double> momentum, double step_size, std::size_t steps,
                        std::span<const double> inv_mass);

double hamiltonian(const LatentPosterior& target, std::span<const double> position, std::span<const double> momentum,
                   std::span<const double> inv_mass);

struct ChainSummary {
  double step_size = 0.0;
  std::vector<double> inv_mass;
  std::size_t accepted = 0;
  std::size_t proposed = 0;
  std::size_t divergent = 0;
  double acceptance_rate() const { return proposed ? static_cast<double>(accepted) / static_cast<double>(proposed) : 0.0; }
};

struct HmcResult {
  SampleArchive archive;
  std::vector<ChainSummary> chains;
};

/// Multi-chain HMC. Each chain starts at a prior draw, adapts its step size by
/// dual averaging and its diagonal inverse mass over three expanding warmup
/// windows, then freezes both for the retained draws. Chains run in parallel
/// with generators seeded by mix_seed(master_seed, chain).
HmcResult sample_hmc(const LatentPosterior& target, const HmcConfig& config);

}  // namespace reasoner
