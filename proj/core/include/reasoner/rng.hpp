#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>

namespace reasoner {

using Rng = std::mt19937_64;

/// Stream seed derived from a master seed with a splitmix64 finalizer, so
/// neighbouring stream indices give unrelated generators.
std::uint64_t mix_seed(std::uint64_t master, std::uint64_t stream);

void fill_normal(Rng& rng, std::span<double> out);
double uniform01(Rng& rng);

/// Worker count for parallel sections: REASONER_THREADS if set, else the
/// hardware concurrency, capped by `jobs`.
std::size_t worker_count(std::size_t jobs);

/// Runs job(0..jobs-1) on worker_count(jobs) threads. If jobs throw, the
/// exception of the lowest-numbered failing job is rethrown after all finish.
void parallel_for(std::size_t jobs, const std::function<void(std::size_t)>& job);

}  // namespace reasoner
