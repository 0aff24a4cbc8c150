#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "reasoner/archive.hpp"
#include "reasoner/error.hpp"
#include "reasoner/posterior.hpp"
#include "reasoner/rng.hpp"

namespace reasoner {

/// Mean-field Gaussian q(xi) = N(mean, diag(exp(log_std))^2) plus optimizer state.
struct VariationalState {
  std::vector<double> mean;
  std::vector<double> log_std;
  std::size_t iteration = 0;
  // Adam moments over (mean, log_std) stacked.
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  // Line search: last accepted step lengths for the mean and log-std blocks.
  double last_step = 0.0;
  double last_scale_step = 0.0;

  static VariationalState initial(std::size_t dim, double init_log_std);
  std::size_t dim() const noexcept { return mean.size(); }
  std::vector<double> stddev() const;
};

/// KL(q || N(0, 1)), analytic.
double kl_to_prior(const VariationalState& state);

struct AnnealStage {
  double alpha = 1.0;
  std::size_t iterations = 0;
};

struct AnnealSchedule {
  std::vector<AnnealStage> stages;
  /// Permits decreasing alpha between stages.
  bool allow_decreasing = false;

  void validate() const;
  std::size_t total_iterations() const;
  double final_alpha() const { return stages.empty() ? 1.0 : stages.back().alpha; }

  static AnnealSchedule constant(double alpha, std::size_t iterations);
  /// alpha in {0.5, 1, 3, 10}, `per_stage` iterations each.
  static AnnealSchedule riddle_default(std::size_t per_stage = 500);
  /// "0.5:500,1:500,..." (alpha:iterations pairs).
  static AnnealSchedule parse(const std::string& text);
};

struct ElboEstimate {
  double value = 0.0;
  std::vector<double> grad_mean;
  std::vector<double> grad_log_std;
};

/// Antithetic reparametrized ELBO: every base draw zeta contributes the pair
/// mean +/- sigma * zeta. The prior KL enters analytically. Tempered terms are
/// scaled by `alpha_scale`. `zetas` holds n_pairs * dim values.
ElboEstimate elbo_with_samples(const LatentPosterior& target, const VariationalState& state,
                               std::span<const double> zetas, double alpha_scale, bool with_gradient = true);

ElboEstimate elbo_estimate(const LatentPosterior& target, const VariationalState& state, std::size_t n_pairs,
                           Rng& rng, double alpha_scale = 1.0);

struct TraceRecord {
  std::size_t iter = 0;
  double stage_alpha = 1.0;
  double elbo_estimate = 0.0;
  double grad_norm = 0.0;
  double step_size = 0.0;
  // Line search only: surrogate at the start of the iteration (same samples).
  double surrogate_before = 0.0;
  bool skipped = false;
};

std::string to_jsonl(std::span<const TraceRecord> trace);

struct ViConfig {
  std::size_t n_pairs = 5;
  std::uint64_t seed = 0;
  double init_log_std = -2.302585092994046;  // log(0.1)
  // Adam
  double eta = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double divergence_drop = 1e6;
  // Line search
  double armijo_c = 1e-4;
  double backtrack = 0.5;
  std::size_t max_backtracks = 30;
  double initial_step = 1.0;
  double max_step = 1e3;
  bool natural_gradient = false;
  /// Fraction of the final stage whose iterates are averaged into the
  /// returned state (0 keeps the last iterate).
  double tail_average = 0.0;
  /// Called after every `observe_every` iterations (and after the last one).
  std::size_t observe_every = 0;
  std::function<void(const VariationalState&, const TraceRecord&)> observer;
};

struct ViResult {
  VariationalState state;
  std::vector<TraceRecord> trace;
};

/// Raised when the ELBO collapses; carries the trace up to that point.
class ViAborted : public Error {
 public:
  ViAborted(const std::string& what, std::vector<TraceRecord> trace)
      : Error(Errc::divergence, what), trace_(std::move(trace)) {}
  const std::vector<TraceRecord>& trace() const noexcept { return trace_; }

 private:
  std::vector<TraceRecord> trace_;
};

/// Stochastic ascent with Adam moments and step eta * k^(-1/2 + 1e-16).
ViResult fit_adam(const LatentPosterior& target, const AnnealSchedule& schedule, const ViConfig& config);

/// Each iteration fixes a fresh antithetic sample set and ascends the
/// resulting surrogate along its gradient, one Armijo backtracking search for
/// the mean block and then one for the log-std block.
ViResult fit_linesearch(const LatentPosterior& target, const AnnealSchedule& schedule, const ViConfig& config);

/// n draws mean + sigma * zeta as a single-chain archive. With `antithetic`
/// the draws come in pairs mean +/- sigma * zeta (n must then be even).
SampleArchive sample_approximation(const VariationalState& state, std::size_t n, Rng& rng, bool antithetic = false);

}  // namespace reasoner
