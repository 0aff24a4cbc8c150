#include "reasoner/vi.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

namespace reasoner {

VariationalState VariationalState::initial(std::size_t dim, double init_log_std) {
  VariationalState s;
  s.mean.assign(dim, 0.0);
  s.log_std.assign(dim, init_log_std);
  s.first_moment.assign(2 * dim, 0.0);
  s.second_moment.assign(2 * dim, 0.0);
  return s;
}

std::vector<double> VariationalState::stddev() const {
  std::vector<double> out(log_std.size());
  std::transform(log_std.begin(), log_std.end(), out.begin(), [](double s) { return std::exp(s); });
  return out;
}

double kl_to_prior(const VariationalState& state) {
  double kl = 0.0;
  for (std::size_t i = 0; i < state.dim(); ++i) {
    const double var = std::exp(2.0 * state.log_std[i]);
    kl += var + state.mean[i] * state.mean[i] - 1.0 - 2.0 * state.log_std[i];
  }
  return 0.5 * kl;
}

// ---------------------------------------------------------------------------

void AnnealSchedule::validate() const {
  if (stages.empty()) throw Error(Errc::invalid_argument, "annealing schedule has no stages");
  for (std::size_t i = 0; i < stages.size(); ++i) {
    if (!(stages[i].alpha > 0.0) || !std::isfinite(stages[i].alpha)) {
      throw Error(Errc::invalid_argument, "stage " + std::to_string(i) + " alpha must be positive");
    }
    if (stages[i].iterations == 0) throw Error(Errc::invalid_argument, "stage " + std::to_string(i) + " has no iterations");
    if (i > 0 && !allow_decreasing && stages[i].alpha < stages[i - 1].alpha) {
      throw Error(Errc::invalid_argument, "stage " + std::to_string(i) + " decreases alpha");
    }
  }
}

std::size_t AnnealSchedule::total_iterations() const {
  std::size_t n = 0;
  for (const auto& s : stages) n += s.iterations;
  return n;
}

AnnealSchedule AnnealSchedule::constant(double alpha, std::size_t iterations) {
  return AnnealSchedule{{{alpha, iterations}}, false};
}

AnnealSchedule AnnealSchedule::riddle_default(std::size_t per_stage) {
  return AnnealSchedule{{{0.5, per_stage}, {1.0, per_stage}, {3.0, per_stage}, {10.0, per_stage}}, false};
}

AnnealSchedule AnnealSchedule::parse(const std::string& text) {
  AnnealSchedule s;
  std::stringstream in(text);
  std::string item;
  auto bad = [](const std::string& stage) {
    return Error(Errc::invalid_argument, "schedule stage '" + stage + "' is not alpha:iterations");
  };
  if (!text.empty() && text.back() == ',') throw bad("");
  while (std::getline(in, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw bad(item);
    const std::string a = item.substr(0, colon), n = item.substr(colon + 1);
    double alpha = 0.0;
    long long iters = 0;
    try {
      std::size_t used_a = 0, used_n = 0;
      alpha = std::stod(a, &used_a);
      iters = std::stoll(n, &used_n);
      if (used_a != a.size() || used_n != n.size()) throw bad(item);
    } catch (const std::logic_error&) {
      throw bad(item);
    }
    if (iters <= 0) throw Error(Errc::invalid_argument, "schedule stage '" + item + "' needs positive iterations");
    s.stages.push_back({alpha, static_cast<std::size_t>(iters)});
  }
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------

ElboEstimate elbo_with_samples(const LatentPosterior& target, const VariationalState& state,
                               std::span<const double> zetas, double alpha_scale, bool with_gradient) {
  const std::size_t n = state.dim();
  if (n != target.dim()) throw Error(Errc::shape_mismatch, "variational state does not match the target dimension");
  if (zetas.empty() || zetas.size() % n != 0) throw Error(Errc::invalid_argument, "sample buffer must hold whole draws");
  const std::size_t pairs = zetas.size() / n;
  const double weight = 1.0 / static_cast<double>(2 * pairs);
  const auto sigma = state.stddev();

  ElboEstimate out;
  if (with_gradient) {
    out.grad_mean.assign(n, 0.0);
    out.grad_log_std.assign(n, 0.0);
  }
  std::vector<double> xi(n), g(with_gradient ? n : 0);
  double expected = 0.0;
  for (std::size_t p = 0; p < pairs; ++p) {
    auto zeta = zetas.subspan(p * n, n);
    for (double sign : {1.0, -1.0}) {
      for (std::size_t i = 0; i < n; ++i) xi[i] = state.mean[i] + sign * sigma[i] * zeta[i];
      expected += weight * target.log_likelihood(xi, alpha_scale, g);
      if (with_gradient) {
        for (std::size_t i = 0; i < n; ++i) {
          out.grad_mean[i] += weight * g[i];
          out.grad_log_std[i] += weight * g[i] * sign * sigma[i] * zeta[i];
        }
      }
    }
  }
  out.value = expected - kl_to_prior(state);
  if (with_gradient) {
    for (std::size_t i = 0; i < n; ++i) {
      out.grad_mean[i] -= state.mean[i];
      out.grad_log_std[i] -= sigma[i] * sigma[i] - 1.0;
    }
  }
  return out;
}

ElboEstimate elbo_estimate(const LatentPosterior& target, const VariationalState& state, std::size_t n_pairs,
                           Rng& rng, double alpha_scale) {
  if (n_pairs == 0) throw Error(Errc::invalid_argument, "n_pairs must be at least 1");
  std::vector<double> zetas(n_pairs * state.dim());
  fill_normal(rng, zetas);
  return elbo_with_samples(target, state, zetas, alpha_scale);
}

std::string to_jsonl(std::span<const TraceRecord> trace) {
  std::string out;
  for (const auto& r : trace) {
    nlohmann::ordered_json j{{"iter", r.iter},
                             {"stage_alpha", r.stage_alpha},
                             {"elbo_estimate", r.elbo_estimate},
                             {"grad_norm", r.grad_norm},
                             {"step_size", r.step_size}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

double norm(const ElboEstimate& e) {
  double s = 0.0;
  for (double g : e.grad_mean) s += g * g;
  for (double g : e.grad_log_std) s += g * g;
  return std::sqrt(s);
}

// Drives the stage loop shared by both optimizers. `step` performs one
// iteration and returns its trace record.
template <class Step>
ViResult run_schedule(const LatentPosterior& target, const AnnealSchedule& schedule, const ViConfig& config, Step step) {
  schedule.validate();
  if (config.n_pairs == 0) throw Error(Errc::invalid_argument, "n_pairs must be at least 1");
  ViResult result;
  result.state = VariationalState::initial(target.dim(), config.init_log_std);
  Rng rng(mix_seed(config.seed, 0));

  const std::size_t total = schedule.total_iterations();
  const std::size_t final_len = schedule.stages.back().iterations;
  const auto tail = static_cast<std::size_t>(std::ceil(std::clamp(config.tail_average, 0.0, 1.0) * static_cast<double>(final_len)));
  std::vector<double> avg_mean(target.dim(), 0.0), avg_log_std(target.dim(), 0.0);
  std::size_t averaged = 0;

  for (const AnnealStage& stage : schedule.stages) {
    for (std::size_t i = 0; i < stage.iterations; ++i) {
      VariationalState& s = result.state;
      ++s.iteration;
      TraceRecord rec = step(s, stage.alpha, rng, result.trace);
      rec.iter = s.iteration;
      rec.stage_alpha = stage.alpha;
      result.trace.push_back(rec);
      if (tail > 0 && s.iteration > total - tail) {
        for (std::size_t d = 0; d < s.dim(); ++d) {
          avg_mean[d] += s.mean[d];
          avg_log_std[d] += s.log_std[d];
        }
        ++averaged;
      }
      if (config.observer && config.observe_every > 0 &&
          (s.iteration % config.observe_every == 0 || s.iteration == total)) {
        config.observer(s, rec);
      }
    }
  }
  if (averaged > 0) {
    for (std::size_t d = 0; d < target.dim(); ++d) {
      result.state.mean[d] = avg_mean[d] / static_cast<double>(averaged);
      result.state.log_std[d] = avg_log_std[d] / static_cast<double>(averaged);
    }
  }
  return result;
}

}  // namespace

ViResult fit_adam(const LatentPosterior& target, const AnnealSchedule& schedule, const ViConfig& config) {
  return run_schedule(target, schedule, config,
                      [&](VariationalState& s, double alpha, Rng& rng, const std::vector<TraceRecord>& trace) {
                        const std::size_t n = s.dim();
                        ElboEstimate est = elbo_estimate(target, s, config.n_pairs, rng, alpha);
                        if (!std::isfinite(est.value)) {
                          throw ViAborted("ELBO estimate became non-finite at iteration " + std::to_string(s.iteration), trace);
                        }
                        if (!trace.empty() && est.value < trace.back().elbo_estimate - config.divergence_drop) {
                          throw ViAborted("ELBO dropped by more than " + std::to_string(config.divergence_drop) +
                                              " at iteration " + std::to_string(s.iteration),
                                          trace);
                        }
                        const double k = static_cast<double>(s.iteration);
                        const double step = config.eta * std::pow(k, -0.5 + 1e-16);
                        const double c1 = 1.0 - std::pow(config.beta1, k);
                        const double c2 = 1.0 - std::pow(config.beta2, k);
                        for (std::size_t j = 0; j < 2 * n; ++j) {
                          const double g = j < n ? est.grad_mean[j] : est.grad_log_std[j - n];
                          double& m = s.first_moment[j];
                          double& v = s.second_moment[j];
                          m = config.beta1 * m + (1.0 - config.beta1) * g;
                          v = config.beta2 * v + (1.0 - config.beta2) * g * g;
                          const double delta = step * (m / c1) / (std::sqrt(v / c2) + config.adam_epsilon);
                          if (j < n) {
                            s.mean[j] += delta;
                          } else {
                            s.log_std[j - n] += delta;
                          }
                        }
                        TraceRecord rec;
                        rec.elbo_estimate = est.value;
                        rec.grad_norm = norm(est);
                        rec.step_size = step;
                        return rec;
                      });
}

ViResult fit_linesearch(const LatentPosterior& target, const AnnealSchedule& schedule, const ViConfig& config) {
  // Backtracks along one parameter block of the fixed-sample surrogate; on
  // success updates the block, `last` and `value` and returns the step.
  auto search = [&](VariationalState& s, std::vector<double>& block, const std::vector<double>& grad, double& last,
                    std::span<const double> zetas, double alpha, double& value) -> double {
    double slope = 0.0;
    for (double g : grad) slope += g * g;
    if (!(slope > 0.0) || !std::isfinite(slope)) return 0.0;
    const std::vector<double> start = block;
    double t = last > 0.0 ? std::min(2.0 * last, config.max_step) : config.initial_step;
    for (std::size_t b = 0; b <= config.max_backtracks; ++b, t *= config.backtrack) {
      for (std::size_t i = 0; i < block.size(); ++i) block[i] = start[i] + t * grad[i];
      double trial = 0.0;
      try {
        trial = elbo_with_samples(target, s, zetas, alpha, false).value;
      } catch (const Error& e) {
        if (e.code() != Errc::non_finite) throw;
        continue;
      }
      if (std::isfinite(trial) && trial >= value + config.armijo_c * t * slope) {
        last = t;
        value = trial;
        return t;
      }
    }
    block = start;
    return 0.0;
  };

  return run_schedule(
      target, schedule, config, [&](VariationalState& s, double alpha, Rng& rng, const std::vector<TraceRecord>&) {
        std::vector<double> zetas(config.n_pairs * s.dim());
        fill_normal(rng, zetas);
        const ElboEstimate est = elbo_with_samples(target, s, zetas, alpha);
        TraceRecord rec;
        rec.surrogate_before = est.value;
        rec.elbo_estimate = est.value;
        rec.grad_norm = norm(est);
        rec.skipped = true;
        if (!std::isfinite(est.value) || !std::isfinite(rec.grad_norm)) return rec;

        double value = est.value;
        rec.step_size = search(s, s.mean, est.grad_mean, s.last_step, zetas, alpha, value);
        // The scale gradient is taken again at the updated mean.
        const ElboEstimate at_mean = rec.step_size > 0.0 ? elbo_with_samples(target, s, zetas, alpha) : est;
        const double scale_step = search(s, s.log_std, at_mean.grad_log_std, s.last_scale_step, zetas, alpha, value);
        rec.elbo_estimate = value;
        rec.skipped = rec.step_size == 0.0 && scale_step == 0.0;
        return rec;
      });
}

SampleArchive sample_approximation(const VariationalState& state, std::size_t n, Rng& rng, bool antithetic) {
  if (antithetic && n % 2 != 0) throw Error(Errc::invalid_argument, "antithetic sampling needs an even draw count");
  SampleArchive archive = SampleArchive::create(1, 0, n, state.dim());
  archive.created_by = "reasoner mean-field";
  const auto sigma = state.stddev();
  std::vector<double> zeta(state.dim());
  for (std::size_t k = 0; k < n; ++k) {
    double sign = 1.0;
    if (!antithetic || k % 2 == 0) {
      fill_normal(rng, zeta);
    } else {
      sign = -1.0;
    }
    auto row = archive.draw(0, k);
    for (std::size_t i = 0; i < state.dim(); ++i) row[i] = state.mean[i] + sign * sigma[i] * zeta[i];
  }
  return archive;
}

}  // namespace reasoner
