#include "reasoner/hmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "reasoner/error.hpp"
#include "reasoner/rng.hpp"

namespace reasoner {

void HmcConfig::validate() const {
  if (leapfrog_steps < 1) throw Error(Errc::invalid_argument, "leapfrog_steps must be at least 1");
  if (!(target_acceptance > 0.0 && target_acceptance < 1.0))
    throw Error(Errc::invalid_argument, "target_acceptance must lie in (0, 1)");
  if (n_chains < 1) throw Error(Errc::invalid_argument, "n_chains must be at least 1");
  if (!(step_jitter >= 0.0 && step_jitter < 1.0)) throw Error(Errc::invalid_argument, "step_jitter must lie in [0, 1)");
  if (n_samples % n_chains != 0)
    throw Error(Errc::invalid_argument, "n_samples must be a multiple of n_chains");
}

namespace {

// Position plus cached log density and gradient.
struct Point {
  std::vector<double> x;
  std::vector<double> grad;
  double logp = 0.0;
};

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

Point evaluate(const LatentPosterior& target, std::vector<double> x) {
  Point p;
  p.grad.assign(x.size(), 0.0);
  p.x = std::move(x);
  p.logp = target.log_density(p.x, p.grad);
  return p;
}

double kinetic(std::span<const double> rho, std::span<const double> inv_mass) {
  double k = 0.0;
  for (std::size_t i = 0; i < rho.size(); ++i) k += rho[i] * rho[i] * inv_mass[i];
  return 0.5 * k;
}

// Integrates in place; returns false if a non-finite value appeared.
bool integrate(const LatentPosterior& target, Point& p, std::vector<double>& rho, double eps, std::size_t steps,
               std::span<const double> inv_mass) {
  const std::size_t n = p.x.size();
  if (eps == 0.0) return true;
  for (std::size_t s = 0; s < steps; ++s) {
    for (std::size_t i = 0; i < n; ++i) rho[i] += 0.5 * eps * p.grad[i];
    for (std::size_t i = 0; i < n; ++i) p.x[i] += eps * inv_mass[i] * rho[i];
    if (!all_finite(p.x)) return false;
    try {
      p.logp = target.log_density(p.x, p.grad);
    } catch (const Error& e) {
      if (e.code() == Errc::non_finite) return false;
      throw;
    }
    if (!std::isfinite(p.logp) || !all_finite(p.grad)) return false;
    for (std::size_t i = 0; i < n; ++i) rho[i] += 0.5 * eps * p.grad[i];
  }
  return all_finite(rho);
}

// Hoffman & Gelman dual averaging of log step size toward a target acceptance.
class DualAveraging {
 public:
  DualAveraging(double target, double initial_step) : target_(target) { restart(initial_step); }

  void restart(double step) {
    mu_ = std::log(10.0 * step);
    h_bar_ = 0.0;
    log_bar_ = 0.0;
    t_ = 0;
    step_ = step;
  }

  void update(double accept_prob) {
    ++t_;
    const double t = static_cast<double>(t_);
    const double eta = 1.0 / (t + kT0);
    h_bar_ = (1.0 - eta) * h_bar_ + eta * (target_ - accept_prob);
    const double log_step = mu_ - std::sqrt(t) / kGamma * h_bar_;
    const double w = std::pow(t, -kKappa);
    log_bar_ = w * log_step + (1.0 - w) * log_bar_;
    step_ = std::exp(log_step);
  }

  double step() const { return step_; }
  double final_step() const { return t_ ? std::exp(log_bar_) : step_; }

 private:
  static constexpr double kGamma = 0.05;
  static constexpr double kT0 = 10.0;
  static constexpr double kKappa = 0.75;
  double target_;
  double mu_ = 0.0, h_bar_ = 0.0, log_bar_ = 0.0, step_ = 1.0;
  std::size_t t_ = 0;
};

struct Window {
  std::size_t begin, end;  // warmup iterations [begin, end) collect variance
};

// 15% initial buffer, three slow windows in ratio 1:2:4, 10% terminal buffer.
std::vector<Window> mass_windows(std::size_t warmup) {
  if (warmup < 20) return {};
  const std::size_t init = warmup * 15 / 100;
  const std::size_t term = warmup / 10;
  const std::size_t slow = warmup - init - term;
  const std::size_t base = slow / 7;
  if (base < 2) return {};
  return {{init, init + base}, {init + base, init + 3 * base}, {init + 3 * base, warmup - term}};
}

double initial_step(const LatentPosterior& target, const Point& start, std::span<const double> inv_mass, Rng& rng) {
  const std::size_t n = start.x.size();
  std::vector<double> rho(n);
  fill_normal(rng, rho);
  for (std::size_t i = 0; i < n; ++i) rho[i] /= std::sqrt(inv_mass[i]);
  const double h0 = -start.logp + kinetic(rho, inv_mass);
  double eps = 1.0;
  auto accept_ratio = [&](double e) {
    Point p = start;
    std::vector<double> r = rho;
    if (!integrate(target, p, r, e, 1, inv_mass)) return 0.0;
    const double h1 = -p.logp + kinetic(r, inv_mass);
    return std::isfinite(h1) ? std::exp(std::min(0.0, h0 - h1)) : 0.0;
  };
  double a = accept_ratio(eps);
  const int direction = a > 0.5 ? 1 : -1;
  for (int k = 0; k < 50; ++k) {
    if (direction == 1 && !(a > 0.5)) break;
    if (direction == -1 && !(a < 0.5)) break;
    eps = direction == 1 ? eps * 2.0 : eps * 0.5;
    a = accept_ratio(eps);
  }
  return eps;
}

ChainSummary run_chain(const LatentPosterior& target, const HmcConfig& config, std::size_t chain,
                       SampleArchive& archive) {
  const std::size_t n = target.dim();
  const std::size_t draws = config.n_samples / config.n_chains;
  Rng rng(mix_seed(config.master_seed, chain));

  std::vector<double> x0(n);
  fill_normal(rng, x0);
  Point current = evaluate(target, std::move(x0));
  if (!std::isfinite(current.logp)) throw Error(Errc::non_finite, "log density is not finite at the initial prior draw");

  ChainSummary summary;
  summary.inv_mass.assign(n, 1.0);
  DualAveraging adapt(config.target_acceptance, initial_step(target, current, summary.inv_mass, rng));
  double step = adapt.step();

  const auto windows = mass_windows(config.warmup_iterations);
  std::size_t window = 0;
  std::vector<double> mean(n, 0.0), m2(n, 0.0);
  std::size_t count = 0;
  std::size_t divergent_after = 0;

  std::vector<double> rho(n);
  const std::size_t total = config.warmup_iterations + draws;
  for (std::size_t it = 0; it < total; ++it) {
    const bool warming = it < config.warmup_iterations;
    fill_normal(rng, rho);
    for (std::size_t i = 0; i < n; ++i) rho[i] /= std::sqrt(summary.inv_mass[i]);
    const double h0 = -current.logp + kinetic(rho, summary.inv_mass);

    Point proposal = current;
    const double jittered = step * (1.0 + config.step_jitter * (2.0 * uniform01(rng) - 1.0));
    const bool ok = integrate(target, proposal, rho, jittered, config.leapfrog_steps, summary.inv_mass);
    const double h1 = ok ? -proposal.logp + kinetic(rho, summary.inv_mass) : std::numeric_limits<double>::infinity();
    const bool divergent = !ok || !std::isfinite(h1) || h1 - h0 > 1000.0;
    const double accept_prob = divergent ? 0.0 : std::exp(std::min(0.0, h0 - h1));
    const bool accept = uniform01(rng) < accept_prob;
    if (accept) current = std::move(proposal);

    if (warming) {
      adapt.update(accept_prob);
      step = adapt.step();
      if (window < windows.size() && it >= windows[window].begin && it < windows[window].end) {
        ++count;
        for (std::size_t i = 0; i < n; ++i) {
          const double d = current.x[i] - mean[i];
          mean[i] += d / static_cast<double>(count);
          m2[i] += d * (current.x[i] - mean[i]);
        }
        if (it + 1 == windows[window].end) {
          const double c = static_cast<double>(count);
          for (std::size_t i = 0; i < n; ++i) {
            const double var = m2[i] / (c - 1.0);
            summary.inv_mass[i] = (c / (c + 5.0)) * var + 1e-3 * (5.0 / (c + 5.0));
          }
          std::fill(mean.begin(), mean.end(), 0.0);
          std::fill(m2.begin(), m2.end(), 0.0);
          count = 0;
          ++window;
          adapt.restart(initial_step(target, current, summary.inv_mass, rng));
          step = adapt.step();
        }
      }
      if (it + 1 == config.warmup_iterations) step = adapt.final_step();
      std::copy(current.x.begin(), current.x.end(), archive.warmup(chain, it).begin());
    } else {
      ++summary.proposed;
      if (accept) ++summary.accepted;
      if (divergent) ++divergent_after;
      std::copy(current.x.begin(), current.x.end(), archive.draw(chain, it - config.warmup_iterations).begin());
    }
  }
  summary.step_size = step;
  summary.divergent = divergent_after;
  if (draws > 0 && static_cast<double>(divergent_after) / static_cast<double>(draws) > config.max_divergence_rate) {
    std::ostringstream msg;
    msg << "chain " << chain << ": " << divergent_after << " of " << draws
        << " post-warmup transitions diverged (step size " << step << ")";
    throw Error(Errc::divergence, msg.str());
  }
  return summary;
}

}  // namespace

LeapfrogResult leapfrog(const LatentPosterior& target, std::span<const double> position,
                        std::span<const double> momentum, double step_size, std::size_t steps,
                        std::span<const double> inv_mass) {
  if (!(step_size >= 0.0)) throw Error(Errc::invalid_argument, "step size must be non-negative");
  if (position.size() != target.dim() || momentum.size() != target.dim() || inv_mass.size() != target.dim()) {
    throw Error(Errc::shape_mismatch, "leapfrog inputs do not match the target dimension");
  }
  Point p = evaluate(target, {position.begin(), position.end()});
  LeapfrogResult out;
  out.momentum.assign(momentum.begin(), momentum.end());
  out.finite = std::isfinite(p.logp) && integrate(target, p, out.momentum, step_size, steps, inv_mass);
  out.position = std::move(p.x);
  out.log_density = p.logp;
  return out;
}

double hamiltonian(const LatentPosterior& target, std::span<const double> position, std::span<const double> momentum,
                   std::span<const double> inv_mass) {
  return -target.log_density(position) + kinetic(momentum, inv_mass);
}

HmcResult sample_hmc(const LatentPosterior& target, const HmcConfig& config) {
  config.validate();
  const std::size_t draws = config.n_samples / config.n_chains;
  HmcResult result;
  result.archive = SampleArchive::create(config.n_chains, config.warmup_iterations, draws, target.dim());
  result.archive.master_seed = config.master_seed;
  result.archive.created_by = "reasoner hmc";
  result.chains.resize(config.n_chains);

  parallel_for(config.n_chains, [&](std::size_t c) { result.chains[c] = run_chain(target, config, c, result.archive); });

  for (const auto& c : result.chains) result.archive.acceptance_per_chain.push_back(c.acceptance_rate());
  return result;
}

}  // namespace reasoner
