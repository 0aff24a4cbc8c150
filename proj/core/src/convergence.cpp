#include "reasoner/convergence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "reasoner/error.hpp"

namespace reasoner {

namespace {

void check(const SampleArchive& a) {
  if (a.n_chains < 2 || a.n_draws < 10) {
    throw Error(Errc::invalid_argument, "convergence diagnostics need at least 2 chains of 10 draws, got " +
                                            std::to_string(a.n_chains) + " x " + std::to_string(a.n_draws));
  }
}

std::vector<double> coordinate(const SampleArchive& a, std::size_t chain, std::size_t coord, std::size_t begin,
                               std::size_t end) {
  std::vector<double> out;
  out.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) out.push_back(a.draw(chain, i)[coord]);
  return out;
}

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

double finite_mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

CoordinateReport gelman_rubin(const SampleArchive& a) {
  check(a);
  const std::size_t half = a.n_draws / 2;
  const double n = static_cast<double>(half);
  CoordinateReport report;
  for (std::size_t d = 0; d < a.dim; ++d) {
    std::vector<double> means, vars;
    for (std::size_t c = 0; c < a.n_chains; ++c) {
      for (std::size_t begin : {std::size_t{0}, a.n_draws - half}) {
        auto x = coordinate(a, c, d, begin, begin + half);
        const double m = mean_of(x);
        double ss = 0.0;
        for (double v : x) ss += (v - m) * (v - m);
        means.push_back(m);
        vars.push_back(ss / (n - 1.0));
      }
    }
    const double w = mean_of(vars);
    const double grand = mean_of(means);
    double b = 0.0;
    for (double m : means) b += (m - grand) * (m - grand);
    b *= n / static_cast<double>(means.size() - 1);
    if (!(w > 0.0)) {
      report.per_coordinate.push_back(std::numeric_limits<double>::infinity());
      continue;
    }
    const double var_plus = (n - 1.0) / n * w + b / n;
    report.per_coordinate.push_back(std::sqrt(var_plus / w));
  }
  report.mean = finite_mean(report.per_coordinate);
  return report;
}

double chain_ess(const std::vector<double>& x) {
  const std::size_t n = x.size();
  if (n < 2) return 0.0;
  const double m = mean_of(x);
  std::vector<double> centered(n);
  for (std::size_t i = 0; i < n; ++i) centered[i] = x[i] - m;
  auto autocov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += centered[i] * centered[i + lag];
    return s / static_cast<double>(n);
  };
  const double c0 = autocov(0);
  if (!(c0 > 0.0)) return 0.0;

  double tau = -1.0;
  double previous = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    double pair = (autocov(2 * k) + autocov(2 * k + 1)) / c0;
    if (!(pair > 0.0)) break;
    pair = std::min(pair, previous);
    previous = pair;
    tau += 2.0 * pair;
  }
  // Strongly antithetic chains can drive tau toward zero; bound ESS at n log10(n).
  tau = std::max(tau, 1.0 / std::log10(static_cast<double>(n)));
  return static_cast<double>(n) / tau;
}

CoordinateReport effective_sample_size(const SampleArchive& a) {
  check(a);
  CoordinateReport report;
  for (std::size_t d = 0; d < a.dim; ++d) {
    double total = 0.0;
    for (std::size_t c = 0; c < a.n_chains; ++c) total += chain_ess(coordinate(a, c, d, 0, a.n_draws));
    report.per_coordinate.push_back(total);
  }
  report.mean = finite_mean(report.per_coordinate);
  return report;
}

}  // namespace reasoner
