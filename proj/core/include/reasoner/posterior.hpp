#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>

namespace reasoner {

/// Unnormalized posterior over a stacked latent vector with a standard-normal
/// prior. Implementations supply the likelihood part; tempered terms
/// (categorical and logic constraints) are multiplied by `alpha_scale`.
class LatentPosterior {
 public:
  virtual ~LatentPosterior() = default;

  virtual std::size_t dim() const = 0;

  /// Sum of likelihood terms at `xi`. Writes the gradient into `grad` when it
  /// is non-empty (it must then have `dim()` entries).
  virtual double log_likelihood(std::span<const double> xi, double alpha_scale, std::span<double> grad) const = 0;

  /// log N(xi | 0, 1) + log-likelihood; gradient includes the prior's -xi.
  double log_density(std::span<const double> xi, std::span<double> grad = {}, double alpha_scale = 1.0) const {
    double value = log_likelihood(xi, alpha_scale, grad);
    double sq = 0.0;
    for (std::size_t i = 0; i < xi.size(); ++i) {
      sq += xi[i] * xi[i];
      if (!grad.empty()) grad[i] -= xi[i];
    }
    return value - 0.5 * sq - 0.5 * static_cast<double>(xi.size()) * std::log(2.0 * std::numbers::pi);
  }
};

}  // namespace reasoner
