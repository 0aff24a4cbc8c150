#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <atomic>
#include <cstdlib>
#include <random>

#include <reasoner/convergence.hpp>
#include <reasoner/error.hpp>
#include <reasoner/hmc.hpp>

#include "support.hpp"

using namespace reasoner;

namespace {

testing_support::LinearGaussian make_target(std::uint64_t seed, std::size_t rows, std::size_t cols) {
  std::mt19937_64 rng(seed);
  auto a = testing_support::normal_vector(rng, rows * cols);
  auto y = testing_support::normal_vector(rng, rows);
  return testing_support::LinearGaussian(rows, cols, a, y, std::vector<double>(rows, 0.5));
}

struct Gaussian {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

Gaussian exact_posterior(const testing_support::LinearGaussian& t) {
  const std::size_t rows = t.rows(), cols = t.dim();
  Eigen::MatrixXd A(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) A(r, c) = t.a()[r * cols + c];
  Eigen::VectorXd dinv(rows), y(rows);
  for (std::size_t r = 0; r < rows; ++r) dinv(r) = 1.0 / t.noise()[r], y(r) = t.y()[r];
  const Eigen::MatrixXd P = Eigen::MatrixXd::Identity(cols, cols) + A.transpose() * dinv.asDiagonal() * A;
  const Eigen::MatrixXd cov = P.inverse();
  return {cov * A.transpose() * dinv.asDiagonal() * y, cov};
}

// Finite at the first evaluation (the initial point) and NaN afterwards.
class Collapsing final : public LatentPosterior {
 public:
  std::size_t dim() const override { return 2; }
  double log_likelihood(std::span<const double>, double, std::span<double> grad) const override {
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
    return calls_++ == 0 ? 0.0 : std::nan("");
  }

 private:
  mutable std::atomic<int> calls_{0};
};

}  // namespace

TEST(Hmc, LeapfrogIsReversible) {
  const auto target = make_target(1, 6, 4);
  std::mt19937_64 rng(2);
  const std::vector<double> inv_mass = {1.0, 0.5, 2.0, 1.0};
  for (int trial = 0; trial < 10; ++trial) {
    const auto x = testing_support::normal_vector(rng, 4);
    const auto p = testing_support::normal_vector(rng, 4);
    const auto fwd = leapfrog(target, x, p, 0.1, 10, inv_mass);
    std::vector<double> flipped = fwd.momentum;
    for (double& v : flipped) v = -v;
    const auto back = leapfrog(target, fwd.position, flipped, 0.1, 10, inv_mass);
    for (std::size_t i = 0; i < 4; ++i) {
      EXPECT_NEAR(back.position[i], x[i], 1e-10);
      EXPECT_NEAR(-back.momentum[i], p[i], 1e-10);
    }
  }
}

TEST(Hmc, LeapfrogNearlyConservesEnergy) {
  const auto target = make_target(3, 3, 4);
  std::mt19937_64 rng(4);
  const std::vector<double> inv_mass(4, 1.0);
  // Posterior precisions stay below 1 / 0.1^2, so the integrator is stable.
  for (int trial = 0; trial < 10; ++trial) {
    const auto x = testing_support::normal_vector(rng, 4, 0.3);
    const auto p = testing_support::normal_vector(rng, 4);
    const auto out = leapfrog(target, x, p, 0.01, 10, inv_mass);
    const double dh = hamiltonian(target, out.position, out.momentum, inv_mass) - hamiltonian(target, x, p, inv_mass);
    EXPECT_LT(std::abs(dh), 1e-3);
  }
}

// On a standard normal, leapfrog exactly conserves
// p'p / 2 + (1 - eps^2 / 4) x'x / 2, so H changes by eps^2 / 8 (|x_L|^2 - |x_0|^2).
TEST(Hmc, LeapfrogEnergyErrorOnStandardNormal) {
  const testing_support::LinearGaussian normal(0, 5, {}, {}, {});
  std::mt19937_64 rng(5);
  const std::vector<double> inv_mass(5, 1.0);
  for (double eps : {0.05, 0.1, 0.3}) {
    for (int trial = 0; trial < 10; ++trial) {
      const auto x = testing_support::normal_vector(rng, 5);
      const auto p = testing_support::normal_vector(rng, 5);
      const auto out = leapfrog(normal, x, p, eps, 10, inv_mass);
      double x0 = 0.0, xl = 0.0;
      for (std::size_t i = 0; i < 5; ++i) x0 += x[i] * x[i], xl += out.position[i] * out.position[i];
      const double dh = hamiltonian(normal, out.position, out.momentum, inv_mass) - hamiltonian(normal, x, p, inv_mass);
      EXPECT_NEAR(dh, eps * eps / 8.0 * (xl - x0), 1e-12);
    }
  }
  const testing_support::LinearGaussian normal1(0, 1, {}, {}, {});
  const std::vector<double> q0 = {0.0}, p0 = {1.0}, unit = {1.0};
  const auto out = leapfrog(normal1, q0, p0, 0.1, 10, unit);
  EXPECT_LT(std::abs(hamiltonian(normal1, out.position, out.momentum, unit) - hamiltonian(normal1, q0, p0, unit)), 1e-3);
}

TEST(Hmc, ZeroStepLeavesStateUnchanged) {
  const auto target = make_target(6, 4, 3);
  const std::vector<double> x = {0.1, -0.4, 2.0}, p = {1.0, 0.0, -1.0}, m(3, 1.0);
  const auto out = leapfrog(target, x, p, 0.0, 7, m);
  EXPECT_EQ(out.position, x);
  EXPECT_EQ(out.momentum, p);
}

TEST(Hmc, LeapfrogValidatesInputs) {
  const auto target = make_target(6, 4, 3);
  const std::vector<double> x(3, 0.0), p(2, 0.0), m(3, 1.0);
  EXPECT_THROW(leapfrog(target, x, p, 0.1, 1, m), Error);
  EXPECT_THROW(leapfrog(target, x, x, -0.1, 1, m), Error);
}

TEST(Hmc, ConfigValidation) {
  const auto target = make_target(1, 2, 2);
  auto expect_invalid = [&](HmcConfig c) {
    try {
      sample_hmc(target, c);
      ADD_FAILURE();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::invalid_argument);
    }
  };
  HmcConfig c;
  c.leapfrog_steps = 0;
  expect_invalid(c);
  c = {};
  c.target_acceptance = 1.0;
  expect_invalid(c);
  c = {};
  c.n_chains = 3;
  c.n_samples = 10;
  expect_invalid(c);
  c = {};
  c.n_chains = 0;
  expect_invalid(c);
  c = {};
  c.step_jitter = 1.0;
  expect_invalid(c);
}

TEST(Hmc, DeterministicAndThreadInvariant) {
  const auto target = make_target(7, 5, 3);
  HmcConfig c;
  c.n_chains = 4;
  c.n_samples = 400;
  c.warmup_iterations = 200;
  c.master_seed = 42;
  const auto first = sample_hmc(target, c);
  const auto second = sample_hmc(target, c);
  EXPECT_EQ(first.archive.values, second.archive.values);
  ::setenv("REASONER_THREADS", "1", 1);
  const auto serial = sample_hmc(target, c);
  ::unsetenv("REASONER_THREADS");
  EXPECT_EQ(first.archive.values, serial.archive.values);
  c.master_seed = 43;
  EXPECT_NE(sample_hmc(target, c).archive.values, first.archive.values);
}

TEST(Hmc, ArchiveLayoutAndSummaries) {
  const auto target = make_target(8, 5, 3);
  HmcConfig c;
  c.n_chains = 2;
  c.n_samples = 200;
  c.warmup_iterations = 100;
  const auto r = sample_hmc(target, c);
  EXPECT_EQ(r.archive.n_chains, 2u);
  EXPECT_EQ(r.archive.n_warmup, 100u);
  EXPECT_EQ(r.archive.n_draws, 100u);
  EXPECT_EQ(r.archive.values.size(), 2u * 200u * 3u);
  ASSERT_EQ(r.chains.size(), 2u);
  for (const auto& s : r.chains) {
    EXPECT_GT(s.step_size, 0.0);
    EXPECT_EQ(s.inv_mass.size(), 3u);
    EXPECT_EQ(s.proposed, 100u);
    EXPECT_GT(s.acceptance_rate(), 0.3);
  }
}

TEST(Hmc, DivergentSamplingAborts) {
  const Collapsing target;
  HmcConfig c;
  c.n_chains = 1;
  c.n_samples = 50;
  c.warmup_iterations = 10;
  try {
    sample_hmc(target, c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::divergence);
  }
}

TEST(Hmc, RecoversLinearGaussianMoments) {
  const auto target = make_target(9, 4, 3);
  const Gaussian exact = exact_posterior(target);
  HmcConfig c;
  c.n_chains = 4;
  c.n_samples = 4000;
  c.warmup_iterations = 500;
  c.master_seed = 5;
  const auto r = sample_hmc(target, c);
  const auto ess = effective_sample_size(r.archive);
  const auto rhat = gelman_rubin(r.archive);
  const std::size_t n = r.archive.total_draws();
  for (std::size_t d = 0; d < 3; ++d) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += r.archive.draw(i)[d];
    mean /= static_cast<double>(n);
    const double mcse = std::sqrt(exact.cov(d, d) / ess.per_coordinate[d]);
    EXPECT_LT(std::abs(mean - exact.mean(d)), 4.0 * mcse) << "coordinate " << d;
    EXPECT_LT(rhat.per_coordinate[d], 1.01);
  }
}
