#include <benchmark/benchmark.h>

#include <random>

#include <reasoner/convergence.hpp>
#include <reasoner/diagnostics.hpp>
#include <reasoner/hmc.hpp>
#include <reasoner/logic.hpp>
#include <reasoner/model.hpp>
#include <reasoner/vi.hpp>

using namespace reasoner;

namespace {

const ModelGraph& riddle() {
  static const ModelGraph g = compile_file(std::filesystem::path(REASONER_SOURCE_DIR) / "data/specs/riddle_synthetic.json");
  return g;
}

std::vector<double> normals(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  std::vector<double> v(n);
  fill_normal(rng, v);
  return v;
}

void BM_LogDensity(benchmark::State& state) {
  const auto& g = riddle();
  const Tensor x = Tensor::vector(normals(1, g.dim()));
  for (auto _ : state) benchmark::DoNotOptimize(g.log_density(x));
}
BENCHMARK(BM_LogDensity);

void BM_GradLogDensity(benchmark::State& state) {
  const auto& g = riddle();
  const Tensor x = Tensor::vector(normals(1, g.dim()));
  for (auto _ : state) benchmark::DoNotOptimize(g.grad_log_density(x));
}
BENCHMARK(BM_GradLogDensity);

void BM_Leapfrog(benchmark::State& state) {
  const auto& g = riddle();
  const auto x = normals(2, g.dim()), p = normals(3, g.dim());
  const std::vector<double> inv_mass(g.dim(), 1.0);
  const auto steps = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(leapfrog(g, x, p, 0.05, steps, inv_mass));
}
BENCHMARK(BM_Leapfrog)->Arg(10)->Arg(50);

void BM_ElboGradient(benchmark::State& state) {
  const auto& g = riddle();
  const auto pairs = static_cast<std::size_t>(state.range(0));
  const VariationalState q = VariationalState::initial(g.dim(), -1.0);
  const auto zetas = normals(4, pairs * g.dim());
  for (auto _ : state) benchmark::DoNotOptimize(elbo_with_samples(g, q, zetas, 1.0));
}
BENCHMARK(BM_ElboGradient)->Arg(5)->Arg(50);

void BM_LogicContraction(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const LogicTensor sum = LogicTensor::from_predicate({n, n, 2 * n}, [](std::span<const std::size_t> t) {
    return t[0] + t[1] == t[2];
  });
  std::vector<Tensor> probs;
  for (std::size_t k : {n, n, 2 * n}) probs.push_back(Tensor::filled({k}, 1.0 / static_cast<double>(k)));
  for (auto _ : state) benchmark::DoNotOptimize(contract_logic(sum, probs));
}
BENCHMARK(BM_LogicContraction)->Arg(10)->Arg(30);

void BM_FrechetDistance(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  const auto a = ensemble_stats(normals(5, 4 * dim * dim), dim);
  const auto b = ensemble_stats(normals(6, 4 * dim * dim), dim);
  for (auto _ : state) benchmark::DoNotOptimize(frechet_distance(a, b));
}
BENCHMARK(BM_FrechetDistance)->Arg(16)->Arg(64);

void BM_EffectiveSampleSize(benchmark::State& state) {
  const auto draws = normals(7, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(chain_ess(draws));
}
BENCHMARK(BM_EffectiveSampleSize)->Arg(1000)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
