#include "treg/consistency.hpp"
#include "treg/operators.hpp"
#include "treg/prior.hpp"
#include "treg/rng.hpp"
#include "treg/sampler.hpp"
#include "treg/validation.hpp"

#include <benchmark/benchmark.h>

using namespace treg;

namespace {

ConceptPrior bench_prior(int dim, int concepts, int components) {
  Rng rng(1);
  std::vector<Concept> cs;
  for (int k = 0; k < concepts; ++k) {
    Concept c{"c" + std::to_string(k), {}};
    for (int j = 0; j < components; ++j)
      c.components.push_back({1.0 / components, rng.normal_vector(dim), 0.05 + 0.1 * rng.uniform()});
    cs.push_back(std::move(c));
  }
  return ConceptPrior(dim, std::move(cs));
}

}  // namespace

static void BM_PosteriorMean(benchmark::State& state) {
  const int dim = static_cast<int>(state.range(0));
  const auto prior = bench_prior(dim, 2, 3);
  const Mixture mix = Mixture::of_null(prior, prior.uniform_weights());
  Rng rng(2);
  const Vector z = rng.normal_vector(dim);
  for (auto _ : state) benchmark::DoNotOptimize(posterior_mean(mix, z, 0.4));
}
BENCHMARK(BM_PosteriorMean)->Arg(2)->Arg(256)->Arg(4096);

static void BM_PosteriorVjp(benchmark::State& state) {
  const int dim = static_cast<int>(state.range(0));
  const auto prior = bench_prior(dim, 2, 3);
  const Mixture mix = Mixture::of_null(prior, prior.uniform_weights());
  Rng rng(3);
  const Vector z = rng.normal_vector(dim);
  const Vector v = rng.normal_vector(dim);
  for (auto _ : state) benchmark::DoNotOptimize(posterior_mean_vjp(mix, z, 0.4, v));
}
BENCHMARK(BM_PosteriorVjp)->Arg(256)->Arg(4096);

static void BM_BlurApply(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto op = ForwardOperator::gaussian_blur(ImageShape{n, n}, 7, 1.5);
  Rng rng(4);
  const Vector x = rng.normal_vector(n * n);
  for (auto _ : state) benchmark::DoNotOptimize(op.apply(x));
}
BENCHMARK(BM_BlurApply)->Arg(16)->Arg(64)->Arg(256);

static void BM_PhaseGradient(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto op = ForwardOperator::phase_retrieval(ImageShape{n, n}, n / 2);
  Rng rng(5);
  const Vector x = rng.normal_vector(n * n);
  const Vector y = op.apply(rng.normal_vector(n * n));
  for (auto _ : state) benchmark::DoNotOptimize(op.residual_gradient(x, y));
}
BENCHMARK(BM_PhaseGradient)->Arg(16)->Arg(64);

static void BM_CgSolve(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto op = ForwardOperator::gaussian_blur(ImageShape{n, n}, 7, 1.5);
  Rng rng(6);
  const Vector y = rng.normal_vector(n * n);
  const Vector anchor = rng.normal_vector(n * n);
  for (auto _ : state) benchmark::DoNotOptimize(cg_solve(op, y, anchor, CGParams{}).x);
}
BENCHMARK(BM_CgSolve)->Arg(16)->Arg(64);

static void BM_DenseProximalSolve(benchmark::State& state) {
  const auto op = ForwardOperator::gaussian_blur(ImageShape{8, 8}, 5, 1.0);
  Rng rng(7);
  const Vector y = rng.normal_vector(64);
  const Vector anchor = rng.normal_vector(64);
  for (auto _ : state) benchmark::DoNotOptimize(validation::dense_proximal_solve(op, y, anchor, 1e-4));
}
BENCHMARK(BM_DenseProximalSolve);

static void BM_SamplerRun(benchmark::State& state) {
  const int side = 16;
  const int nfe = static_cast<int>(state.range(0));
  const auto sched = make_schedule(1000, 0.00085, 0.012);
  const auto prior = bench_prior(side * side, 2, 3);
  const auto codec = LatentCodec::random(side * side, side * side, 8);
  const auto op = ForwardOperator::gaussian_blur(ImageShape{side, side}, 7, 1.5);
  const auto meas = simulate_measurement(op, codec.decode(prior.concept_mean(0)), 0.1, 9);
  const SamplerInputs in{sched, prior, codec, op, meas, nullptr};
  SolverConfig cfg;
  cfg.nfe = nfe;
  for (auto _ : state) benchmark::DoNotOptimize(run(cfg, in, std::string("c0")).x_final);
  state.SetItemsProcessed(state.iterations() * nfe);
}
BENCHMARK(BM_SamplerRun)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
