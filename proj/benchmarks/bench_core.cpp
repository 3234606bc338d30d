#include <benchmark/benchmark.h>

#include <memory>

#include "qparisi/interpolation.hpp"
#include "qparisi/quantum.hpp"
#include "qparisi/rsb.hpp"
#include "qparisi/trotter.hpp"

using namespace qparisi;

static void BM_GaussHermite(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(gauss_hermite(static_cast<int>(state.range(0))));
}
BENCHMARK(BM_GaussHermite)->Arg(24)->Arg(64);

static void BM_SpectralLogPartition(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const ModelParams p{1.0, 0.5, 0.1, n};
  const auto g = DisorderSample::draw(2, n, RngStream(1));
  for (auto _ : state) {
    const auto spec = spectral_decompose(build_sk_hamiltonian(p, g));
    benchmark::DoNotOptimize(log_partition(spec, p.beta));
  }
}
BENCHMARK(BM_SpectralLogPartition)->Arg(6)->Arg(8)->Unit(benchmark::kMillisecond);

static void BM_TrotterPathSum(benchmark::State& state) {
  const int n = 3;
  const int m = static_cast<int>(state.range(0));
  const ModelParams p{1.0, 0.5, 0.1, n};
  const auto g = DisorderSample::draw(2, n, RngStream(2));
  for (auto _ : state) benchmark::DoNotOptimize(enumerate_log_partition(p, g, m));
}
// 4 and 8 take the Gray-code path, 16 the transfer matrix
BENCHMARK(BM_TrotterPathSum)->Arg(4)->Arg(8)->Arg(16)->Unit(benchmark::kMicrosecond);

static void BM_ParisiFunctional(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  const SingleSiteModel site(1.2, 0.5, 0.1, 4, SelfOverlapKernel::constant(4, 0.5));
  const auto rsb = k == 1 ? RsbParams::replica_symmetric(0.4)
                          : (k == 2 ? RsbParams::make({0.4}, {0.2, 0.6}) : RsbParams::make({0.3, 0.6}, {0.1, 0.4, 0.7}));
  const auto quad = QuadratureSpec::for_depth(k);
  for (auto _ : state) benchmark::DoNotOptimize(parisi_functional(rsb, MixtureFunction(2), site, quad));
}
BENCHMARK(BM_ParisiFunctional)->Arg(1)->Arg(2)->Arg(3)->Unit(benchmark::kMicrosecond);

static void BM_InterpolationState(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto model = InterpModel::make(ModelParams{0.7, 0.6, 0.0, n}, 4, RsbParams::make({0.5}, {0.2, 0.6}),
                                       SelfOverlapKernel::constant(4, 0.3));
  const auto layout = std::make_shared<const InterpLayout>(model, InterpPoint{0.5, 1.0});
  const auto g = DisorderSample::draw(2, n, RngStream(3));
  const auto z0 = gaussian_samples(RngStream(4), static_cast<std::size_t>(n));
  for (auto _ : state) benchmark::DoNotOptimize(InterpolationState(layout, g, z0).log_z0());
}
BENCHMARK(BM_InterpolationState)->Arg(2)->Arg(3)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
