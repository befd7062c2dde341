// Serial reference kernels vs their production counterparts (blocked or
// OpenMP-parallel). Run with PERTURBMC_THREADS to vary the pool.

#include <benchmark/benchmark.h>

#include "perturbmc/oracle.hpp"
#include "perturbmc/parallel.hpp"
#include "perturbmc/simulate.hpp"
#include "perturbmc/spectral.hpp"
#include "perturbmc/timing_channel.hpp"

using namespace perturbmc;

namespace {

SecondOrderContext queue_ctx() {
  static QueueModel qm = build_queue_model(0.9, 18);
  return make_context(qm.family, three_state_input(0.4, 0.3));
}

const SigmaSeries& rd_window() {
  static SigmaSeries rd = r_d_window(queue_ctx());
  return rd;
}

}  // namespace

static void BM_fourier_blocked(benchmark::State& state) {
  const SigmaSeries& rd = rd_window();
  for (auto _ : state) benchmark::DoNotOptimize(psd_of_series(rd, 512));
}
BENCHMARK(BM_fourier_blocked)->Unit(benchmark::kMillisecond);

static void BM_fourier_serial(benchmark::State& state) {
  const SigmaSeries& rd = rd_window();
  for (auto _ : state) benchmark::DoNotOptimize(psd_of_series_serial(rd, 512));
}
BENCHMARK(BM_fourier_serial)->Unit(benchmark::kMillisecond);

static void BM_psd_gamma(benchmark::State& state) {
  SecondOrderContext ctx = queue_ctx();
  SpectralGrid SD = psd_of_series(rd_window(), 512);
  for (auto _ : state) benchmark::DoNotOptimize(psd_gamma(ctx, SD));
}
BENCHMARK(BM_psd_gamma)->Unit(benchmark::kMillisecond);

static void BM_psd_gamma_serial(benchmark::State& state) {
  SecondOrderContext ctx = queue_ctx();
  SpectralGrid SD = psd_of_series(rd_window(), 512);
  for (auto _ : state) benchmark::DoNotOptimize(psd_gamma_serial(ctx, SD));
}
BENCHMARK(BM_psd_gamma_serial)->Unit(benchmark::kMillisecond);

static void BM_exact_psd(benchmark::State& state) {
  QueueModel qm = build_queue_model(0.9, 18);
  JointChain jc = build_joint(qm.family, three_state_input(0.4, 0.3));
  Vector f = lift_observable(jc, qm.departure_indicator());
  Vector z = input_observable(jc);
  for (auto _ : state) benchmark::DoNotOptimize(exact_psd(jc, f, z, 256));
}
BENCHMARK(BM_exact_psd)->Unit(benchmark::kMillisecond);

static void BM_exact_psd_serial(benchmark::State& state) {
  QueueModel qm = build_queue_model(0.9, 18);
  JointChain jc = build_joint(qm.family, three_state_input(0.4, 0.3));
  Vector f = lift_observable(jc, qm.departure_indicator());
  Vector z = input_observable(jc);
  for (auto _ : state) benchmark::DoNotOptimize(exact_psd_serial(jc, f, z, 256));
}
BENCHMARK(BM_exact_psd_serial)->Unit(benchmark::kMillisecond);

static void BM_coupling_sweep(benchmark::State& state) {
  QueueModel qm = build_queue_model(0.9, 18);
  InputSpec in = three_state_input(0.4, 0.1);
  std::vector<double> eps{0.05, 0.1, 0.2, 0.4};
  for (auto _ : state)
    benchmark::DoNotOptimize(coupling_rate(qm.family, in, eps, 100000, 1));
}
BENCHMARK(BM_coupling_sweep)->Unit(benchmark::kMillisecond);

static void BM_coupling_sweep_serial(benchmark::State& state) {
  QueueModel qm = build_queue_model(0.9, 18);
  InputSpec in = three_state_input(0.4, 0.1);
  std::vector<double> eps{0.05, 0.1, 0.2, 0.4};
  for (auto _ : state)
    benchmark::DoNotOptimize(coupling_rate_serial(qm.family, in, eps, 100000, 1));
}
BENCHMARK(BM_coupling_sweep_serial)->Unit(benchmark::kMillisecond);

int main(int argc, char** argv) {
  apply_thread_cap();
  benchmark::Initialize(&argc, argv);
  benchmark::RunSpecifiedBenchmarks();
  return 0;
}
