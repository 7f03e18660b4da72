#include <benchmark/benchmark.h>

#include "squeeze_amp/expm.hpp"
#include "squeeze_amp/fock.hpp"
#include "squeeze_amp/open_system.hpp"
#include "squeeze_amp/protocols.hpp"
#include "squeeze_amp/tomography.hpp"

#include <random>

using namespace squeeze_amp;

static Matrix random_generator(Eigen::Index n) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  Matrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = {g(rng), g(rng)};
  return m / m.norm() * 4.0;
}

static void ExpmPade(benchmark::State& state) {
  const Matrix a = random_generator(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(linalg::expm_pade(a));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(ExpmPade)->RangeMultiplier(2)->Range(32, 256)->Complexity(benchmark::oNCubed)->Unit(benchmark::kMillisecond);

static void ExpmSpectralAntiHermitian(benchmark::State& state) {
  const Matrix h = random_generator(state.range(0));
  const Matrix k = h - h.adjoint();
  for (auto _ : state) benchmark::DoNotOptimize(linalg::expm_spectral(k));
}
BENCHMARK(ExpmSpectralAntiHermitian)->RangeMultiplier(2)->Range(32, 256)->Unit(benchmark::kMillisecond);

static void SqueezerConstruct(benchmark::State& state) {
  const auto cutoff = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(Squeezer(cutoff));
}
BENCHMARK(SqueezerConstruct)->Arg(128)->Arg(320)->Arg(1024)->Unit(benchmark::kMillisecond);

static void SqueezerApplyBlock(benchmark::State& state) {
  const std::size_t cutoff = 1024;
  const Squeezer sq(cutoff);
  const Matrix cols = Matrix::Identity(static_cast<Eigen::Index>(cutoff), state.range(0));
  double th = 0.0;
  for (auto _ : state) {
    th += 0.1;
    benchmark::DoNotOptimize(sq.apply(SqueezeParams(1.2, th), cols));
  }
}
BENCHMARK(SqueezerApplyBlock)->Arg(1)->Arg(16)->Unit(benchmark::kMillisecond);

static void PhaseIndependentGain(benchmark::State& state) {
  const std::size_t cutoff = protocols::sequence_cutoff(1.38, 0.55);
  const StateVector vac = vacuum_state(Basis{cutoff, Space::fock});
  const DisplacementParams alpha(0.55, 0.3);
  const auto seq = protocols::build_ha_displacement(alpha, 1.38, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(protocols::evolve_sequence(vac, seq));
}
BENCHMARK(PhaseIndependentGain)->Arg(1)->Arg(3)->Unit(benchmark::kMillisecond);

static void StroboscopicDephasing(benchmark::State& state) {
  protocols::HamiltonianSpec spec;
  spec.cutoff = static_cast<std::size_t>(state.range(0));
  const Operator h = protocols::jc_hamiltonian(spec);
  Vector psi = Vector::Zero(static_cast<Eigen::Index>(h.basis().size()));
  psi(0) = 1.0;
  const DensityMatrix rho = DensityMatrix::from_state(StateVector(h.basis(), psi));
  const open_system::DephasingConfig cfg{0.01 * spec.omega, {}};
  open_system::PropagationOptions opts;
  opts.leakage_tol = 1e-3;
  for (auto _ : state) benchmark::DoNotOptimize(open_system::stroboscopic_ha_propagate(rho, h, cfg, 0.3, 64, 5e-5, opts));
}
BENCHMARK(StroboscopicDephasing)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

static void ModelFreeFit(benchmark::State& state) {
  const tomography::SidebandCal cal;
  PopulationVector p;
  p.probs = thermal_populations(0.3, 40);
  const auto trace = tomography::sample_trace(tomography::bsb_signal(p, cal, tomography::default_time_grid(cal)), 300, 1);
  tomography::FitOptions opts;
  opts.bootstrap_resamples = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(tomography::fit_model_free(trace, cal, 12, opts));
}
BENCHMARK(ModelFreeFit)->Arg(0)->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
