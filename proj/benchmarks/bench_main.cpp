#include <benchmark/benchmark.h>

#include "mmflow/birkhoff.hpp"
#include "mmflow/boundary_flow.hpp"
#include "mmflow/finite_flow.hpp"
#include "mmflow/lie_core.hpp"
#include "mmflow/morse_strata.hpp"
#include "mmflow/rng.hpp"

#include <vector>

namespace {

void BM_AlcoveProject(benchmark::State& state) {
  std::vector<double> xs;
  mmflow::Rng rng(1);
  for (int i = 0; i < 1024; ++i) xs.push_back(rng.uniform(-50.0, 50.0));
  for (auto _ : state) {
    double acc = 0.0;
    for (double x : xs) acc += mmflow::alcove_project(x).point;
    benchmark::DoNotOptimize(acc);
  }
  state.SetItemsProcessed(state.iterations() * 1024);
}
BENCHMARK(BM_AlcoveProject);

void BM_SeriesMultiply(benchmark::State& state) {
  const int T = static_cast<int>(state.range(0));
  const mmflow::TruncatedSeries a = mmflow::equivariant_total(3, T);
  const mmflow::TruncatedSeries b = mmflow::stratum_contribution(3, 1, T);
  for (auto _ : state) benchmark::DoNotOptimize(a * b);
}
BENCHMARK(BM_SeriesMultiply)->Arg(24)->Arg(96);

void BM_PoincareReduced(benchmark::State& state) {
  const int g = static_cast<int>(state.range(0));
  const int T = mmflow::default_truncation(g);
  const int lmax = mmflow::default_lambda_max(g, T);
  for (auto _ : state) benchmark::DoNotOptimize(mmflow::poincare_reduced(g, lmax, T));
}
BENCHMARK(BM_PoincareReduced)->Arg(2)->Arg(5);

void BM_DtnAssemble(benchmark::State& state) {
  mmflow::CylinderModel model;
  model.mode_cutoff = static_cast<int>(state.range(0));
  model.xi = 0.23;
  for (auto _ : state) benchmark::DoNotOptimize(mmflow::dtn_assemble(model));
}
BENCHMARK(BM_DtnAssemble)->Arg(8)->Arg(64);

void BM_FlowGradient(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::vector<double> radii;
  for (int i = 0; i < n; ++i) radii.push_back(1.0 + 0.1 * (i % 7));
  const mmflow::Configuration m = mmflow::random_configuration(radii, 5);
  for (auto _ : state) benchmark::DoNotOptimize(mmflow::flow_gradient(radii, m));
}
BENCHMARK(BM_FlowGradient)->Arg(8)->Arg(64);

void BM_FlowSpheresShort(benchmark::State& state) {
  const std::vector<double> radii{2.0, 1.0};
  const mmflow::Configuration init = mmflow::random_configuration(radii, 1);
  mmflow::FlowOptions opt;
  opt.t_max = 1.0;
  opt.grad_tol = 0.0;
  for (auto _ : state) benchmark::DoNotOptimize(mmflow::flow_spheres(radii, init, opt));
}
BENCHMARK(BM_FlowSpheresShort);

void BM_BirkhoffFactorize(benchmark::State& state) {
  mmflow::LaurentMatrix g(2, 2);
  Eigen::MatrixXcd c = Eigen::MatrixXcd::Zero(2, 2);
  c(0, 0) = 1.0;
  g.add_coeff(1, c);
  c.setZero();
  c(1, 0) = 1.0;
  g.add_coeff(0, c);
  c.setZero();
  c(1, 1) = 1.0;
  g.add_coeff(-1, c);
  mmflow::FactorizeOptions opt;
  opt.fft_size = static_cast<int>(state.range(0));
  opt.max_fft_size = opt.fft_size;
  for (auto _ : state) benchmark::DoNotOptimize(mmflow::birkhoff_factorize(g, opt));
}
BENCHMARK(BM_BirkhoffFactorize)->Arg(256)->Arg(1024);

}  // namespace

BENCHMARK_MAIN();
