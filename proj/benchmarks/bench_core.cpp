#include <benchmark/benchmark.h>

#include "sindyae/autoencoder.hpp"
#include "sindyae/core_math.hpp"
#include "sindyae/library.hpp"
#include "sindyae/stlsq.hpp"
#include "sindyae/training.hpp"

using namespace sindyae;

namespace {

Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, RngStream& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1.0, 1.0);
  return m;
}

// Lorenz-sized network: 128 -> 64 -> 32 -> 3 with a cubic library.
TrainConfig lorenz_shape() {
  TrainConfig c;
  c.input_dim = 128;
  c.latent_dim = 3;
  c.encoder_widths = {64, 32};
  c.decoder_widths = {32, 64};
  c.library = {3, 3, false, 1};
  c.lambda1 = 1e-4;
  c.lambda3 = 1e-5;
  return c;
}

}  // namespace

static void BM_LibraryEvaluate(benchmark::State& state) {
  const LibrarySpec spec{3, static_cast<int>(state.range(0)), true, 1};
  const Library lib(spec);
  RngStream rng(1);
  const Matrix z = uniform_matrix(state.range(1), 3, rng);
  for (auto _ : state) benchmark::DoNotOptimize(lib.evaluate(z));
  state.SetItemsProcessed(state.iterations() * state.range(1));
}
BENCHMARK(BM_LibraryEvaluate)->Args({3, 1024})->Args({5, 1024});

static void BM_LossGradient(benchmark::State& state) {
  const TrainConfig c = lorenz_shape();
  TrainingState s = initialize(c);
  const Library lib(c.library);
  RngStream rng(2);
  const Matrix x = uniform_matrix(state.range(0), c.input_dim, rng);
  const Matrix dx = uniform_matrix(state.range(0), c.input_dim, rng);
  const BatchView batch{x, dx, nullptr};
  const LossWeights w{c.lambda1, c.lambda2, c.lambda3};
  Gradients g = Gradients::zeros_like(s.network, s.xi);
  for (auto _ : state) benchmark::DoNotOptimize(loss_gradient(batch, s.network, s.xi, s.mask, lib, w, g));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LossGradient)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

static void BM_Stlsq(benchmark::State& state) {
  const Library lib({3, 5, false, 1});
  RngStream rng(3);
  const Matrix theta = lib.evaluate(uniform_matrix(4096, 3, rng));
  const Matrix targets = uniform_matrix(4096, 3, rng);
  for (auto _ : state) benchmark::DoNotOptimize(stlsq(theta, targets, 0.1));
}
BENCHMARK(BM_Stlsq)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
