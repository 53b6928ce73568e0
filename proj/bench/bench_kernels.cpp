#include <benchmark/benchmark.h>

#include <cmath>
#include <string>

#include "reconnet/baseline.hpp"
#include "reconnet/evaluation.hpp"
#include "reconnet/model.hpp"
#include "reconnet/parallel.hpp"
#include "reconnet/rng.hpp"
#include "reconnet/training.hpp"

using namespace reconnet;

namespace {

// (kernel, in, out) of the distinct layer shapes in the network.
constexpr std::size_t kShapes[][3] = {{11, 1, 64}, {1, 64, 32}, {7, 32, 1}};

ConvLayer<float> random_layer(std::size_t shape, Rng& rng) {
  const auto& s = kShapes[shape];
  ConvLayer<float> layer(s[0], s[1], s[2], true);
  for (auto& w : layer.weights) w = static_cast<float>(0.05 * rng.normal());
  return layer;
}

Tensor3<float> random_input(std::size_t channels, Rng& rng) {
  Tensor3<float> t(kBlockSide, kBlockSide, channels);
  for (auto& v : t.data) v = static_cast<float>(rng.uniform());
  return t;
}

void BM_Conv(benchmark::State& state) {
  Rng rng(1);
  const auto shape = static_cast<std::size_t>(state.range(0));
  const auto algo = state.range(1) == 0 ? ConvAlgo::Direct : ConvAlgo::Im2col;
  auto layer = random_layer(shape, rng);
  auto in = random_input(kShapes[shape][1], rng);
  for (auto _ : state) benchmark::DoNotOptimize(conv2d_forward(in, layer, algo));
  state.SetLabel(std::string(algo == ConvAlgo::Direct ? "direct " : "im2col ") + std::to_string(kShapes[shape][0]) +
                 "x" + std::to_string(kShapes[shape][0]) + " " + std::to_string(kShapes[shape][1]) + "->" +
                 std::to_string(kShapes[shape][2]));
}
BENCHMARK(BM_Conv)->ArgsProduct({{0, 1, 2}, {0, 1}})->Unit(benchmark::kMicrosecond);

Plane test_image() {
  Rng rng(2);
  Plane p(256, 256);
  for (std::size_t r = 0; r < 256; ++r)
    for (std::size_t c = 0; c < 256; ++c)
      p.at(r, c) = 0.5 + 0.25 * std::sin(r * 0.07) * std::cos(c * 0.05) + 0.05 * rng.uniform();
  return p;
}

// Second argument: 0 runs serially, 1 uses every available worker.
void BM_ReconstructReconNet(benchmark::State& state) {
  const auto phi = generate_matrix(measurements_for_rate(kBlockDim, 0.25), kBlockDim, 3);
  const auto model = build_model(phi.m, InitMode::Deterministic, &phi, 3);
  const auto img = test_image();
  const int workers = state.range(0) == 0 ? 1 : max_threads();
  ScopedThreads threads(workers);
  for (auto _ : state)
    benchmark::DoNotOptimize(reconstruct_plane(img, phi, reconnet_method(model), 0.0, 0, identity_denoiser()));
  state.SetLabel("threads " + std::to_string(workers));
}
BENCHMARK(BM_ReconstructReconNet)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_ReconstructFista(benchmark::State& state) {
  const auto phi = generate_matrix(measurements_for_rate(kBlockDim, 0.25), kBlockDim, 3);
  const auto img = test_image();
  const int workers = state.range(0) == 0 ? 1 : max_threads();
  ScopedThreads threads(workers);
  for (auto _ : state)
    benchmark::DoNotOptimize(reconstruct_plane(img, phi, ista_method(), 0.0, 0, identity_denoiser()));
  state.SetLabel("threads " + std::to_string(workers));
}
BENCHMARK(BM_ReconstructFista)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->Iterations(1);

void BM_FistaBlock(benchmark::State& state) {
  const auto phi = generate_matrix(static_cast<std::size_t>(state.range(0)), kBlockDim, 4);
  Rng rng(5);
  std::vector<double> x(kBlockDim);
  for (auto& v : x) v = rng.uniform();
  const auto y = reconnet::apply(phi, std::span<const double>(x));
  DctBasis basis;
  for (auto _ : state) benchmark::DoNotOptimize(ista_recover(phi, basis, y, IstaConfig{}));
}
BENCHMARK(BM_FistaBlock)->Arg(272)->Arg(43)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  const auto phi = generate_matrix(109, kBlockDim, 6);
  Rng rng(7);
  const auto count = static_cast<std::size_t>(state.range(0));
  std::vector<std::vector<float>> xs(count), ys(count);
  std::vector<Example<float>> batch;
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<double> x(kBlockDim);
    for (auto& v : x) v = rng.uniform();
    const auto y = reconnet::apply(phi, std::span<const double>(x));
    xs[i].assign(x.begin(), x.end());
    ys[i].assign(y.begin(), y.end());
    batch.push_back({ys[i], xs[i]});
  }
  TrainConfig cfg;
  cfg.batch_size = batch.size();
  cfg.learning_rate = 1e-6;
  TrainState train_state(build_model(109, InitMode::Deterministic, &phi, 6), 6);
  for (auto _ : state) benchmark::DoNotOptimize(sgd_step(train_state, batch, cfg));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TrainStep)->Arg(16)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
