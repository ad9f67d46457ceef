#include <benchmark/benchmark.h>

#include "dtp/config.hpp"
#include "dtp/dataset.hpp"
#include "dtp/inversion.hpp"
#include "dtp/netcore.hpp"
#include "dtp/trainer.hpp"

namespace {

dtp::TrainConfig sized(int width, int layers) {
  dtp::TrainConfig c;
  c.width = width;
  c.layers = layers;
  return c;
}

void BM_Forward(benchmark::State& state) {
  const auto c = sized(static_cast<int>(state.range(0)), 3);
  const auto net = dtp::make_network(c);
  const dtp::Vector x = dtp::Vector::Ones(c.width);
  for (auto _ : state) benchmark::DoNotOptimize(dtp::forward(net, x));
}
BENCHMARK(BM_Forward)->Arg(8)->Arg(32)->Arg(128);

void BM_Relaxation(benchmark::State& state) {
  auto c = sized(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  const auto net = dtp::make_network(c);
  const auto data = dtp::make_dataset(dtp::dataset_spec(c), c.seed);
  const auto trace = dtp::forward(net, data.front().x);
  const dtp::Vector tau = trace.output() - 1e-3 * (trace.output() - data.front().y);
  for (auto _ : state) {
    try {
      benchmark::DoNotOptimize(dtp::parallel_target_relaxation(net, tau, c.relaxation()));
    } catch (const std::exception&) {
    }
  }
}
BENCHMARK(BM_Relaxation)->Args({8, 3})->Args({32, 3})->Args({8, 6});

void BM_TrainStep(benchmark::State& state) {
  const auto c = sized(static_cast<int>(state.range(0)), 3);
  auto net = dtp::make_network(c);
  const auto data = dtp::make_dataset(dtp::dataset_spec(c), c.seed);
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& s = data[i++ % data.size()];
    try {
      benchmark::DoNotOptimize(dtp::train_step(net, s.x, s.y, c));
    } catch (const std::exception&) {
    }
  }
}
BENCHMARK(BM_TrainStep)->Arg(8)->Arg(32);

}  // namespace
