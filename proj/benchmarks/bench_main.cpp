#include <benchmark/benchmark.h>

#include "selfcal/estimators.hpp"
#include "selfcal/fisher.hpp"
#include "selfcal/rfmodel.hpp"
#include "selfcal/topology.hpp"

using namespace selfcal;

namespace {

ChannelModel channel_at_20db() {
  return {{1, 0}, 0.0, snr_to_noise_variance(20, 1, 1, {1, 0})};
}

void bm_build_fim(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const int f = m / 2;
  const auto strategy = build_daisy_chain(m, f);
  const auto gains = generate_gains(m, f, 1.0, 1.0, 1);
  const auto channel = channel_at_20db();
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_fim(gains, strategy, channel));
  }
}
BENCHMARK(bm_build_fim)->Arg(8)->Arg(32)->Arg(128);

void bm_invert_fim(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const int f = m / 2;
  const auto gains = generate_gains(m, f, 1.0, 1.0, 1);
  const auto fim = build_fim(gains, build_daisy_chain(m, f), channel_at_20db());
  for (auto _ : state) {
    benchmark::DoNotOptimize(invert_fim(fim));
  }
}
BENCHMARK(bm_invert_fim)->Arg(8)->Arg(32)->Arg(128);

void bm_closed_form(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const auto paths = compute_paths(build_combined(m, m / 2, 4));
  const auto channel = channel_at_20db();
  for (auto _ : state) {
    benchmark::DoNotOptimize(crlb_closed_form(paths, 1.0, 1.0, channel));
  }
}
BENCHMARK(bm_closed_form)->Arg(32)->Arg(128)->Arg(512);

void bm_elementary_update(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const int f = 1;
  const auto tree = build_daisy_chain(m, f);
  const auto gains = generate_gains(m, f, 1.0, 1.0, 1);
  const auto fim = build_fim(gains, tree, channel_at_20db());
  const auto step = star_rewiring_sequence(tree).front();
  for (auto _ : state) {
    benchmark::DoNotOptimize(elementary_update(fim, step.first, step.second, gains));
  }
}
BENCHMARK(bm_elementary_update)->Arg(8)->Arg(32)->Arg(128);

void bm_estimate_full(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const int f = m / 2;
  const auto strategy = build_daisy_chain(m, f);
  const auto paths = compute_paths(strategy);
  const auto gains = generate_gains(m, f, 1.0, 1.0, 1);
  const auto channel = channel_at_20db();
  const auto meas = synthesize_measurements(gains, strategy, channel, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        estimate_full(meas, paths, gains.alpha[f], gains.beta[f], channel.line_gain));
  }
}
BENCHMARK(bm_estimate_full)->Arg(8)->Arg(32)->Arg(128);

void bm_synthesize(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const int f = m / 2;
  const auto strategy = build_star(m, f);
  const auto gains = generate_gains(m, f, 1.0, 1.0, 1);
  const auto channel = channel_at_20db();
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(synthesize_measurements(gains, strategy, channel, ++seed));
  }
}
BENCHMARK(bm_synthesize)->Arg(8)->Arg(32)->Arg(128);

void bm_enumerate_trees(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  for (auto _ : state) {
    SpanningTreeEnumerator enumerator(m, 1);
    std::uint64_t count = 0;
    while (auto tree = enumerator.next()) {
      benchmark::DoNotOptimize(*tree);
      ++count;
    }
    benchmark::DoNotOptimize(count);
  }
}
BENCHMARK(bm_enumerate_trees)->Arg(4)->Arg(5)->Arg(6);

}  // namespace

BENCHMARK_MAIN();
