#include <benchmark/benchmark.h>

#include "cord/align/token_align.hpp"
#include "cord/autodiff/ops.hpp"
#include "cord/common/rng.hpp"
#include "cord/model/decoder.hpp"
#include "cord/model/policy.hpp"
#include "cord/rollout/rollout.hpp"

namespace {

using namespace cord;

model::ModelConfig bench_config(std::size_t d) {
  model::ModelConfig c;
  c.d_model = d;
  c.heads = d >= 64 ? 4 : 2;
  c.seed = 1;
  return c;
}

task::ModalPair bench_pair() {
  return task::make_pair(1, task::generate_instance(4, 7, 2), task::NoiseSpec{0.05, 0.1, 1, 2, 3});
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng r(1);
  ad::Tensor<float> a({n, n}), b({n, n});
  for (auto& v : a.data) v = static_cast<float>(r.normal());
  for (auto& v : b.data) v = static_cast<float>(r.normal());
  for (auto _ : state) {
    ad::Graph<float> g(false);
    benchmark::DoNotOptimize(ad::matmul(g.constant(a), g.constant(b)).value().data.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(16)->Arg(64)->Arg(256);

void BM_ForwardBackward(benchmark::State& state) {
  const auto params = model::init_params<float>(bench_config(static_cast<std::size_t>(state.range(0))));
  const auto pair = bench_pair();
  const auto cond = rollout::audio_condition(pair);
  auto grads = params.zeros_like();
  for (auto _ : state) {
    ad::Graph<float> g;
    const auto b = model::bind(g, params, &grads);
    g.backward(model::sequence_logprob(g, b, cond, std::span<const int>(pair.target)));
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(16)->Arg(64)->Unit(benchmark::kMicrosecond);

void BM_Forward(benchmark::State& state) {
  const auto params = model::init_params<float>(bench_config(static_cast<std::size_t>(state.range(0))));
  const auto pair = bench_pair();
  const auto cond = rollout::audio_condition(pair);
  for (auto _ : state) {
    benchmark::DoNotOptimize(model::forward(params, cond, std::span<const int>(pair.target)).data.data());
  }
}
BENCHMARK(BM_Forward)->Arg(16)->Arg(64)->Unit(benchmark::kMicrosecond);

void BM_RolloutWithTeacher(benchmark::State& state) {
  const auto params = model::init_params<float>(bench_config(64));
  const auto pair = bench_pair();
  rollout::RolloutOptions o;
  o.max_len = static_cast<std::size_t>(state.range(0));
  o.record_teacher = true;
  std::uint64_t seed = 0;
  std::size_t tokens = 0;
  for (auto _ : state) {
    o.seed = ++seed;
    tokens += rollout::sample_rollout(params, pair, o).length();
  }
  state.counters["tokens/rollout"] = static_cast<double>(tokens) / static_cast<double>(state.iterations());
}
BENCHMARK(BM_RolloutWithTeacher)->Arg(16)->Arg(64)->Unit(benchmark::kMicrosecond);

void BM_TokenLoss(benchmark::State& state) {
  const auto params = model::init_params<float>(bench_config(64));
  const auto pair = bench_pair();
  rollout::RolloutOptions o;
  o.max_len = 16;
  o.record_teacher = true;
  o.seed = 9;
  const auto traj = rollout::sample_rollout(params, pair, o);
  const auto cond = rollout::audio_condition(pair);
  auto grads = params.zeros_like();
  for (auto _ : state) {
    ad::Graph<float> g;
    const auto b = model::bind(g, params, &grads);
    g.backward(align::token_loss(g, b, cond, traj, align::AlignConfig{}));
  }
}
BENCHMARK(BM_TokenLoss)->Unit(benchmark::kMicrosecond);

void BM_Weights(benchmark::State& state) {
  Rng r(3);
  std::vector<double> d(static_cast<std::size_t>(state.range(0)));
  for (auto& v : d) v = std::exp(r.normal());
  for (auto _ : state) benchmark::DoNotOptimize(align::compute_weights(d, align::AlignConfig{}).w.data());
}
BENCHMARK(BM_Weights)->Arg(16)->Arg(200);

}  // namespace
BENCHMARK_MAIN();
