#include <benchmark/benchmark.h>

#include <random>

#include "metarl/diff/ops.hpp"
#include "metarl/harness/config.hpp"
#include "metarl/nets/nets.hpp"

using namespace metarl;

namespace {

diff::Array random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(rows * cols);
  for (double& x : v) x = u(rng);
  return diff::Array::matrix(rows, cols, std::move(v));
}

void BM_MatmulBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const diff::Array a = random_matrix(n, n, rng), b = random_matrix(n, n, rng);
  for (auto _ : state) {
    diff::Tape tape;
    const diff::Var x = tape.parameter(a), y = tape.parameter(b);
    const diff::Var loss = diff::sum(diff::matmul(x, y));
    tape.backward(loss);
    benchmark::DoNotOptimize(x.grad());
  }
}
BENCHMARK(BM_MatmulBackward)->Arg(8)->Arg(64)->Arg(128);

harness::RunConfig bench_config() {
  harness::RunConfig c;
  c.workers = 1;
  return c;
}

// Embedding of a full buffer (M episodes of horizon H) under the default encoder.
void BM_BufferEmbedding(benchmark::State& state) {
  const harness::RunConfig c = bench_config();
  const tesp::Learner l = harness::make_learner(c);
  Rng init(2);
  const auto meta = l.initialize(init);
  const auto task = envs::sample_task_set(l.environment().id(), 1, envs::Region::train, 3, c.env_constants)[0];
  Rng rng(4);
  const auto r = l.adapt(meta, task, rng);
  for (auto _ : state) {
    diff::Tape tape;
    benchmark::DoNotOptimize(l.embedding(nets::bind_constants(tape, meta), *r.buffer).value());
  }
}
BENCHMARK(BM_BufferEmbedding)->Unit(benchmark::kMicrosecond);

void BM_SampleEpisodes(benchmark::State& state) {
  const harness::RunConfig c = bench_config();
  const tesp::Learner l = harness::make_learner(c);
  Rng init(2);
  const auto meta = l.initialize(init);
  const auto task = envs::sample_task_set(l.environment().id(), 1, envs::Region::train, 3, c.env_constants)[0];
  const diff::Array h(diff::Shape{l.spec().encoder.embed_dim}, 0.0);
  Rng rng(5);
  for (auto _ : state)
    benchmark::DoNotOptimize(
        rollout::sample_episodes(l.environment(), task, {&meta, &l.spec().policy}, h, l.spec().episodes_per_round, rng));
}
BENCHMARK(BM_SampleEpisodes)->Unit(benchmark::kMicrosecond);

void BM_Adapt(benchmark::State& state) {
  harness::RunConfig c = bench_config();
  c.method = static_cast<harness::Method>(state.range(0));
  const tesp::Learner l = harness::make_learner(c);
  state.SetLabel(harness::method_name(c.method));
  Rng init(2);
  const auto meta = l.initialize(init);
  const auto task = envs::sample_task_set(l.environment().id(), 1, envs::Region::train, 3, c.env_constants)[0];
  Rng rng(6);
  for (auto _ : state) benchmark::DoNotOptimize(l.adapt(meta, task, rng).embedding);
}
BENCHMARK(BM_Adapt)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);

void BM_MetaGradient(benchmark::State& state) {
  const harness::RunConfig c = bench_config();
  const tesp::Learner l = harness::make_learner(c);
  Rng init(2);
  const auto meta = l.initialize(init);
  const auto task = envs::sample_task_set(l.environment().id(), 1, envs::Region::train, 3, c.env_constants)[0];
  Rng rng(7);
  const auto r = l.adapt(meta, task, rng);
  for (auto _ : state) benchmark::DoNotOptimize(l.meta_gradient(meta, r).objective);
}
BENCHMARK(BM_MetaGradient)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
