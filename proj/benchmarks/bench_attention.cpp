#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "eaf/attention.hpp"
#include "eaf/tensor.hpp"

namespace {

eaf::Tensor random_tensor(std::mt19937_64& rng, std::vector<std::size_t> shape) {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  std::vector<double> data(n);
  for (auto& v : data) v = ((rng() >> 11) * 0x1.0p-53) * 2.0 - 1.0;
  return eaf::Tensor(std::move(shape), std::move(data));
}

void BM_WeightedAttentionForward(benchmark::State& state) {
  const std::size_t n_q = static_cast<std::size_t>(state.range(0));
  const std::size_t n_k = static_cast<std::size_t>(state.range(1));
  const int d = 32, heads = 4;
  std::mt19937_64 rng(7);
  eaf::Tensor q = random_tensor(rng, {n_q, d});
  eaf::Tensor k = random_tensor(rng, {n_k, d});
  eaf::Tensor v = random_tensor(rng, {n_k, d});
  std::vector<double> wdata(n_q * n_k);
  for (auto& x : wdata) x = (rng() >> 11) * 0x1.0p-53;
  eaf::Tensor w({n_q, n_k}, std::move(wdata));
  for (auto _ : state) {
    eaf::Tape tape;
    eaf::Tensor out = eaf::weighted_attention(tape, w, q, k, v, heads);
    benchmark::DoNotOptimize(out.data().data());
  }
}
BENCHMARK(BM_WeightedAttentionForward)
    ->Args({64, 192})
    ->Args({256, 192})
    ->Args({256, 768});

void BM_WeightedAttentionBackward(benchmark::State& state) {
  const std::size_t n_q = 256, n_k = 384;
  const int d = 32, heads = 4;
  std::mt19937_64 rng(7);
  eaf::Tensor q = random_tensor(rng, {n_q, d});
  eaf::Tensor k = random_tensor(rng, {n_k, d});
  eaf::Tensor v = random_tensor(rng, {n_k, d});
  q.set_requires_grad(true);
  k.set_requires_grad(true);
  v.set_requires_grad(true);
  std::vector<double> wdata(n_q * n_k);
  for (auto& x : wdata) x = (rng() >> 11) * 0x1.0p-53;
  eaf::Tensor w({n_q, n_k}, std::move(wdata));
  for (auto _ : state) {
    q.zero_grad();
    k.zero_grad();
    v.zero_grad();
    eaf::Tape tape;
    eaf::Tensor loss =
        tape.mean(eaf::weighted_attention(tape, w, q, k, v, heads));
    tape.backward(loss);
    benchmark::DoNotOptimize(q.grad().data());
  }
}
BENCHMARK(BM_WeightedAttentionBackward);

}  // namespace

BENCHMARK_MAIN();
