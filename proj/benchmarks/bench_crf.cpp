#include <benchmark/benchmark.h>

#include <random>

#include "sluxfer/crf.hpp"

namespace {

using namespace sluxfer;

struct Instance {
  Matrix emissions;
  TransitionMatrix crf;
  std::vector<int> gold;
};

Instance make_instance(Eigen::Index t, Eigen::Index k) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  Instance in{Matrix(t, k), TransitionMatrix(k), std::vector<int>(static_cast<std::size_t>(t))};
  for (Eigen::Index i = 0; i < in.emissions.size(); ++i) in.emissions.data()[i] = n(rng);
  for (Eigen::Index i = 0; i < in.crf.transitions.size(); ++i) in.crf.transitions.data()[i] = n(rng);
  for (auto& g : in.gold) g = static_cast<int>(rng() % static_cast<unsigned>(k));
  return in;
}

// args: sentence length, tag count (ATIS-sized tag sets have ~120 tags)
void BM_LogPartition(benchmark::State& state) {
  const auto in = make_instance(state.range(0), state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(log_partition(in.emissions, in.crf));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LogPartition)->Args({12, 9})->Args({12, 121})->Args({40, 121});

void BM_Viterbi(benchmark::State& state) {
  const auto in = make_instance(state.range(0), state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(viterbi(in.emissions, in.crf));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Viterbi)->Args({12, 9})->Args({12, 121})->Args({40, 121});

void BM_NllBackward(benchmark::State& state) {
  const auto in = make_instance(state.range(0), state.range(1));
  Matrix d_emissions;
  TransitionMatrix grad(state.range(1));
  for (auto _ : state) {
    benchmark::DoNotOptimize(crf_nll_backward(in.emissions, in.crf, in.gold, d_emissions, grad));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_NllBackward)->Args({12, 9})->Args({12, 121});

}  // namespace
