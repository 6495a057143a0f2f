#include <benchmark/benchmark.h>

#include "taxogate/ops.hpp"
#include "taxogate/param_store.hpp"

namespace {

using namespace taxogate;

void BM_AttentionBlock(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  const std::size_t d = 64;
  ParamStore store(1);
  const auto& wq = store.add("wq", {d, d});
  const auto& wk = store.add("wk", {d, d});
  const auto& wv = store.add("wv", {d, d});
  const Matrix h = Matrix::Random(n, static_cast<Eigen::Index>(d));
  const AttentionOptions opt{.heads = 2};
  for (auto _ : state) benchmark::DoNotOptimize(attention_block(h, {wq, wk, wv}, opt));
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_AttentionBlock)->Arg(8)->Arg(16)->Arg(32);

void BM_AttentionBackward(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  const std::size_t d = 64;
  ParamStore store(1);
  auto& wq = store.add("wq", {d, d});
  auto& wk = store.add("wk", {d, d});
  auto& wv = store.add("wv", {d, d});
  const Matrix h = Matrix::Random(n, static_cast<Eigen::Index>(d));
  const AttentionOptions opt{.heads = 2};
  AttentionCache cache;
  const Matrix y = attention_block(h, {wq, wk, wv}, opt, &cache);
  const Matrix g = Matrix::Ones(y.rows(), y.cols());
  for (auto _ : state) benchmark::DoNotOptimize(attention_block_backward(g, cache, {wq, wk, wv}, {wq, wk, wv}, opt));
}
BENCHMARK(BM_AttentionBackward)->Arg(16);

// One decoding step against a warm cache of `range` earlier rows.
void BM_AttentionStep(benchmark::State& state) {
  const std::size_t d = 64;
  ParamStore store(1);
  const auto& wq = store.add("wq", {d, d});
  const auto& wk = store.add("wk", {d, d});
  const auto& wv = store.add("wv", {d, d});
  const AttentionOptions opt{.heads = 2};
  KeyValueCache warm;
  for (int i = 0; i < state.range(0); ++i) {
    attention_step(Eigen::RowVectorXd::Random(static_cast<Eigen::Index>(d)), {wq, wk, wv}, opt, warm);
  }
  const Eigen::RowVectorXd x = Eigen::RowVectorXd::Random(static_cast<Eigen::Index>(d));
  for (auto _ : state) {
    KeyValueCache kv = warm;
    benchmark::DoNotOptimize(attention_step(x, {wq, wk, wv}, opt, kv));
  }
}
BENCHMARK(BM_AttentionStep)->Arg(4)->Arg(16);

void BM_EncodeSequence(benchmark::State& state) {
  const std::size_t e = 32, h = 32, vocab = 64;
  ParamStore store(2);
  const auto& embed = store.add("embed", {vocab, e});
  const auto& w = store.add("w", {4 * h, e + h});
  const auto& b = store.add("b", {4 * h});
  std::vector<TokenIndex> inputs;
  for (int i = 0; i < state.range(0); ++i) inputs.push_back(static_cast<TokenIndex>(7 + i % 50));
  for (auto _ : state) benchmark::DoNotOptimize(encode_sequence(inputs, embed, w, b));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EncodeSequence)->Arg(4)->Arg(16);

void BM_Softmax(benchmark::State& state) {
  std::vector<double> x(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.01 * static_cast<double>(i % 97);
  for (auto _ : state) benchmark::DoNotOptimize(softmax(x));
}
BENCHMARK(BM_Softmax)->Arg(64)->Arg(1024);

}  // namespace
