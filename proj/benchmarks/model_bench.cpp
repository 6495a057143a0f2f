#include <benchmark/benchmark.h>

#include "taxogate/dataset.hpp"
#include "taxogate/discriminators.hpp"
#include "taxogate/generator.hpp"
#include "taxogate/metrics.hpp"

namespace {

using namespace taxogate;

// Default model sizes over the default synthetic taxonomy.
struct Fixture {
  SynthResult data = synth_taxonomy(3, 5, 8, 1);
  Generator generator{GeneratorConfig{.vocab_size = data.vocab.size(), .seed = 1}};
  RolloutDisc rollout{RolloutDiscConfig{.vocab_size = data.vocab.size(), .seed = 2}};
  HyperDisc hyper{HyperDiscConfig{.vocab_size = data.vocab.size(), .max_depth = 5, .seed = 3}};
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

TokenSeq leaf_tokens() { return fixture().data.taxonomy.concept_of(200).tokens; }

void BM_GeneratorLogits(benchmark::State& state) {
  const auto& f = fixture();
  const TokenSeq leaf = leaf_tokens();
  TokenSeq seq = encode_context(Label::positive, leaf).encoded;
  seq.insert(seq.end(), leaf.begin(), leaf.end());
  for (auto _ : state) benchmark::DoNotOptimize(f.generator.logits(seq));
}
BENCHMARK(BM_GeneratorLogits);

void BM_SampleQuery(benchmark::State& state) {
  const auto& f = fixture();
  const auto ctx = encode_context(Label::positive, leaf_tokens());
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(f.generator.sample_query(ctx, {.max_len = 8}, seed++));
}
BENCHMARK(BM_SampleQuery);

void BM_RolloutComplete(benchmark::State& state) {
  const auto& f = fixture();
  const auto ctx = encode_context(Label::positive, leaf_tokens());
  Trajectory partial = f.generator.sample_query(ctx, {.max_len = 1}, 4);
  partial.terminated = false;
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(f.generator.rollout_complete(partial, n, {.max_len = 8}, 9));
}
BENCHMARK(BM_RolloutComplete)->Arg(1)->Arg(8);

void BM_RolloutScore(benchmark::State& state) {
  const auto& f = fixture();
  const TokenSeq q = leaf_tokens();
  for (auto _ : state) benchmark::DoNotOptimize(f.rollout.score(q));
}
BENCHMARK(BM_RolloutScore);

void BM_HyperScore(benchmark::State& state) {
  const auto& f = fixture();
  const TokenSeq q = leaf_tokens();
  for (auto _ : state) benchmark::DoNotOptimize(hyper_score(Label::positive, 3, q, f.data.taxonomy, f.hyper));
}
BENCHMARK(BM_HyperScore);

// Phase-2 cost of one query: D_H against every anchor of the taxonomy.
void BM_RankAllAnchors(benchmark::State& state) {
  const auto& f = fixture();
  const QueryRecord q{Concept{1000, leaf_tokens()}, {60}, false};
  const PairScorer scorer = [&](ConceptId a, const TokenSeq& s) {
    return hyper_score(Label::positive, a, s, f.data.taxonomy, f.hyper);
  };
  for (auto _ : state) benchmark::DoNotOptimize(rank_parents(q, f.data.taxonomy, scorer));
  state.counters["anchors"] = static_cast<double>(f.data.taxonomy.size());
}
BENCHMARK(BM_RankAllAnchors)->Unit(benchmark::kMillisecond);

}  // namespace
