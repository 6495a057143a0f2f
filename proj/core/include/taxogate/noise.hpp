#pragma once

#include <set>

#include "taxogate/taxonomy.hpp"

namespace taxogate {

/// Uniformly random token strings: length uniform in [min_len, max_len],
/// tokens uniform in [first_token, end_token).
class UniformNoise final : public NoiseSource {
 public:
  UniformNoise(TokenId first_token, TokenId end_token, std::size_t min_len, std::size_t max_len);
  TokenSeq draw(CounterRng& rng) const override;

 private:
  TokenId first_;
  TokenId end_;
  std::size_t min_len_;
  std::size_t max_len_;
};

/// Word-salad noise: the tokens of a randomly chosen real concept in a
/// permuted order that matches no real concept. The bag of tokens is that of
/// a genuine concept, so only order-aware models can reject it.
class ShuffledConceptNoise final : public NoiseSource {
 public:
  explicit ShuffledConceptNoise(const std::vector<TokenSeq>& real_concepts);
  TokenSeq draw(CounterRng& rng) const override;

 private:
  std::vector<TokenSeq> sources_;  // only concepts with >= 2 distinct tokens
  std::set<TokenSeq> real_;
};

}  // namespace taxogate
