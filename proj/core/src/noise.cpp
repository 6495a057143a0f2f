#include "taxogate/noise.hpp"

#include <algorithm>
#include <stdexcept>

namespace taxogate {

UniformNoise::UniformNoise(TokenId first_token, TokenId end_token, std::size_t min_len,
                           std::size_t max_len)
    : first_(first_token), end_(end_token), min_len_(min_len), max_len_(max_len) {
  if (end_ <= first_) throw std::invalid_argument("UniformNoise: empty token range");
  if (min_len_ == 0 || max_len_ < min_len_) throw std::invalid_argument("UniformNoise: bad length range");
}

TokenSeq UniformNoise::draw(CounterRng& rng) const {
  const std::size_t len = min_len_ + rng.below(max_len_ - min_len_ + 1);
  TokenSeq out(len);
  const auto span = static_cast<std::uint64_t>(end_ - first_);
  for (auto& tok : out) tok = first_ + static_cast<TokenId>(rng.below(span));
  return out;
}

ShuffledConceptNoise::ShuffledConceptNoise(const std::vector<TokenSeq>& real_concepts)
    : real_(real_concepts.begin(), real_concepts.end()) {
  for (const TokenSeq& seq : real_concepts) {
    if (seq.size() < 2) continue;
    if (std::adjacent_find(seq.begin(), seq.end(), std::not_equal_to<>()) == seq.end()) continue;
    sources_.push_back(seq);
  }
  if (sources_.empty()) throw std::invalid_argument("ShuffledConceptNoise: no concept can be permuted");
}

TokenSeq ShuffledConceptNoise::draw(CounterRng& rng) const {
  for (int attempt = 0; attempt < 100000; ++attempt) {
    TokenSeq seq = sources_[rng.below(sources_.size())];
    rng.shuffle(seq);
    if (!real_.contains(seq)) return seq;
  }
  throw std::runtime_error("ShuffledConceptNoise: every permutation drawn was a real concept");
}

}  // namespace taxogate
