#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "taxogate/ops.hpp"
#include "taxogate/param_store.hpp"
#include "taxogate/vocab.hpp"

namespace taxogate {

class EmptyAnchor : public std::invalid_argument {
 public:
  EmptyAnchor() : std::invalid_argument("generation context needs a non-empty anchor") {}
};

class PrefixTooLong : public std::length_error {
 public:
  using std::length_error::length_error;
};

class AlreadyTerminated : public std::logic_error {
 public:
  AlreadyTerminated() : std::logic_error("trajectory already emitted <EOS>") {}
};

class MissingRewards : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// s_0 = label token, anchor tokens, <SEP>.
struct GenerationContext {
  Label label = Label::positive;
  TokenSeq anchor;
  TokenSeq encoded;
};

GenerationContext encode_context(Label label, const TokenSeq& anchor);
/// Inverse of encode_context's framing: drops the label token and <SEP>.
TokenSeq strip_context(const TokenSeq& encoded);

struct Trajectory {
  GenerationContext context;
  ConceptId anchor_id = 0;
  TokenSeq tokens;                // emitted tokens, <EOS> included when emitted
  std::vector<double> log_probs;  // model log-probability of each emitted token
  bool terminated = false;

  /// Generated query text: the emitted tokens without the trailing <EOS>.
  TokenSeq query() const;
  std::size_t emitted() const noexcept { return tokens.size(); }
};

/// Per-step action values for one trajectory; q.back() is the terminal reward.
struct RewardTrace {
  std::vector<double> q;
  double terminal() const { return q.empty() ? 0.0 : q.back(); }
};

struct SamplingOptions {
  int max_len = 8;
  double temperature = 1.0;  // 0 selects argmax decoding
};

enum class RewardBaseline { none, mean };

struct GeneratorConfig {
  std::size_t vocab_size = 0;
  int width = 64;
  int blocks = 2;
  int heads = 2;
  int context = 32;
  bool feed_forward = true;
  int ff_width = 128;
  std::uint64_t seed = 0;
  double init_range = 0.08;
};

/// A sequence scored under teacher forcing: every token from position
/// `first_target` on is a prediction target with the matching weight.
struct WeightedSequence {
  TokenSeq tokens;
  std::size_t first_target = 1;
  std::vector<double> weights;  // one per target position
};

/// Decoder-only causal transformer over label (+) anchor (+) query sequences.
class Generator {
 public:
  explicit Generator(const GeneratorConfig& config);
  /// Wraps parameters restored from a checkpoint; shapes must match config.
  Generator(const GeneratorConfig& config, ParamStore params);

  const GeneratorConfig& config() const noexcept { return config_; }
  ParamStore& params() noexcept { return params_; }
  const ParamStore& params() const noexcept { return params_; }

  /// Next-token logits at every position of `sequence` (n x vocab).
  Matrix logits(std::span<const TokenId> sequence) const;
  std::vector<double> next_token_distribution(std::span<const TokenId> prefix) const;

  Trajectory sample_query(const GenerationContext& ctx, const SamplingOptions& opt, std::uint64_t seed,
                          ConceptId anchor_id = 0) const;
  std::vector<Trajectory> rollout_complete(const Trajectory& partial, std::size_t n,
                                           const SamplingOptions& opt, std::uint64_t seed) const;

  /// Sum over targets of weight * (-log p(token)). Adds gradients into the
  /// parameter store when `accumulate` is set.
  double weighted_nll(std::span<const WeightedSequence> batch, bool accumulate);

  /// Mean per-token NLL of query tokens plus <EOS>; context tokens are not targets.
  double mle_loss(std::span<const TrainingTriple> batch, bool accumulate);
  /// mle_loss with gradients followed by one SGD step; returns the loss.
  double mle_pretrain_step(std::span<const TrainingTriple> batch, double learning_rate,
                           double clip_norm = 0.0);

  /// Loss whose negative gradient is the REINFORCE estimate
  /// (1/B) sum_b sum_t Q_bt grad log G(y_bt | Y_{1:t-1}, s_0).
  double policy_surrogate(std::span<const Trajectory> batch, std::span<const RewardTrace> rewards,
                          RewardBaseline baseline, bool accumulate);
  void pg_update(std::span<const Trajectory> batch, std::span<const RewardTrace> rewards,
                 double learning_rate, RewardBaseline baseline = RewardBaseline::none,
                 double clip_norm = 0.0);

  /// Mean log-probability per query token (with <EOS>) of `query` after `ctx`.
  double mean_log_prob(const GenerationContext& ctx, const TokenSeq& query) const;

 private:
  struct DecodeState;
  struct ForwardCache;

  void build_params();
  void check_vocab(std::span<const TokenId> seq) const;
  Eigen::RowVectorXd decode_step(DecodeState& state, TokenId token) const;
  void continue_sampling(DecodeState& state, Eigen::RowVectorXd logits, Trajectory& traj,
                         const SamplingOptions& opt, CounterRng& rng) const;
  Matrix forward(std::span<const TokenId> seq, ForwardCache* cache) const;
  void backward(const Matrix& grad_logits, const ForwardCache& cache);

  GeneratorConfig config_;
  ParamStore params_;
};

/// Teacher-forcing sequence of a triple: s_0 (+) query (+) <EOS>.
WeightedSequence triple_sequence(const TrainingTriple& triple);

}  // namespace taxogate
