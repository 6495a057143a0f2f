#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "taxogate/ops.hpp"
#include "taxogate/param_store.hpp"
#include "taxogate/taxonomy.hpp"
#include "taxogate/vocab.hpp"

namespace taxogate {

// ---------------------------------------------------------------------------
// Rollout discriminator: is this token string a concept?
//
//   h_t = LSTM(embed(x_1..x_t)),  r = W_r h_t + b_r,  D_R = sigmoid(r)

struct RolloutDiscConfig {
  std::size_t vocab_size = 0;
  int embed = 32;
  int hidden = 32;
  std::uint64_t seed = 0;
  double init_range = 0.08;
};

class RolloutDisc {
 public:
  explicit RolloutDisc(const RolloutDiscConfig& config);
  RolloutDisc(const RolloutDiscConfig& config, ParamStore params);

  const RolloutDiscConfig& config() const noexcept { return config_; }
  ParamStore& params() noexcept { return params_; }
  const ParamStore& params() const noexcept { return params_; }

  double logit(std::span<const TokenId> seq) const;
  double score(std::span<const TokenId> seq) const;

  /// -mean log D(pos) - mean log(1 - D(neg)); gradients added when accumulating.
  double loss(std::span<const TokenSeq> positives, std::span<const TokenSeq> negatives, bool accumulate);
  double train_step(std::span<const TokenSeq> positives, std::span<const TokenSeq> negatives,
                    double learning_rate, double clip_norm = 0.0);

 private:
  double logit_impl(std::span<const TokenId> seq, SequenceTrace* trace) const;
  void backward(double grad_logit, const SequenceTrace& trace);

  RolloutDiscConfig config_;
  ParamStore params_;
};

double rollout_score(std::span<const TokenId> seq, const RolloutDisc& disc);

// ---------------------------------------------------------------------------
// Hyper discriminator: does the query stand in relation `label` to the anchor?
//
//   x = Enc(<SUM> x_1 .. x_t)[<SUM>]
//   r_h = W_h (l + x_a + p_a + x_q + p_q) + b_h,   D_H = sigmoid(r_h)
//
// The encoder reads the sequence right to left so that its final state sits
// on the prepended marker. With `concat` the five vectors are stacked instead
// of summed and W_h widens to match.

enum class HyperCombine { sum, concat };

struct HyperDiscConfig {
  std::size_t vocab_size = 0;
  int dim = 32;        // token embedding width = encoder state = output width
  int max_depth = 1;   // position rows 0..max_depth, then one query slot
  HyperCombine combine = HyperCombine::sum;
  std::uint64_t seed = 0;
  double init_range = 0.08;
};

enum class PositionRole { anchor, query };

/// One triple resolved against a taxonomy: depth replaces the anchor id.
struct HyperExample {
  Label label = Label::positive;
  TokenSeq anchor;
  int anchor_depth = 0;
  TokenSeq query;
};

HyperExample resolve_example(const Taxonomy& t, const TrainingTriple& triple);

class HyperDisc {
 public:
  explicit HyperDisc(const HyperDiscConfig& config);
  HyperDisc(const HyperDiscConfig& config, ParamStore params);

  const HyperDiscConfig& config() const noexcept { return config_; }
  ParamStore& params() noexcept { return params_; }
  const ParamStore& params() const noexcept { return params_; }

  Vector encode(std::span<const TokenId> tokens) const;
  /// Row of the position table: the clamped depth for anchors, the query
  /// slot for queries (depth is ignored).
  Vector position_row(PositionRole role, int depth) const;
  std::size_t query_slot() const noexcept { return static_cast<std::size_t>(config_.max_depth) + 1; }

  double logit(const HyperExample& ex) const;
  double score(const HyperExample& ex) const;

  double loss(std::span<const HyperExample> positives, std::span<const HyperExample> negatives, bool accumulate);
  double train_step(std::span<const HyperExample> positives, std::span<const HyperExample> negatives,
                    double learning_rate, double clip_norm = 0.0);

  /// Mean of the token embedding rows of `tokens`.
  Vector mean_token_embedding(std::span<const TokenId> tokens) const;

 private:
  struct ExampleCache;
  Vector combined(const HyperExample& ex, ExampleCache* cache) const;
  void backward(double grad_logit, const HyperExample& ex, const ExampleCache& cache);
  std::size_t position_index(PositionRole role, int depth) const;

  HyperDiscConfig config_;
  ParamStore params_;
};

Vector encode_concept(std::span<const TokenId> tokens, const HyperDisc& disc);
/// Anchor role requires `id` in `t`; query role ignores the taxonomy.
Vector position_feature(PositionRole role, const Taxonomy& t, std::optional<ConceptId> id, const HyperDisc& disc);
double hyper_score(Label label, ConceptId anchor, std::span<const TokenId> query, const Taxonomy& t,
                   const HyperDisc& disc);

/// One BCE step on both batches; returns the loss before the update.
double disc_train_step(std::span<const TokenSeq> positives, std::span<const TokenSeq> negatives,
                       RolloutDisc& disc, double learning_rate, double clip_norm = 0.0);
double disc_train_step(std::span<const HyperExample> positives, std::span<const HyperExample> negatives,
                       HyperDisc& disc, double learning_rate, double clip_norm = 0.0);

}  // namespace taxogate
