#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "taxogate/discriminators.hpp"
#include "taxogate/generator.hpp"
#include "taxogate/taxonomy.hpp"

namespace taxogate {

enum class Ablation { none, no_hyper, no_rollout, no_adversarial };
enum class RolloutPolicy { current, frozen_copy };
/// What the rollout discriminator reads: the query text alone, or the
/// generation context followed by the query.
enum class RolloutInput { query, context };
enum class GeneratedLabel { treat_as_negative, treat_as_positive };

std::string_view ablation_name(Ablation a) noexcept;

struct TrainerConfig {
  std::size_t n_rollouts = 8;
  std::size_t g_steps = 1;
  std::size_t d_steps = 1;
  std::size_t adversarial_epochs = 4;
  std::size_t batch_size = 16;
  std::size_t negative_sample_size = 256;
  double noise_mix_ratio = 0.5;
  std::size_t patience = 3;
  std::uint64_t seed = 0;

  std::size_t pretrain_epochs = 4;
  std::size_t pretrain_generator_steps = 1200;  // total over all pretraining epochs
  std::size_t pretrain_disc_rounds = 96;        // total d-phase rounds over all epochs
  double negative_triple_fraction = 0.5;        // share of NEG-label triples in MLE batches

  double generator_lr = 1.0;
  double policy_lr = 0.01;
  double disc_lr = 0.3;
  double clip_norm = 5.0;

  double accept_threshold = 0.7;
  RewardBaseline reward_baseline = RewardBaseline::none;
  RolloutPolicy rollout_policy = RolloutPolicy::current;
  RolloutInput rollout_input = RolloutInput::query;
  bool q_literal = false;
  Ablation ablation = Ablation::none;
  SamplingOptions sampling;
  std::size_t threads = 1;
};

/// Throws std::invalid_argument naming the first field that breaks a
/// precondition.
void validate(const TrainerConfig& config);

struct ModelSet {
  Generator generator;
  RolloutDisc rollout;
  HyperDisc hyper;
};

/// Sequence the rollout discriminator reads for `query` generated after `ctx`.
TokenSeq rollout_view(RolloutInput input, const GenerationContext& ctx, const TokenSeq& query);

/// Reward sources for the action-value function. `rollout` scores each
/// finished Monte Carlo completion, `terminal` scores the finished trajectory.
struct RewardModel {
  std::function<double(const Trajectory&)> rollout;
  std::function<double(const Trajectory&)> terminal;
};

/// Standard wiring: D_R on completions and D_H at the end, with the ablations
/// substituting the remaining discriminator. Empty queries score 0.
RewardModel make_reward_model(const ModelSet& models, const Taxonomy& t, const TrainerConfig& config);

/// Q for emitting token t (1-based) of `traj`, whose length is T.
///   t <  T : mean of `rollout` over n completions of Y_{1:t}
///   t == T : `terminal` of the trajectory itself
/// With `literal` the t < T case scores the prefix Y_{1:t-1} directly.
double action_value(const Trajectory& traj, std::size_t t, std::size_t n, const Generator& policy,
                    const RewardModel& reward, const SamplingOptions& opt, std::uint64_t seed,
                    bool literal = false);

RewardTrace compute_reward_trace(const Trajectory& traj, std::size_t n, const Generator& policy,
                                 const RewardModel& reward, const SamplingOptions& opt, std::uint64_t seed,
                                 bool literal = false);

/// One trace per trajectory, computed on up to `threads` workers. Trajectory
/// b always uses derive_seed(seed, b), so the result is thread-count free.
std::vector<RewardTrace> compute_rewards(std::span<const Trajectory> batch, std::size_t n, const Generator& policy,
                                         const RewardModel& reward, const SamplingOptions& opt, std::uint64_t seed,
                                         bool literal = false, std::size_t threads = 1);

/// Exactly n_pos triples: floor(mix * n_pos) from `generated` (with
/// replacement once it runs out), the rest noise strings on random anchors.
std::vector<TrainingTriple> compose_negative_pool(const std::vector<TrainingTriple>& generated,
                                                  const NoiseSource& noise, const Taxonomy& t, std::size_t n_pos,
                                                  double mix_ratio, std::uint64_t seed);

GeneratedLabel generated_label_policy(std::size_t adversarial_epoch);

/// Training pools for one discriminator phase.
struct DiscPools {
  std::vector<TokenSeq> rollout_pos, rollout_neg;
  std::vector<HyperExample> hyper_pos, hyper_neg;
  std::size_t accepted_generated = 0;
};

/// n real pairs from the taxonomy: POS-labelled edges are D_H positives and
/// POS-labelled non-descendant pairs are D_H negatives; every real query is a
/// D_R positive. A pool of n generated and noise triples adds negatives to
/// both. Under treat_as_positive, generated
/// triples that D_H accepts join the positives instead.
DiscPools build_disc_pools(const ModelSet& models, const Taxonomy& t, const TrainerConfig& config,
                           const std::vector<TrainingTriple>& generated, GeneratedLabel policy,
                           const NoiseSource& noise, std::uint64_t seed);

struct DiscLosses {
  double rollout = 0.0;
  double hyper = 0.0;
};

/// One pass over the pools in minibatches; returns mean minibatch losses.
/// Either discriminator may be skipped.
DiscLosses train_discriminators(ModelSet& models, const DiscPools& pools, const TrainerConfig& config,
                                std::uint64_t seed, bool train_rollout = true, bool train_hyper = true);

struct PretrainReport {
  double generator_nll = 0.0;  // mean loss of the final pretraining epoch
  double rollout_loss = 0.0;
  double hyper_loss = 0.0;
};

/// MLE on POS/NEG triples, then discriminator rounds against noise. The hook
/// runs after each pretraining epoch (checkpointing).
PretrainReport pretrain(ModelSet& models, const Taxonomy& t, const TrainerConfig& config, const NoiseSource& noise,
                        const std::function<void(std::size_t epoch)>& after_epoch = {});

/// Trajectories under the positive label, anchors drawn as edge parents.
std::vector<Trajectory> sample_positive_trajectories(const Generator& g, const Taxonomy& t, std::size_t n,
                                                     const SamplingOptions& opt, std::uint64_t seed);

struct EpochReport {
  std::size_t epoch = 0;
  double mean_reward = 0.0;
  double rollout_loss = 0.0;
  double hyper_loss = 0.0;
  std::size_t accepted_generated = 0;
  double wall_seconds = 0.0;
};

EpochReport adversarial_epoch(ModelSet& models, const Taxonomy& t, const TrainerConfig& config,
                              const NoiseSource& noise, std::size_t epoch);

/// True when the best relative drop below history[n - patience] within the
/// last `patience` entries is under 1%.
bool should_stop(std::span<const double> history, std::size_t patience);

/// Runs adversarial epochs until the limit or should_stop on the summed
/// discriminator loss; `on_epoch` sees each report as it is produced.
std::vector<EpochReport> adversarial_train(ModelSet& models, const Taxonomy& t, const TrainerConfig& config,
                                           const NoiseSource& noise,
                                           const std::function<void(const EpochReport&)>& on_epoch = {});

/// How strongly D_H agrees with the triple's label: D_H(POS, a, q) for a
/// positive triple and 1 - D_H(POS, a, q) for a negative one.
double label_agreement(const HyperDisc& hyper, const Taxonomy& t, const TrainingTriple& triple);

/// Samples POS (edge-parent anchors) and NEG (negative-pair anchors) triples
/// in alternation and keeps those with label_agreement >= threshold; at most
/// n_samples are returned out of 4 * n_samples attempts.
std::vector<TrainingTriple> augment_training_set(const Generator& g, const HyperDisc& hyper, const Taxonomy& t,
                                                 std::size_t n_samples, double threshold, std::uint64_t seed,
                                                 const SamplingOptions& opt = {});

/// Query extends the anchor by exactly one token that the anchor lacks.
bool is_compositional_child(const TokenSeq& anchor, const TokenSeq& query);

}  // namespace taxogate
