#include "taxogate/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>
#include <thread>

#include "taxogate/optim.hpp"

namespace taxogate {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("trainer config: ") + what);
}

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

template <typename T>
std::span<const T> slice(const std::vector<T>& v, std::size_t j, std::size_t parts) {
  const std::size_t lo = j * v.size() / parts;
  const std::size_t hi = (j + 1) * v.size() / parts;
  return std::span<const T>(v.data() + lo, hi - lo);
}

HyperExample example_of(const Taxonomy& t, Label label, ConceptId anchor, const TokenSeq& query) {
  return {label, t.concept_of(anchor).tokens, anchor_depth(t, anchor), query};
}

}  // namespace

std::string_view ablation_name(Ablation a) noexcept {
  switch (a) {
    case Ablation::none: return "none";
    case Ablation::no_hyper: return "no_hyper";
    case Ablation::no_rollout: return "no_rollout";
    case Ablation::no_adversarial: return "no_adversarial";
  }
  return "none";
}

void validate(const TrainerConfig& c) {
  require(c.n_rollouts >= 1, "n_rollouts must be >= 1");
  require(c.g_steps >= 1, "g_steps must be >= 1");
  require(c.d_steps >= 1, "d_steps must be >= 1");
  require(c.adversarial_epochs >= 1, "adversarial_epochs must be >= 1");
  require(c.batch_size >= 1, "batch_size must be >= 1");
  require(c.negative_sample_size >= 2, "negative_sample_size must be >= 2");
  require(c.noise_mix_ratio >= 0.0 && c.noise_mix_ratio <= 1.0, "noise_mix_ratio must lie in [0, 1]");
  require(c.patience >= 2, "patience must be >= 2");
  require(c.pretrain_epochs >= 1, "pretrain_epochs must be >= 1");
  require(c.negative_triple_fraction >= 0.0 && c.negative_triple_fraction <= 1.0,
          "negative_triple_fraction must lie in [0, 1]");
  require(c.generator_lr > 0.0 && c.policy_lr >= 0.0 && c.disc_lr > 0.0, "learning rates must be positive");
  require(c.clip_norm >= 0.0, "clip_norm must be >= 0");
  require(c.accept_threshold >= 0.0 && c.accept_threshold <= 1.0, "accept_threshold must lie in [0, 1]");
  require(c.sampling.max_len >= 1, "max_len must be >= 1");
  require(c.sampling.temperature >= 0.0, "temperature must be >= 0");
  require(c.threads >= 1, "threads must be >= 1");
}

TokenSeq rollout_view(RolloutInput input, const GenerationContext& ctx, const TokenSeq& query) {
  if (input == RolloutInput::query) return query;
  TokenSeq seq = ctx.encoded;
  seq.insert(seq.end(), query.begin(), query.end());
  return seq;
}

RewardModel make_reward_model(const ModelSet& models, const Taxonomy& t, const TrainerConfig& config) {
  const RolloutDisc* rd = &models.rollout;
  const HyperDisc* hd = &models.hyper;
  const Taxonomy* tax = &t;
  const RolloutInput input = config.rollout_input;
  auto by_rollout = [rd, input](const Trajectory& tr) {
    const TokenSeq q = tr.query();
    if (q.empty()) return 0.0;
    return rd->score(rollout_view(input, tr.context, q));
  };
  auto by_hyper = [hd, tax](const Trajectory& tr) {
    const TokenSeq q = tr.query();
    if (q.empty()) return 0.0;
    return hd->score({tr.context.label, tr.context.anchor, anchor_depth(*tax, tr.anchor_id), q});
  };
  switch (config.ablation) {
    case Ablation::no_hyper: return {by_rollout, by_rollout};
    case Ablation::no_rollout: return {by_hyper, by_hyper};
    default: return {by_rollout, by_hyper};
  }
}

double action_value(const Trajectory& traj, std::size_t t, std::size_t n, const Generator& policy,
                    const RewardModel& reward, const SamplingOptions& opt, std::uint64_t seed, bool literal) {
  const std::size_t T = traj.emitted();
  if (t < 1 || t > T) throw std::out_of_range("action_value: step outside [1, T]");
  if (t == T) return reward.terminal(traj);

  Trajectory prefix = traj;
  prefix.terminated = false;
  if (literal) {
    prefix.tokens.resize(t - 1);
    prefix.log_probs.resize(t - 1);
    return reward.rollout(prefix);
  }
  prefix.tokens.resize(t);
  prefix.log_probs.resize(t);
  const auto completions = policy.rollout_complete(prefix, n, opt, seed);
  double total = 0.0;
  for (const Trajectory& c : completions) total += reward.rollout(c);
  return total / static_cast<double>(completions.size());
}

RewardTrace compute_reward_trace(const Trajectory& traj, std::size_t n, const Generator& policy,
                                 const RewardModel& reward, const SamplingOptions& opt, std::uint64_t seed,
                                 bool literal) {
  RewardTrace trace;
  trace.q.reserve(traj.emitted());
  for (std::size_t t = 1; t <= traj.emitted(); ++t) {
    trace.q.push_back(action_value(traj, t, n, policy, reward, opt, derive_seed(seed, t), literal));
  }
  return trace;
}

std::vector<RewardTrace> compute_rewards(std::span<const Trajectory> batch, std::size_t n, const Generator& policy,
                                         const RewardModel& reward, const SamplingOptions& opt, std::uint64_t seed,
                                         bool literal, std::size_t threads) {
  std::vector<RewardTrace> out(batch.size());
  auto work = [&](std::size_t b) {
    out[b] = compute_reward_trace(batch[b], n, policy, reward, opt, derive_seed(seed, b), literal);
  };
  const std::size_t workers = std::min(threads, batch.size());
  if (workers <= 1) {
    for (std::size_t b = 0; b < batch.size(); ++b) work(b);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t b = next++; b < batch.size(); b = next++) work(b);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

std::vector<TrainingTriple> compose_negative_pool(const std::vector<TrainingTriple>& generated,
                                                  const NoiseSource& noise, const Taxonomy& t, std::size_t n_pos,
                                                  double mix_ratio, std::uint64_t seed) {
  if (n_pos < 1) throw std::invalid_argument("compose_negative_pool needs n_pos >= 1");
  if (!(mix_ratio >= 0.0 && mix_ratio <= 1.0)) throw InvalidFraction(mix_ratio);
  if (t.size() == 0) throw std::invalid_argument("compose_negative_pool needs a non-empty taxonomy");
  const std::size_t take = generated.empty() ? 0 : fraction_count(mix_ratio, n_pos);

  std::vector<TrainingTriple> out;
  out.reserve(n_pos);
  CounterRng pick(derive_seed(seed, "pool/generated"));
  std::vector<std::size_t> order(generated.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  pick.shuffle(order);
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t idx = i < order.size() ? order[i] : static_cast<std::size_t>(pick.below(order.size()));
    out.push_back(generated[idx]);
  }
  CounterRng anchors(derive_seed(seed, "pool/anchors"));
  CounterRng strings(derive_seed(seed, "pool/noise"));
  while (out.size() < n_pos) {
    const ConceptId a = t.ids()[anchors.below(t.size())];
    out.push_back(make_triple(t, Label::positive, a, noise.draw(strings)));
  }
  return out;
}

GeneratedLabel generated_label_policy(std::size_t adversarial_epoch) {
  if (adversarial_epoch < 1) throw std::invalid_argument("adversarial epochs are numbered from 1");
  return adversarial_epoch == 1 ? GeneratedLabel::treat_as_negative : GeneratedLabel::treat_as_positive;
}

double label_agreement(const HyperDisc& hyper, const Taxonomy& t, const TrainingTriple& triple) {
  TrainingTriple as_positive = triple;
  as_positive.label = Label::positive;
  const double p = hyper.score(resolve_example(t, as_positive));
  return triple.label == Label::positive ? p : 1.0 - p;
}

DiscPools build_disc_pools(const ModelSet& models, const Taxonomy& t, const TrainerConfig& config,
                           const std::vector<TrainingTriple>& generated, GeneratedLabel policy,
                           const NoiseSource& noise, std::uint64_t seed) {
  const std::size_t n = config.negative_sample_size;
  const std::size_t n_neg_pairs = n / 2;
  const auto pos_pairs = sample_positive_pairs(t, n - n_neg_pairs, derive_seed(seed, "pools/positive"));
  std::vector<ConceptPair> neg_pairs;
  try {
    neg_pairs = sample_negative_pairs(t, n_neg_pairs, derive_seed(seed, "pools/negative"));
  } catch (const NoNegativesAvailable&) {
    // Chains and stars may admit no negative pair; the edge half suffices.
  }

  // D_H sees every real pair under the positive label: edges are true,
  // non-descendant pairs are false. Label-flipped twins are not used, since
  // the additive score shifts both members of a twin pair by the same label
  // offset and they would cancel.
  DiscPools pools;
  for (const ConceptPair& p : pos_pairs) {
    const TokenSeq& q = t.concept_of(p.child).tokens;
    pools.hyper_pos.push_back(example_of(t, Label::positive, p.parent, q));
    pools.rollout_pos.push_back(
        rollout_view(config.rollout_input, encode_context(Label::positive, t.concept_of(p.parent).tokens), q));
  }
  for (const ConceptPair& p : neg_pairs) {
    const TokenSeq& q = t.concept_of(p.child).tokens;
    pools.hyper_neg.push_back(example_of(t, Label::positive, p.parent, q));
    pools.rollout_pos.push_back(
        rollout_view(config.rollout_input, encode_context(Label::negative, t.concept_of(p.parent).tokens), q));
  }

  std::vector<TrainingTriple> usable;
  for (const TrainingTriple& g : generated) {
    if (!g.query.empty()) usable.push_back(g);
  }
  const std::size_t n_generated = usable.empty() ? 0 : fraction_count(config.noise_mix_ratio, n);
  const auto pool = compose_negative_pool(usable, noise, t, n, usable.empty() ? 0.0 : config.noise_mix_ratio,
                                          derive_seed(seed, "pools/compose"));
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const TrainingTriple& tr = pool[i];
    if (tr.query.empty()) continue;
    const HyperExample ex = resolve_example(t, tr);
    const TokenSeq view = rollout_view(config.rollout_input, encode_context(tr.label, tr.anchor), tr.query);
    const bool is_generated = i < n_generated;
    if (is_generated && policy == GeneratedLabel::treat_as_positive &&
        models.hyper.score(ex) >= config.accept_threshold) {
      pools.hyper_pos.push_back(ex);
      pools.rollout_pos.push_back(view);
      ++pools.accepted_generated;
    } else {
      pools.hyper_neg.push_back(ex);
      pools.rollout_neg.push_back(view);
    }
  }
  return pools;
}

DiscLosses train_discriminators(ModelSet& models, const DiscPools& pools, const TrainerConfig& config,
                                std::uint64_t seed, bool train_rollout, bool train_hyper) {
  DiscLosses out;
  auto shuffled = [seed](auto items, const char* label) {
    CounterRng rng(derive_seed(seed, label));
    rng.shuffle(items);
    return items;
  };
  if (train_rollout && !pools.rollout_pos.empty() && !pools.rollout_neg.empty()) {
    const auto pos = shuffled(pools.rollout_pos, "disc/rollout/pos");
    const auto neg = shuffled(pools.rollout_neg, "disc/rollout/neg");
    const std::size_t m = std::min(ceil_div(pos.size(), config.batch_size), neg.size());
    for (std::size_t j = 0; j < m; ++j) {
      out.rollout += models.rollout.train_step(slice(pos, j, m), slice(neg, j, m), config.disc_lr, config.clip_norm);
    }
    out.rollout /= static_cast<double>(m);
  }
  if (train_hyper && !pools.hyper_pos.empty() && !pools.hyper_neg.empty()) {
    const auto pos = shuffled(pools.hyper_pos, "disc/hyper/pos");
    const auto neg = shuffled(pools.hyper_neg, "disc/hyper/neg");
    const std::size_t m = std::min(ceil_div(pos.size(), config.batch_size), neg.size());
    for (std::size_t j = 0; j < m; ++j) {
      out.hyper += models.hyper.train_step(slice(pos, j, m), slice(neg, j, m), config.disc_lr, config.clip_norm);
    }
    out.hyper /= static_cast<double>(m);
  }
  return out;
}

PretrainReport pretrain(ModelSet& models, const Taxonomy& t, const TrainerConfig& config, const NoiseSource& noise,
                        const std::function<void(std::size_t epoch)>& after_epoch) {
  validate(config);
  const std::uint64_t base = derive_seed(config.seed, "pretrain");
  const std::size_t n_neg = static_cast<std::size_t>(
      std::llround(config.negative_triple_fraction * static_cast<double>(config.batch_size)));
  const std::size_t n_pos = config.batch_size - n_neg;
  const std::size_t steps = config.pretrain_generator_steps;
  const auto pos_pairs = sample_positive_pairs(t, std::max<std::size_t>(1, steps * n_pos), derive_seed(base, "gen/positive"));
  std::vector<ConceptPair> neg_pairs;
  if (n_neg > 0) {
    try {
      neg_pairs = sample_negative_pairs(t, steps * n_neg, derive_seed(base, "gen/negative"));
    } catch (const NoNegativesAvailable&) {
    }
  }

  PretrainReport report;
  PlateauScheduler schedule(config.generator_lr);
  const std::size_t steps_per_epoch = ceil_div(steps, config.pretrain_epochs);
  const std::size_t rounds_per_epoch = ceil_div(config.pretrain_disc_rounds, config.pretrain_epochs);
  constexpr std::size_t kEvalEvery = 25;
  std::size_t step = 0;
  std::size_t round = 0;
  double window = 0.0;
  std::size_t window_count = 0;
  for (std::size_t epoch = 1; epoch <= config.pretrain_epochs; ++epoch) {
    double epoch_loss = 0.0;
    std::size_t epoch_steps = 0;
    for (std::size_t s = 0; s < steps_per_epoch && step < steps; ++s, ++step) {
      std::vector<TrainingTriple> batch;
      batch.reserve(config.batch_size);
      for (std::size_t i = 0; i < n_pos; ++i) batch.push_back(make_triple(t, Label::positive, pos_pairs[step * n_pos + i]));
      if (!neg_pairs.empty()) {
        for (std::size_t i = 0; i < n_neg; ++i) batch.push_back(make_triple(t, Label::negative, neg_pairs[step * n_neg + i]));
      }
      const double loss = models.generator.mle_pretrain_step(batch, schedule.learning_rate(), config.clip_norm);
      epoch_loss += loss;
      ++epoch_steps;
      window += loss;
      if (++window_count == kEvalEvery) {
        schedule.observe(window / static_cast<double>(window_count));
        window = 0.0;
        window_count = 0;
      }
    }
    if (epoch_steps > 0) report.generator_nll = epoch_loss / static_cast<double>(epoch_steps);

    for (std::size_t r = 0; r < rounds_per_epoch && round < config.pretrain_disc_rounds; ++r, ++round) {
      const std::uint64_t rs = derive_seed(derive_seed(base, "disc"), round);
      const DiscPools pools = build_disc_pools(models, t, config, {}, GeneratedLabel::treat_as_negative, noise, rs);
      const DiscLosses l = train_discriminators(models, pools, config, rs);
      report.rollout_loss = l.rollout;
      report.hyper_loss = l.hyper;
    }
    if (after_epoch) after_epoch(epoch);
  }
  return report;
}

std::vector<Trajectory> sample_positive_trajectories(const Generator& g, const Taxonomy& t, std::size_t n,
                                                     const SamplingOptions& opt, std::uint64_t seed) {
  std::vector<Trajectory> out;
  if (n == 0) return out;
  const auto pairs = sample_positive_pairs(t, n, derive_seed(seed, "trajectories/anchors"));
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const ConceptId a = pairs[i].parent;
    out.push_back(g.sample_query(encode_context(Label::positive, t.concept_of(a).tokens), opt, derive_seed(seed, i), a));
  }
  return out;
}

EpochReport adversarial_epoch(ModelSet& models, const Taxonomy& t, const TrainerConfig& config,
                              const NoiseSource& noise, std::size_t epoch) {
  if (config.ablation == Ablation::no_adversarial) {
    throw std::logic_error("adversarial_epoch called with the adversarial stage ablated");
  }
  const auto start = std::chrono::steady_clock::now();
  const std::uint64_t seed = derive_seed(derive_seed(config.seed, "adversarial"), epoch);
  EpochReport report;
  report.epoch = epoch;

  // A frozen copy is taken once per epoch; the current policy is read live.
  std::optional<Generator> frozen;
  if (config.rollout_policy == RolloutPolicy::frozen_copy) frozen.emplace(models.generator);
  const RewardModel reward = make_reward_model(models, t, config);

  double reward_total = 0.0;
  std::size_t reward_count = 0;
  for (std::size_t s = 0; s < config.g_steps; ++s) {
    const std::uint64_t gs = derive_seed(derive_seed(seed, "g"), s);
    const auto trajs = sample_positive_trajectories(models.generator, t, config.batch_size, config.sampling, gs);
    const Generator& policy = frozen ? *frozen : models.generator;
    const auto rewards = compute_rewards(trajs, config.n_rollouts, policy, reward, config.sampling,
                                         derive_seed(gs, "rewards"), config.q_literal, config.threads);
    for (const RewardTrace& r : rewards) {
      reward_total += r.terminal();
      ++reward_count;
    }
    models.generator.pg_update(trajs, rewards, config.policy_lr, config.reward_baseline, config.clip_norm);
  }
  report.mean_reward = reward_count ? reward_total / static_cast<double>(reward_count) : 0.0;

  const GeneratedLabel policy = generated_label_policy(epoch);
  double rl = 0.0, hl = 0.0;
  for (std::size_t s = 0; s < config.d_steps; ++s) {
    const std::uint64_t ds = derive_seed(derive_seed(seed, "d"), s);
    const std::size_t want = fraction_count(config.noise_mix_ratio, config.negative_sample_size);
    std::vector<TrainingTriple> generated;
    for (const Trajectory& tr : sample_positive_trajectories(models.generator, t, want, config.sampling, ds)) {
      generated.push_back({Label::positive, tr.anchor_id, tr.context.anchor, tr.query()});
    }
    const DiscPools pools = build_disc_pools(models, t, config, generated, policy, noise, ds);
    report.accepted_generated += pools.accepted_generated;
    const DiscLosses l = train_discriminators(models, pools, config, ds, config.ablation != Ablation::no_rollout,
                                              config.ablation != Ablation::no_hyper);
    rl += l.rollout;
    hl += l.hyper;
  }
  report.rollout_loss = rl / static_cast<double>(config.d_steps);
  report.hyper_loss = hl / static_cast<double>(config.d_steps);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

bool should_stop(std::span<const double> history, std::size_t patience) {
  if (patience < 2) throw std::invalid_argument("should_stop needs patience >= 2");
  if (history.size() < patience) return false;
  const double ref = history[history.size() - patience];
  double best = ref;
  for (std::size_t i = history.size() - patience + 1; i < history.size(); ++i) best = std::min(best, history[i]);
  const double scale = std::max(std::abs(ref), 1e-12);
  return (ref - best) / scale < 0.01;
}

std::vector<EpochReport> adversarial_train(ModelSet& models, const Taxonomy& t, const TrainerConfig& config,
                                           const NoiseSource& noise,
                                           const std::function<void(const EpochReport&)>& on_epoch) {
  validate(config);
  std::vector<EpochReport> reports;
  if (config.ablation == Ablation::no_adversarial) return reports;
  std::vector<double> history;
  for (std::size_t e = 1; e <= config.adversarial_epochs; ++e) {
    reports.push_back(adversarial_epoch(models, t, config, noise, e));
    if (on_epoch) on_epoch(reports.back());
    history.push_back(reports.back().rollout_loss + reports.back().hyper_loss);
    if (should_stop(history, config.patience)) break;
  }
  return reports;
}

std::vector<TrainingTriple> augment_training_set(const Generator& g, const HyperDisc& hyper, const Taxonomy& t,
                                                 std::size_t n_samples, double threshold, std::uint64_t seed,
                                                 const SamplingOptions& opt) {
  std::vector<TrainingTriple> out;
  if (n_samples == 0) return out;
  const std::size_t attempts = 4 * n_samples;
  const std::size_t half = ceil_div(attempts, 2);
  const auto pos = sample_positive_pairs(t, half, derive_seed(seed, "augment/positive"));
  std::vector<ConceptPair> neg;
  try {
    neg = sample_negative_pairs(t, half, derive_seed(seed, "augment/negative"));
  } catch (const NoNegativesAvailable&) {
  }
  for (std::size_t i = 0; i < attempts && out.size() < n_samples; ++i) {
    const bool positive = (i % 2 == 0) || neg.empty();
    const Label label = positive ? Label::positive : Label::negative;
    const ConceptId anchor = positive ? pos[(i / 2) % pos.size()].parent : neg[(i / 2) % neg.size()].parent;
    const Trajectory tr =
        g.sample_query(encode_context(label, t.concept_of(anchor).tokens), opt, derive_seed(seed, i), anchor);
    TrainingTriple triple{label, anchor, tr.context.anchor, tr.query()};
    if (triple.query.empty()) continue;
    if (label_agreement(hyper, t, triple) >= threshold) out.push_back(std::move(triple));
  }
  return out;
}

bool is_compositional_child(const TokenSeq& anchor, const TokenSeq& query) {
  if (query.size() != anchor.size() + 1) return false;
  if (!std::equal(anchor.begin(), anchor.end(), query.begin())) return false;
  return std::find(anchor.begin(), anchor.end(), query.back()) == anchor.end();
}

}  // namespace taxogate
