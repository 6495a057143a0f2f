#include "taxogate/generator.hpp"

#include <cmath>
#include <string>

#include "taxogate/optim.hpp"

namespace taxogate {

namespace {

std::string block_name(int l, const char* leaf) { return "block" + std::to_string(l) + "." + leaf; }

double log_sum_exp(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  const double peak = row.maxCoeff();
  return peak + std::log((row.array() - peak).exp().sum());
}

/// Index of the largest entry; the lowest id wins ties.
TokenId argmax(const Eigen::RowVectorXd& row) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < row.size(); ++i) {
    if (row[i] > row[best]) best = i;
  }
  return static_cast<TokenId>(best);
}

TokenId draw(const Eigen::RowVectorXd& logits, double temperature, CounterRng& rng) {
  if (temperature <= 0.0) return argmax(logits);
  Eigen::RowVectorXd p = logits / temperature;
  p = (p.array() - p.maxCoeff()).exp();
  const double u = rng.uniform() * p.sum();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return static_cast<TokenId>(i);
  }
  // Rounding can leave u just above the running total; fall back to the last
  // token with nonzero mass.
  for (Eigen::Index i = p.size() - 1; i > 0; --i) {
    if (p[i] > 0.0) return static_cast<TokenId>(i);
  }
  return 0;
}

}  // namespace

GenerationContext encode_context(Label label, const TokenSeq& anchor) {
  if (anchor.empty()) throw EmptyAnchor();
  GenerationContext ctx;
  ctx.label = label;
  ctx.anchor = anchor;
  ctx.encoded.reserve(anchor.size() + 2);
  ctx.encoded.push_back(label_token(label));
  ctx.encoded.insert(ctx.encoded.end(), anchor.begin(), anchor.end());
  ctx.encoded.push_back(tokens::kSep);
  return ctx;
}

TokenSeq strip_context(const TokenSeq& encoded) {
  if (encoded.size() < 2 || (encoded.front() != tokens::kPositive && encoded.front() != tokens::kNegative) ||
      encoded.back() != tokens::kSep) {
    throw std::invalid_argument("sequence is not a framed generation context");
  }
  return TokenSeq(encoded.begin() + 1, encoded.end() - 1);
}

TokenSeq Trajectory::query() const {
  TokenSeq out = tokens;
  if (!out.empty() && out.back() == tokens::kEos) out.pop_back();
  return out;
}

WeightedSequence triple_sequence(const TrainingTriple& triple) {
  WeightedSequence ws;
  ws.tokens = encode_context(triple.label, triple.anchor).encoded;
  ws.first_target = ws.tokens.size();
  ws.tokens.insert(ws.tokens.end(), triple.query.begin(), triple.query.end());
  ws.tokens.push_back(tokens::kEos);
  ws.weights.assign(ws.tokens.size() - ws.first_target, 1.0);
  return ws;
}

// ---------------------------------------------------------------------------

struct Generator::DecodeState {
  std::vector<KeyValueCache> layers;
  Eigen::Index position = 0;
};

struct Generator::ForwardCache {
  TokenSeq tokens;
  std::vector<AttentionCache> attention;
  std::vector<FeedForwardCache> ffn;
  Matrix final_states;
};

Generator::Generator(const GeneratorConfig& config)
    : config_(config), params_(config.seed, InitSpec{config.init_range}) {
  build_params();
}

Generator::Generator(const GeneratorConfig& config, ParamStore params)
    : config_(config), params_(std::move(params)) {
  Generator reference(config);
  const auto& want = reference.params().tensors();
  const auto& got = params_.tensors();
  if (want.size() != got.size()) throw ShapeMismatch("generator checkpoint has the wrong tensor set");
  for (const auto& [name, t] : want) {
    const auto it = got.find(name);
    if (it == got.end() || it->second.shape != t.shape) {
      throw ShapeMismatch("generator checkpoint tensor " + name + " missing or misshaped");
    }
  }
}

void Generator::build_params() {
  const auto v = config_.vocab_size;
  const auto d = static_cast<std::size_t>(config_.width);
  if (v <= static_cast<std::size_t>(tokens::kFirstSurfaceToken)) {
    throw std::invalid_argument("generator vocabulary has no surface tokens");
  }
  if (config_.width < 1 || config_.heads < 1 || config_.width % config_.heads != 0) {
    throw ShapeMismatch("generator width must be a positive multiple of the head count");
  }
  if (config_.blocks < 1 || config_.context < 2) throw std::invalid_argument("generator needs >= 1 block and context >= 2");
  params_.add("tok_embed", {v, d});
  params_.add("pos_embed", {static_cast<std::size_t>(config_.context), d});
  for (int l = 0; l < config_.blocks; ++l) {
    params_.add(block_name(l, "wq"), {d, d});
    params_.add(block_name(l, "wk"), {d, d});
    params_.add(block_name(l, "wv"), {d, d});
    if (config_.feed_forward) {
      const auto f = static_cast<std::size_t>(config_.ff_width);
      params_.add(block_name(l, "ff1.w"), {f, d});
      params_.add(block_name(l, "ff1.b"), {f});
      params_.add(block_name(l, "ff2.w"), {d, f});
      params_.add(block_name(l, "ff2.b"), {d});
    }
  }
  params_.add("out.w", {v, d});
  params_.add("out.b", {v});
}

void Generator::check_vocab(std::span<const TokenId> seq) const {
  for (const TokenId t : seq) {
    if (t < 0 || static_cast<std::size_t>(t) >= config_.vocab_size) {
      throw std::out_of_range("token id " + std::to_string(t) + " outside the generator vocabulary");
    }
  }
}

Matrix Generator::forward(std::span<const TokenId> seq, ForwardCache* cache) const {
  const auto n = static_cast<Eigen::Index>(seq.size());
  if (n == 0) throw std::invalid_argument("generator input is empty");
  if (n > config_.context) {
    throw PrefixTooLong("sequence of " + std::to_string(n) + " tokens exceeds context " +
                        std::to_string(config_.context));
  }
  check_vocab(seq);
  const auto embed = params_.at("tok_embed").mat();
  const auto pos = params_.at("pos_embed").mat();
  Matrix h(n, config_.width);
  for (Eigen::Index i = 0; i < n; ++i) h.row(i) = embed.row(seq[static_cast<std::size_t>(i)]) + pos.row(i);

  const AttentionOptions opt{config_.heads, true, true};
  if (cache) {
    cache->tokens.assign(seq.begin(), seq.end());
    cache->attention.assign(static_cast<std::size_t>(config_.blocks), {});
    cache->ffn.assign(config_.feed_forward ? static_cast<std::size_t>(config_.blocks) : 0, {});
  }
  for (int l = 0; l < config_.blocks; ++l) {
    const AttentionWeights w{params_.at(block_name(l, "wq")), params_.at(block_name(l, "wk")),
                             params_.at(block_name(l, "wv"))};
    h = attention_block(h, w, opt, cache ? &cache->attention[static_cast<std::size_t>(l)] : nullptr);
    if (config_.feed_forward) {
      h = feed_forward(h, params_.at(block_name(l, "ff1.w")), params_.at(block_name(l, "ff1.b")),
                       params_.at(block_name(l, "ff2.w")), params_.at(block_name(l, "ff2.b")),
                       cache ? &cache->ffn[static_cast<std::size_t>(l)] : nullptr);
    }
  }
  Matrix logits = affine_rows(h, params_.at("out.w"), params_.at("out.b"));
  if (cache) cache->final_states = std::move(h);
  return logits;
}

void Generator::backward(const Matrix& grad_logits, const ForwardCache& cache) {
  Matrix dh = affine_rows_backward(cache.final_states, grad_logits, params_.at("out.w"), params_.at("out.b"));
  const AttentionOptions opt{config_.heads, true, true};
  for (int l = config_.blocks - 1; l >= 0; --l) {
    const auto li = static_cast<std::size_t>(l);
    if (config_.feed_forward) {
      dh = feed_forward_backward(dh, cache.ffn[li], params_.at(block_name(l, "ff1.w")),
                                 params_.at(block_name(l, "ff1.b")), params_.at(block_name(l, "ff2.w")),
                                 params_.at(block_name(l, "ff2.b")));
    }
    ParamTensor& wq = params_.at(block_name(l, "wq"));
    ParamTensor& wk = params_.at(block_name(l, "wk"));
    ParamTensor& wv = params_.at(block_name(l, "wv"));
    dh = attention_block_backward(dh, cache.attention[li], AttentionWeights{wq, wk, wv},
                                  AttentionGrads{wq, wk, wv}, opt);
  }
  auto g_embed = params_.at("tok_embed").grad_mat();
  auto g_pos = params_.at("pos_embed").grad_mat();
  for (Eigen::Index i = 0; i < dh.rows(); ++i) {
    g_embed.row(cache.tokens[static_cast<std::size_t>(i)]) += dh.row(i);
    g_pos.row(i) += dh.row(i);
  }
}

Matrix Generator::logits(std::span<const TokenId> sequence) const { return forward(sequence, nullptr); }

std::vector<double> Generator::next_token_distribution(std::span<const TokenId> prefix) const {
  if (prefix.empty()) throw std::invalid_argument("next_token_distribution needs a non-empty prefix");
  const Matrix z = forward(prefix, nullptr);
  const Eigen::RowVectorXd last = z.row(z.rows() - 1);
  return softmax(std::span<const double>(last.data(), static_cast<std::size_t>(last.size())));
}

Eigen::RowVectorXd Generator::decode_step(DecodeState& state, TokenId token) const {
  if (state.position >= config_.context) {
    throw PrefixTooLong("decoding past context " + std::to_string(config_.context));
  }
  if (token < 0 || static_cast<std::size_t>(token) >= config_.vocab_size) {
    throw std::out_of_range("token id " + std::to_string(token) + " outside the generator vocabulary");
  }
  if (state.layers.empty()) state.layers.resize(static_cast<std::size_t>(config_.blocks));
  Eigen::RowVectorXd h = params_.at("tok_embed").mat().row(token) + params_.at("pos_embed").mat().row(state.position);
  const AttentionOptions opt{config_.heads, true, true};
  for (int l = 0; l < config_.blocks; ++l) {
    const AttentionWeights w{params_.at(block_name(l, "wq")), params_.at(block_name(l, "wk")),
                             params_.at(block_name(l, "wv"))};
    h = attention_step(h, w, opt, state.layers[static_cast<std::size_t>(l)]);
    if (config_.feed_forward) {
      const Matrix row = h;
      h = feed_forward(row, params_.at(block_name(l, "ff1.w")), params_.at(block_name(l, "ff1.b")),
                       params_.at(block_name(l, "ff2.w")), params_.at(block_name(l, "ff2.b")))
              .row(0);
    }
  }
  ++state.position;
  return (params_.at("out.w").mat() * h.transpose() + params_.at("out.b").vec()).transpose();
}

void Generator::continue_sampling(DecodeState& state, Eigen::RowVectorXd logits, Trajectory& traj,
                                  const SamplingOptions& opt, CounterRng& rng) const {
  while (!traj.terminated && traj.tokens.size() < static_cast<std::size_t>(opt.max_len)) {
    const TokenId tok = draw(logits, opt.temperature, rng);
    traj.tokens.push_back(tok);
    traj.log_probs.push_back(logits[tok] - log_sum_exp(logits));
    if (tok == tokens::kEos) {
      traj.terminated = true;
      break;
    }
    if (traj.tokens.size() < static_cast<std::size_t>(opt.max_len)) logits = decode_step(state, tok);
  }
}

Trajectory Generator::sample_query(const GenerationContext& ctx, const SamplingOptions& opt,
                                   std::uint64_t seed, ConceptId anchor_id) const {
  if (opt.max_len < 1) throw std::invalid_argument("max_len must be at least 1");
  if (!(opt.temperature >= 0.0)) throw std::invalid_argument("temperature must be non-negative");
  if (ctx.encoded.size() + static_cast<std::size_t>(opt.max_len) > static_cast<std::size_t>(config_.context) + 1) {
    throw PrefixTooLong("context plus max_len exceeds the generator context window");
  }
  Trajectory traj;
  traj.context = ctx;
  traj.anchor_id = anchor_id;
  DecodeState state;
  Eigen::RowVectorXd logits;
  for (const TokenId t : ctx.encoded) logits = decode_step(state, t);
  CounterRng rng(seed);
  continue_sampling(state, std::move(logits), traj, opt, rng);
  return traj;
}

std::vector<Trajectory> Generator::rollout_complete(const Trajectory& partial, std::size_t n,
                                                    const SamplingOptions& opt, std::uint64_t seed) const {
  if (partial.terminated) throw AlreadyTerminated();
  if (n == 0) throw std::invalid_argument("rollout count must be at least 1");
  if (partial.tokens.size() >= static_cast<std::size_t>(opt.max_len)) {
    return std::vector<Trajectory>(n, partial);
  }
  // The shared prefix is encoded once; each completion copies the cache.
  DecodeState prefix;
  Eigen::RowVectorXd logits;
  for (const TokenId t : partial.context.encoded) logits = decode_step(prefix, t);
  for (const TokenId t : partial.tokens) logits = decode_step(prefix, t);

  std::vector<Trajectory> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Trajectory traj = partial;
    DecodeState state = prefix;
    CounterRng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    continue_sampling(state, logits, traj, opt, rng);
    out.push_back(std::move(traj));
  }
  return out;
}

double Generator::weighted_nll(std::span<const WeightedSequence> batch, bool accumulate) {
  double total = 0.0;
  for (const WeightedSequence& ws : batch) {
    if (ws.first_target < 1 || ws.first_target > ws.tokens.size() ||
        ws.weights.size() != ws.tokens.size() - ws.first_target) {
      throw std::invalid_argument("weighted sequence has inconsistent target weights");
    }
    if (ws.weights.empty()) continue;
    // Row i predicts token i + 1, so the final token is never fed.
    const std::span<const TokenId> inputs(ws.tokens.data(), ws.tokens.size() - 1);
    ForwardCache cache;
    const Matrix z = forward(inputs, accumulate ? &cache : nullptr);
    Matrix grad;
    if (accumulate) grad = Matrix::Zero(z.rows(), z.cols());
    for (std::size_t j = ws.first_target; j < ws.tokens.size(); ++j) {
      const auto row = static_cast<Eigen::Index>(j - 1);
      const double w = ws.weights[j - ws.first_target];
      const TokenId target = ws.tokens[j];
      const double lse = log_sum_exp(z.row(row));
      total += w * (lse - z(row, target));
      if (accumulate && w != 0.0) {
        grad.row(row) = w * (z.row(row).array() - lse).exp().matrix();
        grad(row, target) -= w;
      }
    }
    if (accumulate) backward(grad, cache);
  }
  return total;
}

double Generator::mle_loss(std::span<const TrainingTriple> batch, bool accumulate) {
  if (batch.empty()) throw EmptyBatch();
  std::vector<WeightedSequence> seqs;
  seqs.reserve(batch.size());
  std::size_t targets = 0;
  for (const TrainingTriple& t : batch) {
    seqs.push_back(triple_sequence(t));
    targets += seqs.back().weights.size();
  }
  const double w = 1.0 / static_cast<double>(targets);
  for (auto& s : seqs) s.weights.assign(s.weights.size(), w);
  return weighted_nll(seqs, accumulate);
}

double Generator::mle_pretrain_step(std::span<const TrainingTriple> batch, double learning_rate,
                                    double clip_norm) {
  params_.zero_grad();
  const double loss = mle_loss(batch, true);
  if (clip_norm > 0.0) clip_grad_norm(params_, clip_norm);
  sgd_step(params_, learning_rate);
  return loss;
}

double Generator::policy_surrogate(std::span<const Trajectory> batch, std::span<const RewardTrace> rewards,
                                   RewardBaseline baseline, bool accumulate) {
  if (batch.empty()) throw EmptyBatch();
  if (rewards.size() != batch.size()) {
    throw MissingRewards("got " + std::to_string(rewards.size()) + " reward traces for " +
                         std::to_string(batch.size()) + " trajectories");
  }
  double mean_q = 0.0;
  std::size_t count = 0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    if (rewards[b].q.size() != batch[b].tokens.size()) {
      throw MissingRewards("trajectory " + std::to_string(b) + " has " + std::to_string(batch[b].tokens.size()) +
                           " tokens but " + std::to_string(rewards[b].q.size()) + " action values");
    }
    for (const double q : rewards[b].q) mean_q += q;
    count += rewards[b].q.size();
  }
  const double shift = (baseline == RewardBaseline::mean && count > 0) ? mean_q / static_cast<double>(count) : 0.0;
  const double scale = 1.0 / static_cast<double>(batch.size());

  std::vector<WeightedSequence> seqs;
  seqs.reserve(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    WeightedSequence ws;
    ws.tokens = batch[b].context.encoded;
    ws.first_target = ws.tokens.size();
    ws.tokens.insert(ws.tokens.end(), batch[b].tokens.begin(), batch[b].tokens.end());
    for (const double q : rewards[b].q) ws.weights.push_back((q - shift) * scale);
    seqs.push_back(std::move(ws));
  }
  return weighted_nll(seqs, accumulate);
}

void Generator::pg_update(std::span<const Trajectory> batch, std::span<const RewardTrace> rewards,
                          double learning_rate, RewardBaseline baseline, double clip_norm) {
  params_.zero_grad();
  policy_surrogate(batch, rewards, baseline, true);
  if (clip_norm > 0.0) clip_grad_norm(params_, clip_norm);
  sgd_step(params_, learning_rate);
}

double Generator::mean_log_prob(const GenerationContext& ctx, const TokenSeq& query) const {
  TokenSeq seq = ctx.encoded;
  seq.insert(seq.end(), query.begin(), query.end());
  seq.push_back(tokens::kEos);
  const Matrix z = forward(std::span<const TokenId>(seq.data(), seq.size() - 1), nullptr);
  double total = 0.0;
  for (std::size_t j = ctx.encoded.size(); j < seq.size(); ++j) {
    const auto row = static_cast<Eigen::Index>(j - 1);
    total += z(row, seq[j]) - log_sum_exp(z.row(row));
  }
  return total / static_cast<double>(query.size() + 1);
}

}  // namespace taxogate
