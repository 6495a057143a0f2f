#include "taxogate/discriminators.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "taxogate/optim.hpp"

namespace taxogate {

namespace {

void check_shapes(const ParamStore& reference, const ParamStore& got, const char* what) {
  const auto& want = reference.tensors();
  if (want.size() != got.tensors().size()) {
    throw ShapeMismatch(std::string(what) + " checkpoint has the wrong tensor set");
  }
  for (const auto& [name, t] : want) {
    if (!got.contains(name) || got.at(name).shape != t.shape) {
      throw ShapeMismatch(std::string(what) + " checkpoint tensor " + name + " missing or misshaped");
    }
  }
}

void check_tokens(std::span<const TokenId> seq, std::size_t vocab) {
  if (seq.empty()) throw EmptySequence();
  for (const TokenId t : seq) {
    if (t < 0 || static_cast<std::size_t>(t) >= vocab) {
      throw std::out_of_range("token id " + std::to_string(t) + " outside the discriminator vocabulary");
    }
  }
}

// BCE terms in logit form: -log sigmoid(z) and -log(1 - sigmoid(z)).
double nll_positive(double z) { return -log_sigmoid(z); }
double nll_negative(double z) { return -log_sigmoid(-z); }

}  // namespace

// ---------------------------------------------------------------------------
// RolloutDisc

RolloutDisc::RolloutDisc(const RolloutDiscConfig& config)
    : config_(config), params_(config.seed, InitSpec{config.init_range}) {
  if (config.vocab_size == 0 || config.embed < 1 || config.hidden < 1) {
    throw std::invalid_argument("rollout discriminator needs a vocabulary and positive widths");
  }
  const auto v = config.vocab_size;
  const auto e = static_cast<std::size_t>(config.embed);
  const auto h = static_cast<std::size_t>(config.hidden);
  params_.add("embed", {v, e});
  params_.add("cell.w", {4 * h, e + h});
  params_.add("cell.b", {4 * h});
  params_.add("out.w", {1, h});
  params_.add("out.b", {1});
}

RolloutDisc::RolloutDisc(const RolloutDiscConfig& config, ParamStore params)
    : config_(config), params_(std::move(params)) {
  check_shapes(RolloutDisc(config).params(), params_, "rollout discriminator");
}

double RolloutDisc::logit_impl(std::span<const TokenId> seq, SequenceTrace* trace) const {
  check_tokens(seq, config_.vocab_size);
  const Vector h = encode_sequence(seq, params_.at("embed"), params_.at("cell.w"), params_.at("cell.b"), trace);
  return affine(h, params_.at("out.w"), params_.at("out.b"))[0];
}

double RolloutDisc::logit(std::span<const TokenId> seq) const { return logit_impl(seq, nullptr); }

double RolloutDisc::score(std::span<const TokenId> seq) const { return sigmoid(logit(seq)); }

void RolloutDisc::backward(double grad_logit, const SequenceTrace& trace) {
  // Final hidden state is o * tanh(c) of the last step.
  const LstmStepCache& last = trace.steps.back();
  const Vector h_final = last.o.cwiseProduct(last.tanh_c);
  const Vector dh = affine_backward(h_final, Vector::Constant(1, grad_logit), params_.at("out.w"), params_.at("out.b"));
  encode_sequence_backward(dh, trace, params_.at("embed"), params_.at("cell.w"), params_.at("cell.b"));
}

double RolloutDisc::loss(std::span<const TokenSeq> positives, std::span<const TokenSeq> negatives,
                         bool accumulate) {
  if (positives.empty() || negatives.empty()) throw EmptyBatch();
  double total = 0.0;
  const double wp = 1.0 / static_cast<double>(positives.size());
  const double wn = 1.0 / static_cast<double>(negatives.size());
  SequenceTrace trace;
  for (const TokenSeq& s : positives) {
    const double z = logit_impl(s, accumulate ? &trace : nullptr);
    total += wp * nll_positive(z);
    if (accumulate) backward(wp * (sigmoid(z) - 1.0), trace);
  }
  for (const TokenSeq& s : negatives) {
    const double z = logit_impl(s, accumulate ? &trace : nullptr);
    total += wn * nll_negative(z);
    if (accumulate) backward(wn * sigmoid(z), trace);
  }
  return total;
}

double RolloutDisc::train_step(std::span<const TokenSeq> positives, std::span<const TokenSeq> negatives,
                               double learning_rate, double clip_norm) {
  params_.zero_grad();
  const double l = loss(positives, negatives, true);
  if (clip_norm > 0.0) clip_grad_norm(params_, clip_norm);
  sgd_step(params_, learning_rate);
  return l;
}

double rollout_score(std::span<const TokenId> seq, const RolloutDisc& disc) { return disc.score(seq); }

// ---------------------------------------------------------------------------
// HyperDisc

struct HyperDisc::ExampleCache {
  TokenSeq anchor_inputs, query_inputs;
  SequenceTrace anchor_trace, query_trace;
  Vector x_a, x_q;
  std::size_t label_row = 0, anchor_pos = 0, query_pos = 0;
  Vector z;
};

namespace {

/// Right-to-left reading order with the summary marker last.
TokenSeq encoder_inputs(std::span<const TokenId> tokens) {
  TokenSeq in(tokens.rbegin(), tokens.rend());
  in.push_back(tokens::kSummary);
  return in;
}

std::size_t label_row(Label l) { return l == Label::positive ? 0 : 1; }

}  // namespace

HyperExample resolve_example(const Taxonomy& t, const TrainingTriple& triple) {
  return {triple.label, triple.anchor, anchor_depth(t, triple.anchor_id), triple.query};
}

HyperDisc::HyperDisc(const HyperDiscConfig& config)
    : config_(config), params_(config.seed, InitSpec{config.init_range}) {
  if (config.vocab_size <= static_cast<std::size_t>(tokens::kSummary) || config.dim < 1 || config.max_depth < 0) {
    throw std::invalid_argument("hyper discriminator needs a vocabulary, a positive width and max_depth >= 0");
  }
  const auto v = config.vocab_size;
  const auto d = static_cast<std::size_t>(config.dim);
  params_.add("embed", {v, d});
  params_.add("cell.w", {4 * d, 2 * d});
  params_.add("cell.b", {4 * d});
  params_.add("label", {2, d});
  params_.add("position", {static_cast<std::size_t>(config.max_depth) + 2, d});
  params_.add("out.w", {1, config.combine == HyperCombine::sum ? d : 5 * d});
  params_.add("out.b", {1});
}

HyperDisc::HyperDisc(const HyperDiscConfig& config, ParamStore params) : config_(config), params_(std::move(params)) {
  check_shapes(HyperDisc(config).params(), params_, "hyper discriminator");
}

Vector HyperDisc::encode(std::span<const TokenId> tokens) const {
  check_tokens(tokens, config_.vocab_size);
  const TokenSeq in = encoder_inputs(tokens);
  return encode_sequence(in, params_.at("embed"), params_.at("cell.w"), params_.at("cell.b"));
}

std::size_t HyperDisc::position_index(PositionRole role, int depth) const {
  if (role == PositionRole::query) return query_slot();
  if (depth < 0) throw std::invalid_argument("anchor depth must be non-negative");
  return static_cast<std::size_t>(std::min(depth, config_.max_depth));
}

Vector HyperDisc::position_row(PositionRole role, int depth) const {
  return params_.at("position").mat().row(static_cast<Eigen::Index>(position_index(role, depth))).transpose();
}

Vector HyperDisc::combined(const HyperExample& ex, ExampleCache* cache) const {
  check_tokens(ex.anchor, config_.vocab_size);
  check_tokens(ex.query, config_.vocab_size);
  ExampleCache local;
  ExampleCache& c = cache ? *cache : local;
  c.anchor_inputs = encoder_inputs(ex.anchor);
  c.query_inputs = encoder_inputs(ex.query);
  const auto& embed = params_.at("embed");
  const auto& w = params_.at("cell.w");
  const auto& b = params_.at("cell.b");
  c.x_a = encode_sequence(c.anchor_inputs, embed, w, b, cache ? &c.anchor_trace : nullptr);
  c.x_q = encode_sequence(c.query_inputs, embed, w, b, cache ? &c.query_trace : nullptr);
  c.label_row = label_row(ex.label);
  c.anchor_pos = position_index(PositionRole::anchor, ex.anchor_depth);
  c.query_pos = query_slot();

  const auto lab = params_.at("label").mat();
  const auto pos = params_.at("position").mat();
  const Vector l = lab.row(static_cast<Eigen::Index>(c.label_row)).transpose();
  const Vector p_a = pos.row(static_cast<Eigen::Index>(c.anchor_pos)).transpose();
  const Vector p_q = pos.row(static_cast<Eigen::Index>(c.query_pos)).transpose();
  if (config_.combine == HyperCombine::sum) {
    c.z = l + c.x_a + p_a + c.x_q + p_q;
  } else {
    const Eigen::Index d = config_.dim;
    c.z.resize(5 * d);
    c.z << l, c.x_a, p_a, c.x_q, p_q;
  }
  return c.z;
}

double HyperDisc::logit(const HyperExample& ex) const {
  return affine(combined(ex, nullptr), params_.at("out.w"), params_.at("out.b"))[0];
}

double HyperDisc::score(const HyperExample& ex) const { return sigmoid(logit(ex)); }

void HyperDisc::backward(double grad_logit, const HyperExample& /*ex*/, const ExampleCache& c) {
  const Vector dz = affine_backward(c.z, Vector::Constant(1, grad_logit), params_.at("out.w"), params_.at("out.b"));
  const Eigen::Index d = config_.dim;
  auto slice = [&](int i) -> Vector {
    return config_.combine == HyperCombine::sum ? dz : dz.segment(i * d, d).eval();
  };
  params_.at("label").grad_mat().row(static_cast<Eigen::Index>(c.label_row)) += slice(0).transpose();
  auto g_pos = params_.at("position").grad_mat();
  g_pos.row(static_cast<Eigen::Index>(c.anchor_pos)) += slice(2).transpose();
  g_pos.row(static_cast<Eigen::Index>(c.query_pos)) += slice(4).transpose();
  auto& embed = params_.at("embed");
  auto& w = params_.at("cell.w");
  auto& b = params_.at("cell.b");
  encode_sequence_backward(slice(1), c.anchor_trace, embed, w, b);
  encode_sequence_backward(slice(3), c.query_trace, embed, w, b);
}

double HyperDisc::loss(std::span<const HyperExample> positives, std::span<const HyperExample> negatives,
                       bool accumulate) {
  if (positives.empty() || negatives.empty()) throw EmptyBatch();
  double total = 0.0;
  const double wp = 1.0 / static_cast<double>(positives.size());
  const double wn = 1.0 / static_cast<double>(negatives.size());
  ExampleCache cache;
  for (const HyperExample& ex : positives) {
    const double z = affine(combined(ex, accumulate ? &cache : nullptr), params_.at("out.w"), params_.at("out.b"))[0];
    total += wp * nll_positive(z);
    if (accumulate) backward(wp * (sigmoid(z) - 1.0), ex, cache);
  }
  for (const HyperExample& ex : negatives) {
    const double z = affine(combined(ex, accumulate ? &cache : nullptr), params_.at("out.w"), params_.at("out.b"))[0];
    total += wn * nll_negative(z);
    if (accumulate) backward(wn * sigmoid(z), ex, cache);
  }
  return total;
}

double HyperDisc::train_step(std::span<const HyperExample> positives, std::span<const HyperExample> negatives,
                             double learning_rate, double clip_norm) {
  params_.zero_grad();
  const double l = loss(positives, negatives, true);
  if (clip_norm > 0.0) clip_grad_norm(params_, clip_norm);
  sgd_step(params_, learning_rate);
  return l;
}

Vector HyperDisc::mean_token_embedding(std::span<const TokenId> tokens) const {
  check_tokens(tokens, config_.vocab_size);
  const auto table = params_.at("embed").mat();
  Vector acc = Vector::Zero(config_.dim);
  for (const TokenId t : tokens) acc += table.row(t).transpose();
  return acc / static_cast<double>(tokens.size());
}

Vector encode_concept(std::span<const TokenId> tokens, const HyperDisc& disc) { return disc.encode(tokens); }

Vector position_feature(PositionRole role, const Taxonomy& t, std::optional<ConceptId> id, const HyperDisc& disc) {
  if (role == PositionRole::query) return disc.position_row(role, 0);
  if (!id || !t.contains(*id)) throw UnknownConcept(id.value_or(-1));
  return disc.position_row(role, anchor_depth(t, *id));
}

double hyper_score(Label label, ConceptId anchor, std::span<const TokenId> query, const Taxonomy& t,
                   const HyperDisc& disc) {
  if (!t.contains(anchor)) throw UnknownConcept(anchor);
  const HyperExample ex{label, t.concept_of(anchor).tokens, anchor_depth(t, anchor),
                        TokenSeq(query.begin(), query.end())};
  return disc.score(ex);
}

double disc_train_step(std::span<const TokenSeq> positives, std::span<const TokenSeq> negatives,
                       RolloutDisc& disc, double learning_rate, double clip_norm) {
  return disc.train_step(positives, negatives, learning_rate, clip_norm);
}

double disc_train_step(std::span<const HyperExample> positives, std::span<const HyperExample> negatives,
                       HyperDisc& disc, double learning_rate, double clip_norm) {
  return disc.train_step(positives, negatives, learning_rate, clip_norm);
}

}  // namespace taxogate
