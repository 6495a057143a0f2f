#include "taxogate/evaluation.hpp"

#include <chrono>
#include <cmath>
#include <string>

namespace taxogate {

MissingEmbedding::MissingEmbedding(ConceptId c)
    : std::invalid_argument("no embedding for concept " + std::to_string(c)), id(c) {}

double tee_confidence(const QueryRecord& query, const TeeScorers& scorers) {
  return scorers.rollout(query.query.tokens) * scorers.hyper(query.query.tokens);
}

double tee_confidence(const QueryRecord& query, const Taxonomy& t, const RolloutDisc& rollout,
                      const HyperDisc& hyper, RolloutInput input) {
  const ConceptId root = t.root();
  const TokenSeq& root_tokens = t.concept_of(root).tokens;
  const TeeScorers scorers{
      [&](const TokenSeq& q) { return rollout.score(rollout_view(input, encode_context(Label::positive, root_tokens), q)); },
      [&](const TokenSeq& q) { return hyper_score(Label::positive, root, q, t, hyper); }};
  return tee_confidence(query, scorers);
}

std::function<double(const TokenSeq&)> system_confidence(const ModelSet& models, const Taxonomy& t,
                                                         const TrainerConfig& config) {
  const ModelSet* m = &models;
  const Taxonomy* tax = &t;
  const RolloutInput input = config.rollout_input;
  const GenerationContext root_ctx = encode_context(Label::positive, t.concept_of(t.root()).tokens);
  auto by_rollout = [m, input, root_ctx](const TokenSeq& q) {
    if (q.empty()) return 0.0;
    return m->rollout.score(rollout_view(input, root_ctx, q));
  };
  auto by_hyper = [m, tax](const TokenSeq& q) {
    if (q.empty()) return 0.0;
    return hyper_score(Label::positive, tax->root(), q, *tax, m->hyper);
  };
  switch (config.ablation) {
    case Ablation::no_hyper: return by_rollout;
    case Ablation::no_rollout: return by_hyper;
    case Ablation::no_adversarial:
      return [m, root_ctx](const TokenSeq& q) { return std::exp(m->generator.mean_log_prob(root_ctx, q)); };
    case Ablation::none: break;
  }
  return [by_rollout, by_hyper](const TokenSeq& q) { return by_rollout(q) * by_hyper(q); };
}

std::vector<bool> noise_flags(std::span<const QueryRecord> queries) {
  std::vector<bool> out;
  out.reserve(queries.size());
  for (const auto& q : queries) out.push_back(q.is_noise);
  return out;
}

TeeResult evaluate_tee(std::span<const QueryRecord> val, std::span<const QueryRecord> test,
                       const std::function<double(const TokenSeq&)>& confidence) {
  std::vector<double> val_conf;
  val_conf.reserve(val.size());
  for (const auto& q : val) val_conf.push_back(confidence(q.query.tokens));
  TeeResult r;
  r.gamma = tune_gamma(val_conf, noise_flags(val));
  r.confidences.reserve(test.size());
  for (const auto& q : test) r.confidences.push_back(confidence(q.query.tokens));
  r.decisions = tee_decisions(r.confidences, r.gamma);
  r.metrics = tee_metrics(r.decisions, noise_flags(test));
  return r;
}

ConceptEmbeddings embed_concepts(const Taxonomy& t, const std::function<Vector(const TokenSeq&)>& embed) {
  ConceptEmbeddings out;
  for (const Concept& c : t.concepts()) out.emplace(c.id, embed(c.tokens));
  return out;
}

double cosine_similarity(const Vector& a, const Vector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

namespace {

const Vector& embedding_of(const ConceptEmbeddings& e, ConceptId id) {
  const auto it = e.find(id);
  if (it == e.end()) throw MissingEmbedding(id);
  return it->second;
}

}  // namespace

RankedCandidates baseline_closest_position(const QueryRecord& query, const Vector& query_embedding,
                                           const Taxonomy& t, const ConceptEmbeddings& embeddings) {
  std::vector<double> scores;
  scores.reserve(t.size());
  for (const ConceptId a : t.ids()) scores.push_back(cosine_similarity(embedding_of(embeddings, a), query_embedding));
  return rank_scored(query.query.id, t.ids(), scores, query.gold_parents);
}

RankedCandidates baseline_closest_neighbor(const QueryRecord& query, const Vector& query_embedding,
                                           const Taxonomy& t, const ConceptEmbeddings& embeddings) {
  std::vector<double> scores;
  scores.reserve(t.size());
  for (const ConceptId a : t.ids()) {
    double d = 1.0 - cosine_similarity(embedding_of(embeddings, a), query_embedding);
    const auto& kids = t.children(a);
    if (!kids.empty()) {
      double child_total = 0.0;
      for (const ConceptId c : kids) child_total += 1.0 - cosine_similarity(embedding_of(embeddings, c), query_embedding);
      d += child_total / static_cast<double>(kids.size());
    }
    scores.push_back(-d);
  }
  return rank_scored(query.query.id, t.ids(), scores, query.gold_parents);
}

std::vector<bool> baseline_random(std::size_t n_queries, std::uint64_t seed) {
  CounterRng rng(derive_seed(seed, "baseline_random"));
  std::vector<bool> out;
  out.reserve(n_queries);
  for (std::size_t i = 0; i < n_queries; ++i) out.push_back(rng.coin());
  return out;
}

PipelineReport pipeline_expand(std::span<const QueryRecord> queries, std::span<const double> confidences,
                               double gamma, const Taxonomy& t, const PairScorer& scorer, std::size_t k) {
  if (queries.size() != confidences.size()) throw LengthMismatch("pipeline_expand: one confidence per query required");
  PipelineReport report;
  report.k = k;
  report.queries = queries.size();
  const auto decisions = tee_decisions(confidences, gamma);
  report.tee = tee_metrics(decisions, noise_flags(queries));

  std::size_t calls = 0;
  const PairScorer counted = [&](ConceptId a, const TokenSeq& q) {
    ++calls;
    return scorer(a, q);
  };
  using clock = std::chrono::steady_clock;

  // Unfiltered: every query goes to phase 2.
  std::vector<RankedCandidates> all_clean;
  const auto u0 = clock::now();
  for (const auto& q : queries) {
    RankedCandidates r = rank_parents(q, t, counted);
    if (!q.is_noise) all_clean.push_back(std::move(r));
  }
  report.seconds_unfiltered = std::chrono::duration<double>(clock::now() - u0).count();
  report.invocations_unfiltered = calls;

  calls = 0;
  std::vector<RankedCandidates> kept_clean;
  const auto f0 = clock::now();
  for (std::size_t i = 0; i < queries.size(); ++i) {
    if (!decisions[i]) continue;
    ++report.surviving;
    RankedCandidates r = rank_parents(queries[i], t, counted);
    if (!queries[i].is_noise) kept_clean.push_back(std::move(r));
  }
  report.seconds_filtered = std::chrono::duration<double>(clock::now() - f0).count();
  report.invocations_filtered = calls;
  report.surviving_clean = kept_clean.size();

  if (!kept_clean.empty()) {
    report.mr = mean_rank(kept_clean);
    report.mrr_at_k = taxogate::mrr_at_k(kept_clean, k);
    report.mrr = taxogate::mrr(kept_clean);
    report.hit_at_k = taxogate::hit_at_k(kept_clean, k);
  }
  if (!all_clean.empty()) {
    report.mr_unfiltered = mean_rank(all_clean);
    report.mrr_at_k_unfiltered = taxogate::mrr_at_k(all_clean, k);
    report.hit_at_k_unfiltered = taxogate::hit_at_k(all_clean, k);
  }
  return report;
}

PairScorer hyper_pair_scorer(const HyperDisc& hyper, const Taxonomy& t) {
  const HyperDisc* h = &hyper;
  const Taxonomy* tax = &t;
  return [h, tax](ConceptId a, const TokenSeq& q) { return hyper_score(Label::positive, a, q, *tax, *h); };
}

}  // namespace taxogate
