#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "taxogate/metrics.hpp"
#include "taxogate/trainer.hpp"

namespace taxogate {

class MissingEmbedding : public std::invalid_argument {
 public:
  explicit MissingEmbedding(ConceptId id);
  ConceptId id;
};

/// Concept-ness and root-relatedness checks for an incoming query.
struct TeeScorers {
  std::function<double(const TokenSeq&)> rollout;
  std::function<double(const TokenSeq&)> hyper;
};

/// rollout(q) * hyper(q).
double tee_confidence(const QueryRecord& query, const TeeScorers& scorers);
/// D_R of the query text times D_H(positive, root, query).
double tee_confidence(const QueryRecord& query, const Taxonomy& t, const RolloutDisc& rollout,
                      const HyperDisc& hyper, RolloutInput input = RolloutInput::query);

/// The TEE confidence function of a trained system under an ablation:
/// none uses both discriminators, no_hyper only D_R, no_rollout only D_H, and
/// no_adversarial (no discriminators at all) the generator's per-token
/// likelihood of the query given (positive, root).
std::function<double(const TokenSeq&)> system_confidence(const ModelSet& models, const Taxonomy& t,
                                                         const TrainerConfig& config);

struct TeeResult {
  std::vector<double> confidences;
  std::vector<bool> decisions;
  double gamma = 0.0;
  TeeMetrics metrics;
};

/// Tunes gamma for F1 on the validation queries, then applies it to test.
TeeResult evaluate_tee(std::span<const QueryRecord> val, std::span<const QueryRecord> test,
                       const std::function<double(const TokenSeq&)>& confidence);

std::vector<bool> noise_flags(std::span<const QueryRecord> queries);

using ConceptEmbeddings = std::unordered_map<ConceptId, Vector>;

ConceptEmbeddings embed_concepts(const Taxonomy& t, const std::function<Vector(const TokenSeq&)>& embed);

double cosine_similarity(const Vector& a, const Vector& b);

/// Anchors by descending cosine similarity to the query embedding.
RankedCandidates baseline_closest_position(const QueryRecord& query, const Vector& query_embedding,
                                           const Taxonomy& t, const ConceptEmbeddings& embeddings);
/// Anchor score -[d(a, q) + mean_children d(c, q)], d = 1 - cosine.
RankedCandidates baseline_closest_neighbor(const QueryRecord& query, const Vector& query_embedding,
                                           const Taxonomy& t, const ConceptEmbeddings& embeddings);
/// Fair coin per query.
std::vector<bool> baseline_random(std::size_t n_queries, std::uint64_t seed);

/// Phase 1 filters queries by confidence > gamma; phase 2 ranks every anchor
/// for each survivor with the pair scorer.
struct PipelineReport {
  TeeMetrics tee;
  std::size_t queries = 0;
  std::size_t surviving = 0;
  std::size_t surviving_clean = 0;
  std::size_t invocations_filtered = 0;
  std::size_t invocations_unfiltered = 0;
  double seconds_filtered = 0.0;
  double seconds_unfiltered = 0.0;
  std::size_t k = 10;
  // Ranking metrics over the surviving clean queries (zero when none survive).
  double mr = 0.0;
  double mrr_at_k = 0.0;
  double mrr = 0.0;
  double hit_at_k = 0.0;
  // The same metrics over every clean query, without filtering.
  double mr_unfiltered = 0.0;
  double mrr_at_k_unfiltered = 0.0;
  double hit_at_k_unfiltered = 0.0;
};

PipelineReport pipeline_expand(std::span<const QueryRecord> queries, std::span<const double> confidences,
                               double gamma, const Taxonomy& t, const PairScorer& scorer, std::size_t k);

/// D_H(positive, a, q) as an expansion scorer.
PairScorer hyper_pair_scorer(const HyperDisc& hyper, const Taxonomy& t);

}  // namespace taxogate
