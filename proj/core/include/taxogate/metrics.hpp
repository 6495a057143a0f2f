#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "taxogate/taxonomy.hpp"

namespace taxogate {

class NoGold : public std::invalid_argument {
 public:
  NoGold() : std::invalid_argument("ranking metric needs at least one gold parent") {}
};

class LengthMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Anchors for one query in descending score order, ties by ascending id.
struct RankedCandidates {
  ConceptId query_id = 0;
  std::vector<ConceptId> anchors;
  std::vector<double> scores;
  std::vector<std::size_t> gold_ranks;  // 1-based, ascending
};

/// Orders `anchors` by their aligned `scores`.
RankedCandidates rank_scored(ConceptId query_id, std::span<const ConceptId> anchors, std::span<const double> scores,
                             std::span<const ConceptId> gold_parents);

using PairScorer = std::function<double(ConceptId anchor, const TokenSeq& query)>;

RankedCandidates rank_parents(const QueryRecord& query, const Taxonomy& t, const PairScorer& scorer);

/// Mean of the rank over every (query, gold parent) pair.
double mean_rank(std::span<const RankedCandidates> results);
/// (1/|C|) sum_c (1/|parents(c)|) sum_i k / R_{i,c}. Exceeds 1 for ranks above k.
double mrr_at_k(std::span<const RankedCandidates> results, std::size_t k);
/// Standard reciprocal rank, averaged the same way (k = 1 of the scaled form).
double mrr(std::span<const RankedCandidates> results);
/// Share of queries with any gold parent at rank <= k.
double hit_at_k(std::span<const RankedCandidates> results, std::size_t k);

/// Clean queries are the positive class.
struct TeeMetrics {
  double acc = 0.0;
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double noise_recall = 0.0;  // share of noise queries rejected
};

/// decisions[i] = "query i should enter".
TeeMetrics tee_metrics(const std::vector<bool>& decisions, const std::vector<bool>& is_noise);

std::vector<bool> tee_decisions(std::span<const double> confidences, double gamma);
/// Ids whose confidence is strictly above gamma, ascending.
std::vector<ConceptId> tee_filter(std::span<const QueryRecord> queries, double gamma,
                                  std::span<const double> confidences);

/// gamma maximising F1 over {accept everything} and every observed
/// confidence; ties go to higher accuracy, then the lower gamma.
double tune_gamma(std::span<const double> confidences, const std::vector<bool>& is_noise);

}  // namespace taxogate
