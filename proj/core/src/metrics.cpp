#include "taxogate/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <string>

namespace taxogate {

RankedCandidates rank_scored(ConceptId query_id, std::span<const ConceptId> anchors, std::span<const double> scores,
                             std::span<const ConceptId> gold_parents) {
  if (anchors.size() != scores.size()) throw LengthMismatch("rank_scored: one score per anchor required");
  std::vector<std::size_t> order(anchors.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return anchors[a] < anchors[b];
  });

  RankedCandidates out;
  out.query_id = query_id;
  out.anchors.reserve(order.size());
  out.scores.reserve(order.size());
  for (const std::size_t i : order) {
    out.anchors.push_back(anchors[i]);
    out.scores.push_back(scores[i]);
  }
  const std::set<ConceptId> gold(gold_parents.begin(), gold_parents.end());
  for (const ConceptId g : gold) {
    const auto it = std::find(out.anchors.begin(), out.anchors.end(), g);
    if (it == out.anchors.end()) throw UnknownConcept(g);
    out.gold_ranks.push_back(static_cast<std::size_t>(it - out.anchors.begin()) + 1);
  }
  std::sort(out.gold_ranks.begin(), out.gold_ranks.end());
  return out;
}

RankedCandidates rank_parents(const QueryRecord& query, const Taxonomy& t, const PairScorer& scorer) {
  std::vector<double> scores;
  scores.reserve(t.size());
  for (const ConceptId a : t.ids()) scores.push_back(scorer(a, query.query.tokens));
  return rank_scored(query.query.id, t.ids(), scores, query.gold_parents);
}

namespace {

void require_gold(std::span<const RankedCandidates> results) {
  if (results.empty()) throw NoGold();
  for (const auto& r : results) {
    if (r.gold_ranks.empty()) throw NoGold();
  }
}

}  // namespace

double mean_rank(std::span<const RankedCandidates> results) {
  require_gold(results);
  double total = 0.0;
  std::size_t pairs = 0;
  for (const auto& r : results) {
    for (const std::size_t rank : r.gold_ranks) total += static_cast<double>(rank);
    pairs += r.gold_ranks.size();
  }
  return total / static_cast<double>(pairs);
}

double mrr_at_k(std::span<const RankedCandidates> results, std::size_t k) {
  if (k < 1) throw std::invalid_argument("mrr_at_k needs k >= 1");
  require_gold(results);
  double total = 0.0;
  for (const auto& r : results) {
    double per_query = 0.0;
    for (const std::size_t rank : r.gold_ranks) per_query += static_cast<double>(k) / static_cast<double>(rank);
    total += per_query / static_cast<double>(r.gold_ranks.size());
  }
  return total / static_cast<double>(results.size());
}

double mrr(std::span<const RankedCandidates> results) { return mrr_at_k(results, 1); }

double hit_at_k(std::span<const RankedCandidates> results, std::size_t k) {
  if (k < 1) throw std::invalid_argument("hit_at_k needs k >= 1");
  require_gold(results);
  std::size_t hits = 0;
  for (const auto& r : results) {
    if (r.gold_ranks.front() <= k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(results.size());
}

TeeMetrics tee_metrics(const std::vector<bool>& decisions, const std::vector<bool>& is_noise) {
  if (decisions.size() != is_noise.size()) {
    throw LengthMismatch("tee_metrics: " + std::to_string(decisions.size()) + " decisions for " +
                         std::to_string(is_noise.size()) + " queries");
  }
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    const bool clean = !is_noise[i];
    if (decisions[i]) {
      clean ? ++tp : ++fp;
    } else {
      clean ? ++fn : ++tn;
    }
  }
  TeeMetrics m;
  const auto n = static_cast<double>(decisions.size());
  m.acc = n > 0 ? static_cast<double>(tp + tn) / n : 0.0;
  m.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  m.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  m.f1 = m.precision + m.recall > 0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  m.noise_recall = tn + fp > 0 ? static_cast<double>(tn) / static_cast<double>(tn + fp) : 0.0;
  return m;
}

std::vector<bool> tee_decisions(std::span<const double> confidences, double gamma) {
  std::vector<bool> out;
  out.reserve(confidences.size());
  for (const double c : confidences) out.push_back(c > gamma);
  return out;
}

std::vector<ConceptId> tee_filter(std::span<const QueryRecord> queries, double gamma,
                                  std::span<const double> confidences) {
  if (queries.size() != confidences.size()) throw LengthMismatch("tee_filter: one confidence per query required");
  std::vector<ConceptId> out;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    if (confidences[i] > gamma) out.push_back(queries[i].query.id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

double tune_gamma(std::span<const double> confidences, const std::vector<bool>& is_noise) {
  if (confidences.size() != is_noise.size()) throw LengthMismatch("tune_gamma: one confidence per query required");
  if (confidences.empty()) return 0.0;
  std::vector<double> candidates(confidences.begin(), confidences.end());
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  // Accepting everything needs a threshold strictly below the minimum; 0 for
  // strictly positive confidences such as probabilities.
  const double lowest = candidates.front();
  candidates.insert(candidates.begin(), lowest > 0.0 ? 0.0 : lowest - 1.0);

  double best_gamma = candidates.front();
  TeeMetrics best = tee_metrics(tee_decisions(confidences, best_gamma), is_noise);
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const TeeMetrics m = tee_metrics(tee_decisions(confidences, candidates[i]), is_noise);
    if (m.f1 > best.f1 || (m.f1 == best.f1 && m.acc > best.acc)) {
      best = m;
      best_gamma = candidates[i];
    }
  }
  return best_gamma;
}

}  // namespace taxogate
