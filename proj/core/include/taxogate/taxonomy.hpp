#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "taxogate/rng.hpp"

namespace taxogate {

using ConceptId = std::int32_t;
using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;

struct Concept {
  ConceptId id = 0;
  TokenSeq tokens;
};

struct Edge {
  ConceptId parent = 0;
  ConceptId child = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// (anchor, query) pair drawn from or against a taxonomy.
using ConceptPair = Edge;

class TaxonomyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CycleDetected : public TaxonomyError {
 public:
  explicit CycleDetected(Edge witness);
  Edge witness;
};

class DanglingEdge : public TaxonomyError {
 public:
  explicit DanglingEdge(Edge edge);
  Edge edge;
};

class UnreachableConcept : public TaxonomyError {
 public:
  explicit UnreachableConcept(ConceptId id);
  ConceptId id;
};

class UnknownConcept : public TaxonomyError {
 public:
  explicit UnknownConcept(ConceptId id);
  ConceptId id;
};

class InvalidConcept : public TaxonomyError {
 public:
  InvalidConcept(ConceptId id, const std::string& reason);
  ConceptId id;
};

class InvalidFraction : public TaxonomyError {
 public:
  explicit InvalidFraction(double value);
};

class EmptyEdgeSet : public TaxonomyError {
 public:
  EmptyEdgeSet() : TaxonomyError("taxonomy has no edges") {}
};

class NoNegativesAvailable : public TaxonomyError {
 public:
  NoNegativesAvailable() : TaxonomyError("taxonomy admits no negative pairs") {}
};

/// Immutable hypernym DAG. Construction does not validate; call
/// validate_taxonomy() for that. Concepts and adjacency lists are kept in
/// ascending id order so every iteration over the graph is deterministic.
class Taxonomy {
 public:
  Taxonomy() = default;
  Taxonomy(std::vector<Concept> concepts, std::vector<Edge> edges, ConceptId root);

  ConceptId root() const noexcept { return root_; }
  std::size_t size() const noexcept { return concepts_.size(); }
  bool contains(ConceptId id) const noexcept { return index_.contains(id); }

  const std::vector<Concept>& concepts() const noexcept { return concepts_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const std::vector<ConceptId>& ids() const noexcept { return ids_; }

  const Concept& concept_of(ConceptId id) const;
  const std::vector<ConceptId>& children(ConceptId id) const;
  const std::vector<ConceptId>& parents(ConceptId id) const;
  bool has_edge(ConceptId parent, ConceptId child) const noexcept;

  /// Shortest root path length; -1 for concepts the root cannot reach.
  int depth(ConceptId id) const;
  int max_depth() const noexcept { return max_depth_; }

 private:
  std::size_t slot(ConceptId id) const;

  std::vector<Concept> concepts_;
  std::vector<ConceptId> ids_;
  std::vector<Edge> edges_;
  ConceptId root_ = 0;
  std::unordered_map<ConceptId, std::size_t> index_;
  std::vector<std::vector<ConceptId>> children_;
  std::vector<std::vector<ConceptId>> parents_;
  std::vector<int> depth_;
  int max_depth_ = 0;
};

struct QueryRecord {
  Concept query;
  std::vector<ConceptId> gold_parents;  // empty exactly when is_noise
  bool is_noise = false;
};

struct BenchmarkSplit {
  Taxonomy train_taxonomy;
  std::vector<QueryRecord> val_queries;
  std::vector<QueryRecord> test_queries;
  std::uint64_t seed = 0;
};

struct MaskResult {
  Taxonomy taxonomy;
  std::vector<QueryRecord> held_out;
};

/// Throws CycleDetected, DanglingEdge, UnreachableConcept or InvalidConcept.
/// When vocab_size is given, every token id must lie in [0, vocab_size).
void validate_taxonomy(const Taxonomy& t, std::optional<std::size_t> vocab_size = std::nullopt);

/// Drops every concept the root cannot reach, along with its edges.
Taxonomy restrict_to_reachable(const Taxonomy& t);

std::vector<ConceptId> leaves(const Taxonomy& t);

/// floor(fraction * n), tolerant of binary representation error in fraction.
std::size_t fraction_count(double fraction, std::size_t n);

MaskResult mask_leaves(const Taxonomy& t, double fraction, std::uint64_t seed);

/// Source of noise query surface forms; implementations live in noise.hpp.
class NoiseSource {
 public:
  virtual ~NoiseSource() = default;
  virtual TokenSeq draw(CounterRng& rng) const = 0;
};

/// Appends floor(ratio * |records|) noise records with fresh ids starting at
/// first_noise_id, then shuffles the whole list.
std::vector<QueryRecord> inject_noise_queries(std::vector<QueryRecord> records, double ratio,
                                              const NoiseSource& noise, std::uint64_t seed,
                                              ConceptId first_noise_id);

/// Validation and test splits of floor(mask_fraction * |leaves|) leaves
/// each, disjoint and drawn from the same leaf set, so mask_fraction may not
/// exceed 0.5. Each split then receives floor(noise_ratio * |split|) noise
/// queries with fresh ids above every concept id of t.
BenchmarkSplit make_benchmark_split(const Taxonomy& t, double mask_fraction, double noise_ratio,
                                    const NoiseSource& noise, std::uint64_t seed);

std::vector<ConceptPair> sample_positive_pairs(const Taxonomy& t, std::size_t n, std::uint64_t seed);

/// Pairs (a, q) with a != q, q not a child and not any descendant of a.
std::vector<ConceptPair> sample_negative_pairs(const Taxonomy& t, std::size_t n, std::uint64_t seed);

/// descendants[i] holds the strict descendants of ids()[i], sorted.
std::vector<std::vector<ConceptId>> descendant_sets(const Taxonomy& t);

int anchor_depth(const Taxonomy& t, ConceptId id);

ConceptId max_concept_id(const Taxonomy& t);

}  // namespace taxogate
