#include "taxogate/taxonomy.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>

namespace taxogate {

namespace {

std::string edge_text(Edge e) {
  return "(" + std::to_string(e.parent) + ", " + std::to_string(e.child) + ")";
}

}  // namespace

CycleDetected::CycleDetected(Edge w) : TaxonomyError("cycle through edge " + edge_text(w)), witness(w) {}

DanglingEdge::DanglingEdge(Edge e)
    : TaxonomyError("edge " + edge_text(e) + " references a missing concept"), edge(e) {}

UnreachableConcept::UnreachableConcept(ConceptId c)
    : TaxonomyError("concept " + std::to_string(c) + " is unreachable from the root"), id(c) {}

UnknownConcept::UnknownConcept(ConceptId c)
    : TaxonomyError("unknown concept " + std::to_string(c)), id(c) {}

InvalidConcept::InvalidConcept(ConceptId c, const std::string& reason)
    : TaxonomyError("concept " + std::to_string(c) + ": " + reason), id(c) {}

InvalidFraction::InvalidFraction(double value)
    : TaxonomyError("fraction must lie in [0, 1], got " + std::to_string(value)) {}

Taxonomy::Taxonomy(std::vector<Concept> concepts, std::vector<Edge> edges, ConceptId root)
    : concepts_(std::move(concepts)), edges_(std::move(edges)), root_(root) {
  std::sort(concepts_.begin(), concepts_.end(),
            [](const Concept& a, const Concept& b) { return a.id < b.id; });
  concepts_.erase(std::unique(concepts_.begin(), concepts_.end(),
                              [](const Concept& a, const Concept& b) { return a.id == b.id; }),
                  concepts_.end());
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());

  ids_.reserve(concepts_.size());
  for (std::size_t i = 0; i < concepts_.size(); ++i) {
    ids_.push_back(concepts_[i].id);
    index_.emplace(concepts_[i].id, i);
  }
  children_.assign(concepts_.size(), {});
  parents_.assign(concepts_.size(), {});
  for (const Edge& e : edges_) {
    const auto p = index_.find(e.parent);
    const auto c = index_.find(e.child);
    if (p == index_.end() || c == index_.end()) continue;  // reported by validate_taxonomy
    children_[p->second].push_back(e.child);
    parents_[c->second].push_back(e.parent);
  }
  for (auto& list : parents_) std::sort(list.begin(), list.end());

  depth_.assign(concepts_.size(), -1);
  const auto r = index_.find(root_);
  if (r == index_.end()) return;
  std::deque<std::size_t> frontier{r->second};
  depth_[r->second] = 0;
  while (!frontier.empty()) {
    const std::size_t cur = frontier.front();
    frontier.pop_front();
    for (const ConceptId child : children_[cur]) {
      const std::size_t ci = index_.at(child);
      if (depth_[ci] >= 0) continue;
      depth_[ci] = depth_[cur] + 1;
      max_depth_ = std::max(max_depth_, depth_[ci]);
      frontier.push_back(ci);
    }
  }
}

std::size_t Taxonomy::slot(ConceptId id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) throw UnknownConcept(id);
  return it->second;
}

const Concept& Taxonomy::concept_of(ConceptId id) const { return concepts_[slot(id)]; }

const std::vector<ConceptId>& Taxonomy::children(ConceptId id) const { return children_[slot(id)]; }

const std::vector<ConceptId>& Taxonomy::parents(ConceptId id) const { return parents_[slot(id)]; }

bool Taxonomy::has_edge(ConceptId parent, ConceptId child) const noexcept {
  return std::binary_search(edges_.begin(), edges_.end(), Edge{parent, child});
}

int Taxonomy::depth(ConceptId id) const { return depth_[slot(id)]; }

void validate_taxonomy(const Taxonomy& t, std::optional<std::size_t> vocab_size) {
  for (const Concept& c : t.concepts()) {
    if (c.tokens.empty()) throw InvalidConcept(c.id, "empty token sequence");
    if (vocab_size) {
      for (const TokenId tok : c.tokens) {
        if (tok < 0 || static_cast<std::size_t>(tok) >= *vocab_size) {
          throw InvalidConcept(c.id, "token id " + std::to_string(tok) + " outside vocabulary");
        }
      }
    }
  }
  for (const Edge& e : t.edges()) {
    if (!t.contains(e.parent) || !t.contains(e.child)) throw DanglingEdge(e);
  }
  if (!t.contains(t.root())) throw UnknownConcept(t.root());

  // Kahn's algorithm; whatever survives with nonzero in-degree lies on or
  // behind a cycle.
  std::unordered_map<ConceptId, std::size_t> indegree;
  for (const ConceptId id : t.ids()) indegree[id] = t.parents(id).size();
  std::deque<ConceptId> ready;
  for (const ConceptId id : t.ids()) {
    if (indegree[id] == 0) ready.push_back(id);
  }
  std::size_t removed = 0;
  while (!ready.empty()) {
    const ConceptId cur = ready.front();
    ready.pop_front();
    ++removed;
    for (const ConceptId child : t.children(cur)) {
      if (--indegree[child] == 0) ready.push_back(child);
    }
  }
  if (removed != t.size()) {
    for (const Edge& e : t.edges()) {
      if (indegree[e.parent] > 0 && indegree[e.child] > 0) throw CycleDetected(e);
    }
  }

  for (const ConceptId id : t.ids()) {
    if (t.depth(id) < 0) throw UnreachableConcept(id);
  }
}

Taxonomy restrict_to_reachable(const Taxonomy& t) {
  std::vector<Concept> kept;
  for (const Concept& c : t.concepts()) {
    if (t.depth(c.id) >= 0) kept.push_back(c);
  }
  std::vector<Edge> edges;
  for (const Edge& e : t.edges()) {
    if (t.contains(e.parent) && t.contains(e.child) && t.depth(e.parent) >= 0 &&
        t.depth(e.child) >= 0) {
      edges.push_back(e);
    }
  }
  return Taxonomy(std::move(kept), std::move(edges), t.root());
}

std::vector<ConceptId> leaves(const Taxonomy& t) {
  std::vector<ConceptId> out;
  for (const ConceptId id : t.ids()) {
    if (t.children(id).empty()) out.push_back(id);
  }
  return out;
}

std::size_t fraction_count(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
}

namespace {

/// Removes the given leaves (ascending ids) and turns each into a query
/// whose gold parents are its former parents.
MaskResult remove_leaves(const Taxonomy& t, const std::vector<ConceptId>& sorted_ids) {
  MaskResult out;
  for (const ConceptId id : sorted_ids) {
    out.held_out.push_back({t.concept_of(id), t.parents(id), false});
  }
  std::vector<Concept> kept;
  for (const Concept& c : t.concepts()) {
    if (!std::binary_search(sorted_ids.begin(), sorted_ids.end(), c.id)) kept.push_back(c);
  }
  std::vector<Edge> edges;
  for (const Edge& e : t.edges()) {
    if (!std::binary_search(sorted_ids.begin(), sorted_ids.end(), e.child)) edges.push_back(e);
  }
  out.taxonomy = Taxonomy(std::move(kept), std::move(edges), t.root());
  return out;
}

}  // namespace

MaskResult mask_leaves(const Taxonomy& t, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw InvalidFraction(fraction);
  std::vector<ConceptId> candidates = leaves(t);
  const std::size_t k = fraction_count(fraction, candidates.size());
  CounterRng rng(derive_seed(seed, "mask_leaves"));
  rng.shuffle(candidates);
  candidates.resize(k);
  std::sort(candidates.begin(), candidates.end());
  return remove_leaves(t, candidates);
}

BenchmarkSplit make_benchmark_split(const Taxonomy& t, double mask_fraction, double noise_ratio,
                                    const NoiseSource& noise, std::uint64_t seed) {
  if (!(mask_fraction >= 0.0 && mask_fraction <= 0.5)) throw InvalidFraction(mask_fraction);
  if (!(noise_ratio >= 0.0)) throw InvalidFraction(noise_ratio);
  std::vector<ConceptId> candidates = leaves(t);
  const std::size_t n = fraction_count(mask_fraction, candidates.size());
  CounterRng rng(derive_seed(seed, "split/leaves"));
  rng.shuffle(candidates);
  std::vector<ConceptId> val_ids(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(n));
  std::vector<ConceptId> test_ids(candidates.begin() + static_cast<std::ptrdiff_t>(n),
                                  candidates.begin() + static_cast<std::ptrdiff_t>(2 * n));
  std::vector<ConceptId> all(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(2 * n));
  std::sort(val_ids.begin(), val_ids.end());
  std::sort(test_ids.begin(), test_ids.end());
  std::sort(all.begin(), all.end());

  MaskResult masked = remove_leaves(t, all);
  std::vector<QueryRecord> val;
  std::vector<QueryRecord> test;
  for (QueryRecord& r : masked.held_out) {
    (std::binary_search(val_ids.begin(), val_ids.end(), r.query.id) ? val : test).push_back(std::move(r));
  }

  BenchmarkSplit out;
  out.seed = seed;
  const ConceptId first_val_noise = max_concept_id(t) + 1;
  const ConceptId first_test_noise =
      first_val_noise + static_cast<ConceptId>(fraction_count(noise_ratio, val.size()));
  out.val_queries = inject_noise_queries(std::move(val), noise_ratio, noise, derive_seed(seed, "split/val"),
                                         first_val_noise);
  out.test_queries = inject_noise_queries(std::move(test), noise_ratio, noise, derive_seed(seed, "split/test"),
                                          first_test_noise);
  out.train_taxonomy = std::move(masked.taxonomy);
  return out;
}

std::vector<QueryRecord> inject_noise_queries(std::vector<QueryRecord> records, double ratio,
                                              const NoiseSource& noise, std::uint64_t seed,
                                              ConceptId first_noise_id) {
  if (!(ratio >= 0.0)) throw InvalidFraction(ratio);
  const std::size_t n_noise = fraction_count(ratio, records.size());
  CounterRng draw_rng(derive_seed(seed, "noise/draw"));
  for (std::size_t i = 0; i < n_noise; ++i) {
    QueryRecord r;
    r.query.id = first_noise_id + static_cast<ConceptId>(i);
    r.query.tokens = noise.draw(draw_rng);
    r.is_noise = true;
    records.push_back(std::move(r));
  }
  CounterRng order_rng(derive_seed(seed, "noise/order"));
  order_rng.shuffle(records);
  return records;
}

std::vector<ConceptPair> sample_positive_pairs(const Taxonomy& t, std::size_t n, std::uint64_t seed) {
  const auto& edges = t.edges();
  if (edges.empty()) throw EmptyEdgeSet();
  CounterRng rng(derive_seed(seed, "positive_pairs"));
  std::vector<ConceptPair> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(edges[rng.below(edges.size())]);
  return out;
}

std::vector<std::vector<ConceptId>> descendant_sets(const Taxonomy& t) {
  // Reverse topological accumulation would be faster; a DFS per node is
  // plenty at the sizes this library targets.
  std::vector<std::vector<ConceptId>> out(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    std::vector<ConceptId> stack(t.children(t.ids()[i]).begin(), t.children(t.ids()[i]).end());
    std::vector<ConceptId>& seen = out[i];
    while (!stack.empty()) {
      const ConceptId cur = stack.back();
      stack.pop_back();
      const auto pos = std::lower_bound(seen.begin(), seen.end(), cur);
      if (pos != seen.end() && *pos == cur) continue;
      seen.insert(pos, cur);
      for (const ConceptId c : t.children(cur)) stack.push_back(c);
    }
  }
  return out;
}

std::vector<ConceptPair> sample_negative_pairs(const Taxonomy& t, std::size_t n, std::uint64_t seed) {
  const auto desc = descendant_sets(t);
  const std::size_t nodes = t.size();
  std::size_t valid = 0;
  for (std::size_t i = 0; i < nodes; ++i) valid += nodes - 1 - desc[i].size();
  if (valid == 0) throw NoNegativesAvailable();

  CounterRng rng(derive_seed(seed, "negative_pairs"));
  std::vector<ConceptPair> out;
  out.reserve(n);
  while (out.size() < n) {
    const std::size_t ai = rng.below(nodes);
    const std::size_t qi = rng.below(nodes);
    if (ai == qi) continue;
    const ConceptId q = t.ids()[qi];
    if (std::binary_search(desc[ai].begin(), desc[ai].end(), q)) continue;
    out.push_back({t.ids()[ai], q});
  }
  return out;
}

int anchor_depth(const Taxonomy& t, ConceptId id) {
  const int d = t.depth(id);
  if (d < 0) throw UnreachableConcept(id);
  return d;
}

ConceptId max_concept_id(const Taxonomy& t) { return t.ids().empty() ? -1 : t.ids().back(); }

}  // namespace taxogate
