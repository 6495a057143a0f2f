#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>

#include "support.hpp"
#include "taxogate/noise.hpp"
#include "taxogate/taxonomy.hpp"

namespace taxogate {
namespace {

using testing::make_chain;
using testing::make_graph;
using testing::make_tree;

// Random DAG generator for property tests: parents always have lower ids, so
// the graph is acyclic, and every node has at least one parent, so it is
// reachable from 0.
Taxonomy random_dag(std::uint64_t seed, int max_nodes = 50) {
  CounterRng rng(seed);
  const int n = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_nodes - 1)));
  std::vector<ConceptId> ids;
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) {
    ids.push_back(i);
    if (i == 0) continue;
    edges.push_back({static_cast<ConceptId>(rng.below(static_cast<std::uint64_t>(i))), i});
    if (i > 1 && rng.uniform() < 0.3) {
      edges.push_back({static_cast<ConceptId>(rng.below(static_cast<std::uint64_t>(i))), i});
    }
  }
  return make_graph(ids, edges, 0);
}

// Independent reachability by repeated relaxation.
std::set<ConceptId> brute_descendants(const Taxonomy& t, ConceptId a) {
  std::set<ConceptId> out;
  bool changed = true;
  while (changed) {
    changed = false;
    for (const Edge& e : t.edges()) {
      if ((e.parent == a || out.contains(e.parent)) && !out.contains(e.child)) {
        out.insert(e.child);
        changed = true;
      }
    }
  }
  return out;
}

TEST(ValidateTaxonomy, TwoCycleIsDetected) {
  const Taxonomy t = make_graph({1, 2}, {{1, 2}, {2, 1}}, 1);
  EXPECT_THROW(validate_taxonomy(t), CycleDetected);
}

TEST(ValidateTaxonomy, ChainIsValid) { EXPECT_NO_THROW(validate_taxonomy(make_chain(3))); }

TEST(ValidateTaxonomy, IsolatedConceptIsUnreachable) {
  const Taxonomy t = make_graph({1, 2, 9}, {{1, 2}}, 1);
  try {
    validate_taxonomy(t);
    FAIL() << "expected UnreachableConcept";
  } catch (const UnreachableConcept& e) {
    EXPECT_EQ(e.id, 9);
  }
}

TEST(ValidateTaxonomy, DanglingEdgeAndBadTokens) {
  EXPECT_THROW(validate_taxonomy(make_graph({0, 1}, {{0, 1}, {1, 5}}, 0)), DanglingEdge);
  const Taxonomy empty_tokens({{0, {}}}, {}, 0);
  EXPECT_THROW(validate_taxonomy(empty_tokens), InvalidConcept);
  // Token 7 + 1 = 8 is outside a vocabulary of size 8.
  EXPECT_THROW(validate_taxonomy(make_chain(2), 8), InvalidConcept);
  EXPECT_NO_THROW(validate_taxonomy(make_chain(2), 9));
}

TEST(ValidateTaxonomy, RandomDagsAreValid) {
  for (std::uint64_t s = 0; s < 100; ++s) EXPECT_NO_THROW(validate_taxonomy(random_dag(s)));
}

TEST(RestrictToReachable, DropsIslands) {
  const Taxonomy t = make_graph({0, 1, 5, 6}, {{0, 1}, {5, 6}}, 0);
  const Taxonomy r = restrict_to_reachable(t);
  EXPECT_EQ(r.ids(), (std::vector<ConceptId>{0, 1}));
  EXPECT_EQ(r.edges().size(), 1u);
  EXPECT_NO_THROW(validate_taxonomy(r));
}

TEST(Leaves, Examples) {
  EXPECT_EQ(leaves(make_chain(3)), (std::vector<ConceptId>{2}));
  EXPECT_EQ(leaves(make_tree(2, 2)), (std::vector<ConceptId>{3, 4, 5, 6}));
  EXPECT_EQ(leaves(make_chain(1)), (std::vector<ConceptId>{0}));
}

TEST(MaskLeaves, CountsFollowTheFloor) {
  // Root with ten leaf children.
  std::vector<ConceptId> ids{0};
  std::vector<Edge> edges;
  for (int i = 1; i <= 10; ++i) {
    ids.push_back(i);
    edges.push_back({0, i});
  }
  const Taxonomy star = make_graph(ids, edges, 0);
  const MaskResult m = mask_leaves(star, 0.2, 7);
  EXPECT_EQ(m.held_out.size(), 2u);
  EXPECT_EQ(m.taxonomy.size(), 9u);

  const Taxonomy chain = make_chain(4);
  const MaskResult none = mask_leaves(chain, 0.2, 7);
  EXPECT_TRUE(none.held_out.empty());
  EXPECT_EQ(none.taxonomy.ids(), chain.ids());
  EXPECT_EQ(none.taxonomy.edges(), chain.edges());
}

TEST(MaskLeaves, DeterministicUnderSeed) {
  const Taxonomy t = make_tree(3, 3);
  const MaskResult a = mask_leaves(t, 0.2, 7);
  const MaskResult b = mask_leaves(t, 0.2, 7);
  ASSERT_EQ(a.held_out.size(), b.held_out.size());
  for (std::size_t i = 0; i < a.held_out.size(); ++i) {
    EXPECT_EQ(a.held_out[i].query.id, b.held_out[i].query.id);
  }
}

TEST(MaskLeaves, HeldOutAreLeavesWithTheirParentsAsGold) {
  for (std::uint64_t s = 0; s < 30; ++s) {
    const Taxonomy t = random_dag(s);
    const auto leaf_list = leaves(t);
    const MaskResult m = mask_leaves(t, 0.3, s);
    EXPECT_EQ(m.held_out.size(), fraction_count(0.3, leaf_list.size()));
    EXPECT_NO_THROW(validate_taxonomy(m.taxonomy));
    for (const QueryRecord& q : m.held_out) {
      EXPECT_TRUE(std::binary_search(leaf_list.begin(), leaf_list.end(), q.query.id));
      EXPECT_FALSE(m.taxonomy.contains(q.query.id));
      EXPECT_FALSE(q.is_noise);
      EXPECT_EQ(q.gold_parents, t.parents(q.query.id));
      for (ConceptId p : q.gold_parents) EXPECT_TRUE(m.taxonomy.contains(p));
    }
  }
}

TEST(MaskLeaves, RejectsBadFraction) {
  EXPECT_THROW(mask_leaves(make_chain(3), 1.5, 0), InvalidFraction);
  EXPECT_THROW(mask_leaves(make_chain(3), -0.1, 0), InvalidFraction);
}

TEST(InjectNoise, CountsAndIds) {
  std::vector<QueryRecord> clean;
  for (int i = 0; i < 50; ++i) clean.push_back({{i, {7 + i}}, {0}, false});
  const UniformNoise noise(7, 20, 1, 3);
  const auto out = inject_noise_queries(clean, 0.6, noise, 11, 1000);
  ASSERT_EQ(out.size(), 80u);
  std::set<ConceptId> noise_ids;
  for (const QueryRecord& q : out) {
    EXPECT_EQ(q.is_noise, q.gold_parents.empty());
    if (q.is_noise) noise_ids.insert(q.query.id);
  }
  EXPECT_EQ(noise_ids.size(), 30u);
  EXPECT_EQ(*noise_ids.begin(), 1000);
  EXPECT_EQ(*noise_ids.rbegin(), 1029);
}

TEST(InjectNoise, ZeroRatioPermutes) {
  std::vector<QueryRecord> clean;
  for (int i = 0; i < 20; ++i) clean.push_back({{i, {7}}, {0}, false});
  const UniformNoise noise(7, 9, 1, 1);
  const auto out = inject_noise_queries(clean, 0.0, noise, 3, 100);
  ASSERT_EQ(out.size(), clean.size());
  std::vector<ConceptId> ids;
  for (const auto& q : out) ids.push_back(q.query.id);
  std::sort(ids.begin(), ids.end());
  for (int i = 0; i < 20; ++i) EXPECT_EQ(ids[static_cast<std::size_t>(i)], i);
}

TEST(BenchmarkSplit, SyntheticProtocolCounts) {
  const Taxonomy t = make_tree(3, 5);
  ASSERT_EQ(t.size(), 364u);
  ASSERT_EQ(leaves(t).size(), 243u);
  const UniformNoise noise(7, 40, 1, 4);
  const BenchmarkSplit s = make_benchmark_split(t, 0.2, 0.6, noise, 1);
  for (const auto* split : {&s.val_queries, &s.test_queries}) {
    std::size_t clean = 0, noisy = 0;
    for (const QueryRecord& q : *split) (q.is_noise ? noisy : clean) += 1;
    EXPECT_EQ(clean, 48u);
    EXPECT_EQ(noisy, 28u);
  }
  EXPECT_NO_THROW(validate_taxonomy(s.train_taxonomy));
  std::set<ConceptId> seen;
  for (const auto* split : {&s.val_queries, &s.test_queries}) {
    for (const QueryRecord& q : *split) {
      EXPECT_TRUE(seen.insert(q.query.id).second) << "query id reused: " << q.query.id;
      EXPECT_FALSE(s.train_taxonomy.contains(q.query.id));
      for (ConceptId p : q.gold_parents) EXPECT_TRUE(s.train_taxonomy.contains(p));
    }
  }
  EXPECT_EQ(s.train_taxonomy.size(), 364u - 96u);
  EXPECT_THROW(make_benchmark_split(t, 0.6, 0.6, noise, 1), InvalidFraction);
}

TEST(SamplePositive, SingleEdgeRepeats) {
  const auto pairs = sample_positive_pairs(make_chain(2), 5, 0);
  ASSERT_EQ(pairs.size(), 5u);
  for (const auto& p : pairs) EXPECT_EQ(p, (Edge{0, 1}));
}

TEST(SamplePositive, UniformOverEdges) {
  const Taxonomy t = make_tree(3, 2);  // 12 edges
  const std::size_t n = 12000;
  const auto pairs = sample_positive_pairs(t, n, 42);
  std::map<Edge, std::size_t> counts;
  for (const auto& p : pairs) {
    ASSERT_TRUE(t.has_edge(p.parent, p.child));
    ++counts[p];
  }
  ASSERT_EQ(counts.size(), 12u);
  // Binomial(n, 1/12): mean 1000, sd about 30; allow 5 sd.
  for (const auto& [e, c] : counts) EXPECT_NEAR(static_cast<double>(c), 1000.0, 150.0);
  EXPECT_THROW(sample_positive_pairs(make_chain(1), 3, 0), EmptyEdgeSet);
}

TEST(SampleNegative, ChainAndTwoNode) {
  const auto chain_pairs = sample_negative_pairs(make_chain(3), 200, 1);
  std::set<Edge> seen(chain_pairs.begin(), chain_pairs.end());
  EXPECT_TRUE(seen.contains(Edge{2, 0}));
  EXPECT_FALSE(seen.contains(Edge{0, 2}));
  const auto two = sample_negative_pairs(make_chain(2), 10, 1);
  for (const auto& p : two) EXPECT_EQ(p, (Edge{1, 0}));
  EXPECT_THROW(sample_negative_pairs(make_chain(1), 1, 0), NoNegativesAvailable);
}

TEST(SampleNegative, NeverADescendantOnRandomDags) {
  for (std::uint64_t s = 0; s < 40; ++s) {
    const Taxonomy t = random_dag(s, 30);
    const auto pairs = sample_negative_pairs(t, 300, s);
    for (const auto& p : pairs) {
      ASSERT_NE(p.parent, p.child);
      EXPECT_FALSE(brute_descendants(t, p.parent).contains(p.child));
    }
  }
}

TEST(DescendantSets, MatchRelaxation) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Taxonomy t = random_dag(s, 25);
    const auto sets = descendant_sets(t);
    for (std::size_t i = 0; i < t.ids().size(); ++i) {
      const auto brute = brute_descendants(t, t.ids()[i]);
      EXPECT_EQ(std::vector<ConceptId>(brute.begin(), brute.end()), sets[i]);
    }
  }
}

TEST(AnchorDepth, Examples) {
  EXPECT_EQ(anchor_depth(make_chain(3), 0), 0);
  EXPECT_EQ(anchor_depth(make_chain(3), 2), 2);
  // Diamond: 0 -> {1, 2} -> 3 plus a long way round.
  const Taxonomy diamond = make_graph({0, 1, 2, 3, 4}, {{0, 1}, {0, 2}, {1, 3}, {2, 3}, {0, 4}, {4, 1}}, 0);
  EXPECT_EQ(anchor_depth(diamond, 3), 2);
  EXPECT_THROW(anchor_depth(diamond, 99), UnknownConcept);
}

TEST(MaxConceptId, Largest) { EXPECT_EQ(max_concept_id(make_graph({3, 17, 5}, {}, 3)), 17); }

TEST(Noise, UniformRespectsBounds) {
  const UniformNoise noise(7, 12, 2, 4);
  CounterRng rng(9);
  for (int i = 0; i < 500; ++i) {
    const TokenSeq s = noise.draw(rng);
    EXPECT_GE(s.size(), 2u);
    EXPECT_LE(s.size(), 4u);
    for (TokenId tok : s) {
      EXPECT_GE(tok, 7);
      EXPECT_LT(tok, 12);
    }
  }
}

TEST(Noise, ShuffledIsNeverARealConcept) {
  const std::vector<TokenSeq> real{{7, 8, 9}, {7, 8}, {10}, {11, 12, 13, 14}};
  const ShuffledConceptNoise noise(real);
  CounterRng rng(4);
  const std::set<TokenSeq> real_set(real.begin(), real.end());
  for (int i = 0; i < 500; ++i) {
    TokenSeq s = noise.draw(rng);
    EXPECT_FALSE(real_set.contains(s));
    std::sort(s.begin(), s.end());
    // The bag of tokens belongs to a real concept with >= 2 distinct tokens.
    EXPECT_TRUE(s == TokenSeq({7, 8, 9}) || s == TokenSeq({7, 8}) || s == TokenSeq({11, 12, 13, 14}));
  }
}

TEST(Rng, StreamsArePureFunctionsOfKeyAndCounter) {
  CounterRng a(5), b(5);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
  CounterRng c(5, 3);
  CounterRng d(5);
  d.next_u64();
  d.next_u64();
  d.next_u64();
  EXPECT_EQ(c.next_u64(), d.next_u64());
  EXPECT_NE(derive_seed(1, "a"), derive_seed(1, "b"));
  EXPECT_NE(derive_seed(1, std::uint64_t{0}), derive_seed(1, std::uint64_t{1}));
  CounterRng e(77);
  for (int i = 0; i < 1000; ++i) {
    const double u = e.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_LT(e.below(7), 7u);
  }
}

}  // namespace
}  // namespace taxogate
