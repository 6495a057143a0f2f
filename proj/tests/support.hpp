#pragma once

// Small fixtures shared by the unit tests.

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>
#include <vector>

#include "taxogate/discriminators.hpp"
#include "taxogate/generator.hpp"
#include "taxogate/taxonomy.hpp"
#include "taxogate/vocab.hpp"

namespace taxogate::testing {

inline Concept make_concept(ConceptId id, TokenSeq tokens) { return Concept{id, std::move(tokens)}; }

/// Concept i gets the single token 7 + i, so surfaces are distinct.
inline Taxonomy make_graph(std::vector<ConceptId> ids, std::vector<Edge> edges, ConceptId root) {
  std::vector<Concept> concepts;
  for (ConceptId id : ids) concepts.push_back(make_concept(id, {tokens::kFirstSurfaceToken + id}));
  return Taxonomy(std::move(concepts), std::move(edges), root);
}

/// 0 -> 1 -> ... -> n-1.
inline Taxonomy make_chain(int n) {
  std::vector<ConceptId> ids;
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) {
    ids.push_back(i);
    if (i > 0) edges.push_back({i - 1, i});
  }
  return make_graph(ids, edges, 0);
}

/// Complete b-ary tree with breadth-first ids; each child's tokens are its
/// parent's tokens plus one fresh token.
inline Taxonomy make_tree(int branching, int depth) {
  std::vector<Concept> concepts{make_concept(0, {tokens::kFirstSurfaceToken})};
  std::vector<Edge> edges;
  std::vector<ConceptId> level{0};
  ConceptId next = 1;
  for (int d = 1; d <= depth; ++d) {
    std::vector<ConceptId> below;
    for (ConceptId p : level) {
      for (int j = 0; j < branching; ++j) {
        TokenSeq toks = concepts[static_cast<std::size_t>(p)].tokens;
        toks.push_back(tokens::kFirstSurfaceToken + next);
        concepts.push_back(make_concept(next, toks));
        edges.push_back({p, next});
        below.push_back(next++);
      }
    }
    level = below;
  }
  return Taxonomy(std::move(concepts), std::move(edges), 0);
}

inline std::size_t surface_bound(const Taxonomy& t) {
  TokenId max_tok = tokens::kFirstSurfaceToken;
  for (const Concept& c : t.concepts()) {
    for (TokenId tok : c.tokens) max_tok = std::max(max_tok, tok);
  }
  return static_cast<std::size_t>(max_tok) + 1;
}

inline GeneratorConfig tiny_generator(std::size_t vocab, std::uint64_t seed = 3) {
  GeneratorConfig c;
  c.vocab_size = vocab;
  c.width = 8;
  c.blocks = 1;
  c.heads = 2;
  c.context = 16;
  c.feed_forward = true;
  c.ff_width = 12;
  c.seed = seed;
  c.init_range = 0.3;
  return c;
}

inline RolloutDiscConfig tiny_rollout(std::size_t vocab, std::uint64_t seed = 5) {
  RolloutDiscConfig c;
  c.vocab_size = vocab;
  c.embed = 6;
  c.hidden = 5;
  c.seed = seed;
  c.init_range = 0.3;
  return c;
}

inline HyperDiscConfig tiny_hyper(std::size_t vocab, int max_depth, std::uint64_t seed = 7) {
  HyperDiscConfig c;
  c.vocab_size = vocab;
  c.dim = 6;
  c.max_depth = max_depth;
  c.seed = seed;
  c.init_range = 0.3;
  return c;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("taxogate_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace taxogate::testing
