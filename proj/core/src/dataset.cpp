#include "taxogate/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace taxogate {

ParseError::ParseError(std::string f, std::size_t l, std::string r)
    : std::runtime_error(f + ":" + std::to_string(l) + ": " + r), file(std::move(f)), line(l), reason(std::move(r)) {}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string> words(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

/// Calls fn(line_number, fields) for every non-blank line.
template <typename Fn>
void for_each_record(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    fn(number, split(line, '\t'));
  }
}

ConceptId parse_id(const std::string& field, const std::filesystem::path& path, std::size_t line) {
  ConceptId v = 0;
  const char* b = field.data();
  const char* e = b + field.size();
  const auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e || field.empty()) {
    throw ParseError(path.string(), line, "expected an integer id, got '" + field + "'");
  }
  return v;
}

void expect_fields(const std::vector<std::string>& f, std::size_t n, const std::filesystem::path& path,
                   std::size_t line) {
  if (f.size() != n) throw ParseError(path.string(), line, "expected " + std::to_string(n) + " fields");
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

std::string join_tokens(const TokenSeq& seq, const Vocab& vocab) { return vocab.decode(seq); }

}  // namespace

std::vector<RawConcept> read_concepts(const std::filesystem::path& path) {
  std::vector<RawConcept> out;
  std::set<ConceptId> seen;
  for_each_record(path, [&](std::size_t line, const std::vector<std::string>& f) {
    expect_fields(f, 2, path, line);
    RawConcept c{parse_id(f[0], path, line), words(f[1])};
    if (c.tokens.empty()) throw ParseError(path.string(), line, "concept has no tokens");
    if (!seen.insert(c.id).second) throw ParseError(path.string(), line, "duplicate concept id " + f[0]);
    out.push_back(std::move(c));
  });
  return out;
}

std::vector<Edge> read_edges(const std::filesystem::path& path) {
  std::vector<Edge> out;
  for_each_record(path, [&](std::size_t line, const std::vector<std::string>& f) {
    expect_fields(f, 2, path, line);
    out.push_back({parse_id(f[0], path, line), parse_id(f[1], path, line)});
  });
  return out;
}

std::vector<RawQuery> read_queries(const std::filesystem::path& path) {
  std::vector<RawQuery> out;
  for_each_record(path, [&](std::size_t line, const std::vector<std::string>& f) {
    expect_fields(f, 3, path, line);
    RawQuery q;
    q.id = parse_id(f[0], path, line);
    q.tokens = words(f[1]);
    if (q.tokens.empty()) throw ParseError(path.string(), line, "query has no tokens");
    if (f[2] == "NOISE") {
      q.is_noise = true;
    } else {
      for (const std::string& g : split(f[2], ',')) q.gold_parents.push_back(parse_id(g, path, line));
      std::sort(q.gold_parents.begin(), q.gold_parents.end());
    }
    out.push_back(std::move(q));
  });
  return out;
}

void write_concepts(const std::filesystem::path& path, const Taxonomy& t, const Vocab& vocab) {
  auto out = open_out(path);
  for (const Concept& c : t.concepts()) out << c.id << '\t' << join_tokens(c.tokens, vocab) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

void write_edges(const std::filesystem::path& path, const Taxonomy& t) {
  auto out = open_out(path);
  for (const Edge& e : t.edges()) out << e.parent << '\t' << e.child << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

void write_queries(const std::filesystem::path& path, const std::vector<QueryRecord>& queries, const Vocab& vocab) {
  auto out = open_out(path);
  for (const QueryRecord& q : queries) {
    out << q.query.id << '\t' << join_tokens(q.query.tokens, vocab) << '\t';
    if (q.is_noise) {
      out << "NOISE";
    } else {
      for (std::size_t i = 0; i < q.gold_parents.size(); ++i) out << (i ? "," : "") << q.gold_parents[i];
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

Vocab build_vocab(const std::vector<RawConcept>& concepts, const std::vector<RawQuery>& queries) {
  std::set<std::string> all;
  for (const auto& c : concepts) all.insert(c.tokens.begin(), c.tokens.end());
  for (const auto& q : queries) all.insert(q.tokens.begin(), q.tokens.end());
  return Vocab(std::vector<std::string>(all.begin(), all.end()));
}

ConceptId infer_root(const std::vector<Concept>& concepts, const std::vector<Edge>& edges) {
  if (concepts.empty()) throw TaxonomyError("cannot infer the root of an empty taxonomy");
  std::set<ConceptId> has_parent;
  for (const Edge& e : edges) has_parent.insert(e.child);
  const Taxonomy t(concepts, edges, concepts.front().id);
  ConceptId best = -1;
  std::size_t best_reach = 0;
  const auto desc = descendant_sets(t);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const ConceptId id = t.ids()[i];
    if (has_parent.contains(id)) continue;
    if (best < 0 || desc[i].size() > best_reach) {
      best = id;
      best_reach = desc[i].size();
    }
  }
  if (best < 0) throw TaxonomyError("every concept has a parent, so no root exists");
  return best;
}

Taxonomy assemble_taxonomy(const std::vector<RawConcept>& concepts, const std::vector<Edge>& edges,
                           const Vocab& vocab, bool drop_unreachable) {
  std::vector<Concept> encoded;
  encoded.reserve(concepts.size());
  for (const auto& c : concepts) encoded.push_back({c.id, vocab.encode(c.tokens)});
  const ConceptId root = infer_root(encoded, edges);
  Taxonomy t(std::move(encoded), edges, root);
  if (drop_unreachable) {
    for (const Edge& e : t.edges()) {
      if (!t.contains(e.parent) || !t.contains(e.child)) throw DanglingEdge(e);
    }
    t = restrict_to_reachable(t);
  }
  validate_taxonomy(t, vocab.size());
  return t;
}

std::vector<QueryRecord> encode_queries(const std::vector<RawQuery>& queries, const Vocab& vocab) {
  std::vector<QueryRecord> out;
  out.reserve(queries.size());
  for (const auto& q : queries) out.push_back({{q.id, vocab.encode(q.tokens)}, q.gold_parents, q.is_noise});
  return out;
}

ParsedTaxonomy parse_taxonomy_files(const std::filesystem::path& concepts_path,
                                    const std::filesystem::path& edges_path, bool drop_unreachable) {
  const auto concepts = read_concepts(concepts_path);
  const auto edges = read_edges(edges_path);
  Vocab vocab = build_vocab(concepts);
  Taxonomy t = assemble_taxonomy(concepts, edges, vocab, drop_unreachable);
  return {std::move(t), std::move(vocab)};
}

SynthResult synth_taxonomy(int branching, int depth, int modifier_vocab_size, std::uint64_t seed) {
  if (branching < 1) throw std::invalid_argument("branching must be >= 1");
  if (depth < 0) throw std::invalid_argument("depth must be >= 0");
  if (depth > 0 && modifier_vocab_size < branching) {
    throw std::invalid_argument("modifier_vocab_size must be at least the branching factor");
  }
  std::vector<std::string> names{"r"};
  for (int k = 1; k <= depth; ++k) {
    for (int j = 0; j < modifier_vocab_size; ++j) names.push_back("m" + std::to_string(k) + "_" + std::to_string(j));
  }
  std::vector<std::string> sorted = names;
  std::sort(sorted.begin(), sorted.end());
  Vocab vocab(sorted);

  std::vector<Concept> concepts{{0, {vocab.id("r")}}};
  std::vector<Edge> edges;
  std::vector<ConceptId> frontier{0};
  ConceptId next = 1;
  for (int k = 1; k <= depth; ++k) {
    std::vector<ConceptId> level;
    for (const ConceptId parent : frontier) {
      std::vector<int> pool(static_cast<std::size_t>(modifier_vocab_size));
      for (int j = 0; j < modifier_vocab_size; ++j) pool[static_cast<std::size_t>(j)] = j;
      CounterRng rng(derive_seed(derive_seed(seed, "synth/modifiers"), static_cast<std::uint64_t>(parent)));
      rng.shuffle(pool);
      const TokenSeq base = concepts[static_cast<std::size_t>(parent)].tokens;
      for (int c = 0; c < branching; ++c) {
        TokenSeq tokens = base;
        tokens.push_back(vocab.id("m" + std::to_string(k) + "_" + std::to_string(pool[static_cast<std::size_t>(c)])));
        concepts.push_back({next, std::move(tokens)});
        edges.push_back({parent, next});
        level.push_back(next++);
      }
    }
    frontier = std::move(level);
  }
  Taxonomy t(std::move(concepts), std::move(edges), 0);
  return {std::move(t), std::move(vocab)};
}

}  // namespace taxogate
