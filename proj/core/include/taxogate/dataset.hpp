#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "taxogate/taxonomy.hpp"
#include "taxogate/vocab.hpp"

namespace taxogate {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::string file, std::size_t line, std::string reason);
  std::string file;
  std::size_t line;
  std::string reason;
};

/// A concept or query as it appears on disk, before vocabulary lookup.
struct RawConcept {
  ConceptId id = 0;
  std::vector<std::string> tokens;
};

struct RawQuery {
  ConceptId id = 0;
  std::vector<std::string> tokens;
  std::vector<ConceptId> gold_parents;
  bool is_noise = false;
};

// File formats (UTF-8, one record per line, '\t' separated, no header):
//   concepts  <id>\t<token> <token> ...
//   edges     <parent_id>\t<child_id>
//   queries   <id>\t<token> <token> ...\t<gold,ids> | NOISE
std::vector<RawConcept> read_concepts(const std::filesystem::path& path);
std::vector<Edge> read_edges(const std::filesystem::path& path);
std::vector<RawQuery> read_queries(const std::filesystem::path& path);

void write_concepts(const std::filesystem::path& path, const Taxonomy& t, const Vocab& vocab);
void write_edges(const std::filesystem::path& path, const Taxonomy& t);
void write_queries(const std::filesystem::path& path, const std::vector<QueryRecord>& queries, const Vocab& vocab);

/// Vocabulary over the sorted union of every token that appears.
Vocab build_vocab(const std::vector<RawConcept>& concepts, const std::vector<RawQuery>& queries = {});

/// The parentless concept reaching the most concepts; ties by lowest id.
ConceptId infer_root(const std::vector<Concept>& concepts, const std::vector<Edge>& edges);

/// Encodes raw concepts and builds the taxonomy. With `drop_unreachable`,
/// concepts the root cannot reach are removed first; the result is validated.
Taxonomy assemble_taxonomy(const std::vector<RawConcept>& concepts, const std::vector<Edge>& edges,
                           const Vocab& vocab, bool drop_unreachable = true);

std::vector<QueryRecord> encode_queries(const std::vector<RawQuery>& queries, const Vocab& vocab);

struct ParsedTaxonomy {
  Taxonomy taxonomy;
  Vocab vocab;
};

/// Reads a concept file and an edge file; the vocabulary comes from the
/// concept file alone.
ParsedTaxonomy parse_taxonomy_files(const std::filesystem::path& concepts_path,
                                    const std::filesystem::path& edges_path, bool drop_unreachable = true);

struct SynthResult {
  Taxonomy taxonomy;
  Vocab vocab;
};

/// Complete b-ary tree of depth d with compositional names: the root is
/// "r"; a depth-k child appends one modifier "m<k>_<j>" drawn from a pool of
/// `modifier_vocab_size` tokens private to depth k, distinct among siblings.
/// Concept ids follow breadth-first order from 0.
SynthResult synth_taxonomy(int branching, int depth, int modifier_vocab_size, std::uint64_t seed);

}  // namespace taxogate
