#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "taxogate/taxonomy.hpp"

namespace taxogate {

class EmptyBatch : public std::invalid_argument {
 public:
  EmptyBatch() : std::invalid_argument("batch is empty") {}
};

class EmptySequence : public std::invalid_argument {
 public:
  EmptySequence() : std::invalid_argument("token sequence is empty") {}
};

enum class Label { positive, negative };

std::string_view label_name(Label l) noexcept;

/// Reserved token ids; every surface token id is >= kFirstSurfaceToken.
namespace tokens {
inline constexpr TokenId kPad = 0;
inline constexpr TokenId kPositive = 1;
inline constexpr TokenId kNegative = 2;
inline constexpr TokenId kSep = 3;
inline constexpr TokenId kEos = 4;
inline constexpr TokenId kSummary = 5;  // read-out marker for the concept encoder
inline constexpr TokenId kUnknown = 6;
inline constexpr TokenId kFirstSurfaceToken = 7;
}  // namespace tokens

inline TokenId label_token(Label l) noexcept {
  return l == Label::positive ? tokens::kPositive : tokens::kNegative;
}

/// Bidirectional token <-> id table. Surface tokens keep the order they were
/// given in, starting at kFirstSurfaceToken.
class Vocab {
 public:
  Vocab();
  explicit Vocab(const std::vector<std::string>& surface_tokens);

  std::size_t size() const noexcept { return names_.size(); }
  std::size_t surface_size() const noexcept { return names_.size() - tokens::kFirstSurfaceToken; }

  std::optional<TokenId> find(std::string_view token) const;
  /// Unknown strings map to kUnknown.
  TokenId id(std::string_view token) const;
  const std::string& token(TokenId id) const;

  TokenSeq encode(const std::vector<std::string>& words) const;
  std::string decode(const TokenSeq& seq) const;  // space-joined

  const std::vector<std::string>& names() const noexcept { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, TokenId> ids_;
};

/// One labelled (anchor, query) example: the unit of generation and of
/// discrimination.
struct TrainingTriple {
  Label label = Label::positive;
  ConceptId anchor_id = 0;
  TokenSeq anchor;
  TokenSeq query;
};

TrainingTriple make_triple(const Taxonomy& t, Label label, ConceptPair pair);
/// Triple whose query is an arbitrary token string rather than a concept.
TrainingTriple make_triple(const Taxonomy& t, Label label, ConceptId anchor, TokenSeq query);

}  // namespace taxogate
