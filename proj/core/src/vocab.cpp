#include "taxogate/vocab.hpp"

#include <stdexcept>

namespace taxogate {

std::string_view label_name(Label l) noexcept { return l == Label::positive ? "positive" : "negative"; }

Vocab::Vocab() : names_{"<PAD>", "<POS>", "<NEG>", "<SEP>", "<EOS>", "<SUM>", "<UNK>"} {
  for (std::size_t i = 0; i < names_.size(); ++i) ids_.emplace(names_[i], static_cast<TokenId>(i));
}

Vocab::Vocab(const std::vector<std::string>& surface_tokens) : Vocab() {
  for (const std::string& tok : surface_tokens) {
    if (tok.empty()) throw std::invalid_argument("vocab: empty token");
    if (ids_.contains(tok)) throw std::invalid_argument("vocab: duplicate token '" + tok + "'");
    ids_.emplace(tok, static_cast<TokenId>(names_.size()));
    names_.push_back(tok);
  }
}

std::optional<TokenId> Vocab::find(std::string_view token) const {
  const auto it = ids_.find(std::string(token));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocab::id(std::string_view token) const { return find(token).value_or(tokens::kUnknown); }

const std::string& Vocab::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= names_.size()) {
    throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary");
  }
  return names_[static_cast<std::size_t>(id)];
}

TokenSeq Vocab::encode(const std::vector<std::string>& words) const {
  TokenSeq out;
  out.reserve(words.size());
  for (const auto& w : words) out.push_back(id(w));
  return out;
}

std::string Vocab::decode(const TokenSeq& seq) const {
  std::string out;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (i) out.push_back(' ');
    out += token(seq[i]);
  }
  return out;
}

TrainingTriple make_triple(const Taxonomy& t, Label label, ConceptPair pair) {
  return {label, pair.parent, t.concept_of(pair.parent).tokens, t.concept_of(pair.child).tokens};
}

TrainingTriple make_triple(const Taxonomy& t, Label label, ConceptId anchor, TokenSeq query) {
  return {label, anchor, t.concept_of(anchor).tokens, std::move(query)};
}

}  // namespace taxogate
