#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "selfret/corpus.hpp"
#include "selfret/types.hpp"

namespace selfret {

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::size_t vocab_size() const = 0;
  virtual bool is_reversible() const = 0;
  virtual TokenSeq encode(std::string_view text) const = 0;
  virtual std::string decode(std::span<const TokenId> ids) const = 0;
};

// Reference word-level tokenizer: whitespace-delimited tokens, ids assigned
// by frequency (descending) with lexicographic tie-break, specials at 0-4.
class WordTokenizer final : public Tokenizer {
 public:
  std::size_t vocab_size() const override { return tokens_.size(); }
  bool is_reversible() const override { return true; }
  TokenSeq encode(std::string_view text) const override;
  std::string decode(std::span<const TokenId> ids) const override;

  const std::string& token_text(TokenId id) const;
  TokenId id_of(std::string_view token) const;  // kUnk if absent

  void save(const std::string& path) const;
  static WordTokenizer load(const std::string& path);

  friend WordTokenizer build_vocab(const CorpusStore& store,
                                   const std::vector<std::string>& extra_texts);

 private:
  std::vector<std::string> tokens_;  // id -> text
  std::unordered_map<std::string, TokenId> ids_;
};

WordTokenizer build_vocab(const CorpusStore& store,
                          const std::vector<std::string>& extra_texts = {});

}  // namespace selfret
