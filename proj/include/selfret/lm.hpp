#pragma once

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "selfret/tokenizer.hpp"
#include "selfret/trie.hpp"
#include "selfret/types.hpp"

namespace selfret {

// Next-token distribution provider. Implementations must return finite
// log-probs whose probability-space sum is 1 within 1e-9.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;
  virtual std::size_t vocab_size() const = 0;
  virtual std::vector<double> next_logprobs(
      std::span<const TokenId> context) const = 0;
};

// Deterministic add-k smoothed n-gram model over the reference tokenizer's
// vocabulary. Stands in for the fine-tuned backbone so the whole pipeline
// runs without trained weights.
class NGramLM final : public LanguageModel {
 public:
  NGramLM(std::size_t vocab_size, int order, double k);

  std::size_t vocab_size() const override { return vocab_size_; }
  int order() const { return order_; }
  double smoothing() const { return k_; }

  std::vector<double> next_logprobs(
      std::span<const TokenId> context) const override;

  void observe(std::span<const TokenId> tokens);  // one training sequence

  void save(const std::string& path) const;
  static NGramLM load(const std::string& path);

 private:
  struct SeqHash {
    std::size_t operator()(const TokenSeq& v) const {
      std::size_t h = 1469598103934665603ull;
      for (TokenId t : v) {
        h ^= t;
        h *= 1099511628211ull;
      }
      return h;
    }
  };

  TokenSeq context_key(std::span<const TokenId> context) const;

  std::size_t vocab_size_;
  int order_;
  double k_;
  std::unordered_map<TokenSeq, std::unordered_map<TokenId, std::uint64_t>,
                     SeqHash>
      counts_;
  std::unordered_map<TokenSeq, std::uint64_t, SeqHash> totals_;
};

// Trains on encode(text) with BOS padding and EOS termination per text.
NGramLM train_ngram(const std::vector<std::string>& texts, const Tokenizer& tok,
                    int n = 2, double k = 0.1);

// Sum of per-step log-probs of `continuation` given `context`. When a trie
// constraint is supplied, each step's distribution is masked to the allowed
// continuations of anchor+generated-so-far and renormalized; singleton steps
// then contribute exactly 0.
double sequence_logprob(const LanguageModel& lm,
                        std::span<const TokenId> context,
                        std::span<const TokenId> continuation,
                        const TokenTrie* constraint = nullptr,
                        std::span<const TokenId> anchor = {});

}  // namespace selfret
