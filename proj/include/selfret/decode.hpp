#pragma once

#include <span>
#include <string>
#include <vector>

#include "selfret/config.hpp"
#include "selfret/corpus.hpp"
#include "selfret/lm.hpp"
#include "selfret/tokenizer.hpp"
#include "selfret/trie.hpp"
#include "selfret/types.hpp"

namespace selfret {

struct Candidate {
  TokenSeq tokens;  // a complete stored sequence, EOS excluded
  double logprob = 0.0;
  std::string leaf_id;
  bool terminated_early = false;
};

struct RetrievedCandidate {
  Candidate title;
  Candidate passage;
  std::string doc_id;
  std::string passage_id;
};

// Beam search where each step's distribution is masked to the trie's allowed
// continuations and renormalized. Results sorted by logprob descending, ties
// broken by token-sequence lexicographic order. With early_termination the
// forced tail of a unique completion is appended without LM calls; the
// renormalized singleton steps contribute zero, so scores are unchanged.
std::vector<Candidate> constrained_beam_search(
    const LanguageModel& lm, const TokenTrie& trie,
    std::span<const TokenId> prompt, int beam, int max_len,
    bool early_termination = true);

std::vector<Candidate> generate_titles(const LanguageModel& lm,
                                       const TrieIndex& index,
                                       const Tokenizer& tok,
                                       const std::string& query,
                                       const PromptTemplates& prompts,
                                       const DecodeConfig& cfg);

std::vector<Candidate> generate_passages(const LanguageModel& lm,
                                         const TrieIndex& index,
                                         const Tokenizer& tok,
                                         const std::string& query,
                                         const Candidate& title,
                                         const PromptTemplates& prompts,
                                         const DecodeConfig& cfg);

// Two-stage pipeline: title_beam titles, then passage_beam passages per
// title; up to i*j candidates, deduplicated by passage_id (first wins).
std::vector<RetrievedCandidate> retrieve(const LanguageModel& lm,
                                         const TrieIndex& index,
                                         const Tokenizer& tok,
                                         const std::string& query,
                                         const PromptTemplates& prompts,
                                         const DecodeConfig& cfg);

}  // namespace selfret
