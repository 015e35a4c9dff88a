#pragma once

#include <string>
#include <vector>

#include "selfret/config.hpp"
#include "selfret/decode.hpp"
#include "selfret/lm.hpp"
#include "selfret/tokenizer.hpp"
#include "selfret/trie.hpp"

namespace selfret {

struct ScoredPassage {
  std::string passage_id;
  std::string doc_id;
  std::string title;
  std::string text;
  double title_logprob = 0.0;
  double rejection_prob = 0.0;
  double score_title = 0.0;       // softmaxed title component
  double score_assessment = 0.0;  // softmaxed self-assessment component
  double score = 0.0;             // product of the two
  int rank = 0;
};

struct RagAnswer {
  std::string text;
  std::string passage_id;
  bool truncated = false;
};

struct ExternalPassage {
  std::string passage_id;
  std::string title;
  std::string text;
};

// Numerically stable softmax over logits.
std::vector<double> softmax(const std::vector<double>& logits);

// Temperature-softmaxed title generation log-probs.
std::vector<double> title_scores(const std::vector<double>& title_logprobs,
                                 double tau);

// Joint probability of the rejection template given the assessment prompt
// (product of unconstrained per-step token probabilities).
double rejection_prob(const LanguageModel& lm, const Tokenizer& tok,
                      const std::string& query, const std::string& title,
                      const std::string& passage, const RankConfig& cfg,
                      const PromptTemplates& prompts);

// Temperature-softmaxed (1 - rejection_prob) values.
std::vector<double> assessment_scores(const std::vector<double>& rejection_probs,
                                      double delta);

// Elementwise product, not renormalized.
std::vector<double> final_scores(const std::vector<double>& s_title,
                                 const std::vector<double>& s_assessment);

std::vector<ScoredPassage> rerank(const std::vector<RetrievedCandidate>& cands,
                                  const LanguageModel& lm, const Tokenizer& tok,
                                  const CorpusStore& store,
                                  const std::string& query,
                                  const RankConfig& cfg,
                                  const PromptTemplates& prompts);

// Standalone reranker over externally retrieved passages. Titles present in
// the title trie are scored under the trie constraint, others unconstrained.
std::vector<ScoredPassage> rerank_external(
    const std::vector<ExternalPassage>& passages, const LanguageModel& lm,
    const Tokenizer& tok, const TrieIndex* index, const std::string& query,
    const RankConfig& cfg, const PromptTemplates& prompts);

// Unconstrained greedy continuation of the RAG prompt on the top passage.
RagAnswer generate_answer(const LanguageModel& lm, const Tokenizer& tok,
                          const std::string& query, const ScoredPassage& top,
                          const RankConfig& cfg, const PromptTemplates& prompts,
                          int max_answer_tokens);

void write_run_file(std::ostream& out, const std::string& query_id,
                    const std::vector<ScoredPassage>& ranked,
                    const std::string& run_tag);

}  // namespace selfret
