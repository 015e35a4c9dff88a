#include "selfret/decode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace selfret {

namespace {

struct Hypothesis {
  TokenSeq tokens;
  TokenTrie::NodeRef node = TokenTrie::kRoot;
  double logprob = 0.0;
  bool complete = false;
  bool early = false;
  std::string leaf_id;
};

bool better(const Hypothesis& a, const Hypothesis& b) {
  if (a.logprob != b.logprob) return a.logprob > b.logprob;
  return a.tokens < b.tokens;
}

// Completes a hypothesis through its unique remaining path; forced singleton
// steps add zero log-prob under renormalization.
bool try_force_complete(const TokenTrie& trie, Hypothesis& h) {
  auto uc = trie.unique_completion_from(h.node);
  if (!uc) return false;
  auto& [remaining, leaf] = *uc;
  h.early = !h.complete;
  h.tokens.insert(h.tokens.end(), remaining.begin(), remaining.end());
  h.leaf_id = leaf;
  h.complete = true;
  return true;
}

}  // namespace

std::vector<Candidate> constrained_beam_search(const LanguageModel& lm,
                                               const TokenTrie& trie,
                                               std::span<const TokenId> prompt,
                                               int beam, int max_len,
                                               bool early_termination) {
  if (beam < 1) throw std::invalid_argument("beam must be >= 1");
  if (trie.empty()) throw std::runtime_error("beam search over empty trie");

  std::vector<Hypothesis> hyps(1);
  TokenSeq context(prompt.begin(), prompt.end());

  for (int step = 0; step <= max_len; ++step) {
    bool all_complete = true;
    for (const auto& h : hyps) all_complete = all_complete && h.complete;
    if (all_complete) break;

    std::vector<Hypothesis> expansions;
    for (auto& h : hyps) {
      if (h.complete) {
        expansions.push_back(std::move(h));  // frozen, counts against beam
        continue;
      }
      if (early_termination && trie.subtree_leaves(h.node) == 1) {
        try_force_complete(trie, h);
        expansions.push_back(std::move(h));
        continue;
      }
      const bool budget_spent =
          h.tokens.size() >= static_cast<std::size_t>(max_len);
      if (budget_spent && !trie.child(h.node, kEos)) {
        // Out of tokens: only a forced completion can save it.
        if (try_force_complete(trie, h)) expansions.push_back(std::move(h));
        continue;
      }
      auto allowed = trie.children_tokens(h.node);
      context.resize(prompt.size());
      context.insert(context.end(), h.tokens.begin(), h.tokens.end());
      double lse;
      std::vector<double> lp;
      if (allowed.size() == 1) {
        lse = 0.0;  // singleton renormalizes to probability 1
      } else {
        lp = lm.next_logprobs(context);
        double mx = -std::numeric_limits<double>::infinity();
        for (TokenId a : allowed) mx = std::max(mx, lp[a]);
        double acc = 0.0;
        for (TokenId a : allowed) acc += std::exp(lp[a] - mx);
        lse = mx + std::log(acc);
      }
      for (TokenId tok : allowed) {
        if (budget_spent && tok != kEos) continue;  // renorm stays full-set
        Hypothesis next = h;
        next.logprob += allowed.size() == 1 ? 0.0 : lp[tok] - lse;
        next.node = *trie.child(h.node, tok);
        if (tok == kEos) {
          next.complete = true;
          next.leaf_id = *trie.leaf_at(next.node);
        } else {
          next.tokens.push_back(tok);
        }
        expansions.push_back(std::move(next));
      }
    }
    std::sort(expansions.begin(), expansions.end(), better);
    if (expansions.size() > static_cast<std::size_t>(beam))
      expansions.resize(static_cast<std::size_t>(beam));
    hyps = std::move(expansions);
  }

  // Hypotheses cut off by max_len finish through their unique completion
  // when one exists; otherwise they are dropped.
  std::vector<Candidate> out;
  for (auto& h : hyps) {
    if (!h.complete && !try_force_complete(trie, h)) continue;
    out.push_back({std::move(h.tokens), h.logprob, std::move(h.leaf_id),
                   h.early});
  }
  if (out.empty())
    throw std::runtime_error("no complete candidate within max_len");
  std::sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
    if (a.logprob != b.logprob) return a.logprob > b.logprob;
    return a.tokens < b.tokens;
  });
  return out;
}

std::vector<Candidate> generate_titles(const LanguageModel& lm,
                                       const TrieIndex& index,
                                       const Tokenizer& tok,
                                       const std::string& query,
                                       const PromptTemplates& prompts,
                                       const DecodeConfig& cfg) {
  TokenSeq prompt = tok.encode(prompts.render_retrieval(query));
  prompt.insert(prompt.begin(), kBos);
  return constrained_beam_search(lm, index.title_trie, prompt, cfg.title_beam,
                                 cfg.max_title_tokens, cfg.early_termination);
}

std::vector<Candidate> generate_passages(const LanguageModel& lm,
                                         const TrieIndex& index,
                                         const Tokenizer& tok,
                                         const std::string& query,
                                         const Candidate& title,
                                         const PromptTemplates& prompts,
                                         const DecodeConfig& cfg) {
  const TokenTrie& trie = index.passages_of(title.leaf_id);
  std::string title_text = tok.decode(title.tokens);
  TokenSeq prompt = tok.encode(prompts.render_passage(query, title_text));
  prompt.insert(prompt.begin(), kBos);
  return constrained_beam_search(lm, trie, prompt, cfg.passage_beam,
                                 cfg.max_passage_tokens,
                                 cfg.early_termination);
}

std::vector<RetrievedCandidate> retrieve(const LanguageModel& lm,
                                         const TrieIndex& index,
                                         const Tokenizer& tok,
                                         const std::string& query,
                                         const PromptTemplates& prompts,
                                         const DecodeConfig& cfg) {
  std::vector<RetrievedCandidate> out;
  std::vector<std::string> seen;
  for (const auto& title : generate_titles(lm, index, tok, query, prompts, cfg)) {
    for (auto& psg :
         generate_passages(lm, index, tok, query, title, prompts, cfg)) {
      if (std::find(seen.begin(), seen.end(), psg.leaf_id) != seen.end())
        continue;
      seen.push_back(psg.leaf_id);
      RetrievedCandidate rc;
      rc.title = title;
      rc.doc_id = title.leaf_id;
      rc.passage_id = psg.leaf_id;
      rc.passage = std::move(psg);
      out.push_back(std::move(rc));
    }
  }
  return out;
}

}  // namespace selfret
