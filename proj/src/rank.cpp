#include "selfret/rank.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <set>
#include <stdexcept>

namespace selfret {

std::vector<double> softmax(const std::vector<double>& logits) {
  if (logits.empty()) throw std::invalid_argument("softmax of empty vector");
  double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

std::vector<double> title_scores(const std::vector<double>& title_logprobs,
                                 double tau) {
  if (tau <= 0.0) throw std::invalid_argument("tau must be > 0");
  std::vector<double> scaled(title_logprobs);
  for (double& v : scaled) v /= tau;
  return softmax(scaled);
}

std::vector<double> assessment_scores(const std::vector<double>& rejection_probs,
                                      double delta) {
  if (delta <= 0.0) throw std::invalid_argument("delta must be > 0");
  std::vector<double> scaled(rejection_probs.size());
  for (std::size_t i = 0; i < rejection_probs.size(); ++i)
    scaled[i] = (1.0 - rejection_probs[i]) / delta;
  return softmax(scaled);
}

std::vector<double> final_scores(const std::vector<double>& s_title,
                                 const std::vector<double>& s_assessment) {
  if (s_title.size() != s_assessment.size())
    throw std::invalid_argument("final_scores: length mismatch");
  std::vector<double> out(s_title.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = s_title[i] * s_assessment[i];
  return out;
}

double rejection_prob(const LanguageModel& lm, const Tokenizer& tok,
                      const std::string& query, const std::string& title,
                      const std::string& passage, const RankConfig& cfg,
                      const PromptTemplates& prompts) {
  if (cfg.rejection_template.empty())
    throw std::invalid_argument("rejection template must be non-empty");
  TokenSeq prompt =
      tok.encode(prompts.render_assessment(query, title, passage));
  prompt.insert(prompt.begin(), kBos);
  TokenSeq response = tok.encode(cfg.rejection_template);
  double lp = sequence_logprob(lm, prompt, response);
  return std::min(1.0, std::exp(lp));
}

namespace {

std::vector<ScoredPassage> finish(std::vector<ScoredPassage> items,
                                  const RankConfig& cfg) {
  std::vector<double> tl, rp;
  tl.reserve(items.size());
  rp.reserve(items.size());
  for (const auto& it : items) {
    tl.push_back(it.title_logprob);
    rp.push_back(it.rejection_prob);
  }
  std::vector<double> st = title_scores(tl, cfg.tau);
  std::vector<double> sp = assessment_scores(rp, cfg.delta);
  std::vector<double> s = final_scores(st, sp);
  for (std::size_t i = 0; i < items.size(); ++i) {
    items[i].score_title = st[i];
    items[i].score_assessment = sp[i];
    items[i].score = s[i];
  }
  std::sort(items.begin(), items.end(),
            [](const ScoredPassage& a, const ScoredPassage& b) {
              if (a.score != b.score) return a.score > b.score;
              if (a.title_logprob != b.title_logprob)
                return a.title_logprob > b.title_logprob;
              return a.passage_id < b.passage_id;
            });
  for (std::size_t i = 0; i < items.size(); ++i)
    items[i].rank = static_cast<int>(i + 1);
  return items;
}

}  // namespace

std::vector<ScoredPassage> rerank(const std::vector<RetrievedCandidate>& cands,
                                  const LanguageModel& lm, const Tokenizer& tok,
                                  const CorpusStore& store,
                                  const std::string& query,
                                  const RankConfig& cfg,
                                  const PromptTemplates& prompts) {
  if (cands.empty()) throw std::invalid_argument("rerank: no candidates");
  std::vector<ScoredPassage> items;
  items.reserve(cands.size());
  for (const auto& c : cands) {
    const Passage& psg = store.passage(c.passage_id);
    ScoredPassage sp;
    sp.passage_id = c.passage_id;
    sp.doc_id = c.doc_id;
    sp.title = psg.title;
    sp.text = psg.text;
    double lp = c.title.logprob;
    if (cfg.length_normalize_titles && !c.title.tokens.empty())
      lp /= static_cast<double>(c.title.tokens.size());
    sp.title_logprob = lp;
    sp.rejection_prob =
        rejection_prob(lm, tok, query, sp.title, sp.text, cfg, prompts);
    items.push_back(std::move(sp));
  }
  return finish(std::move(items), cfg);
}

std::vector<ScoredPassage> rerank_external(
    const std::vector<ExternalPassage>& passages, const LanguageModel& lm,
    const Tokenizer& tok, const TrieIndex* index, const std::string& query,
    const RankConfig& cfg, const PromptTemplates& prompts) {
  if (passages.empty())
    throw std::invalid_argument("rerank_external: no passages");
  std::set<std::string> ids;
  for (const auto& p : passages)
    if (!ids.insert(p.passage_id).second)
      throw std::invalid_argument("duplicate candidate: " + p.passage_id);

  TokenSeq prompt = tok.encode(prompts.render_retrieval(query));
  prompt.insert(prompt.begin(), kBos);

  std::vector<ScoredPassage> items;
  items.reserve(passages.size());
  for (const auto& p : passages) {
    ScoredPassage sp;
    sp.passage_id = p.passage_id;
    sp.title = p.title;
    sp.text = p.text;
    TokenSeq title_ids = tok.encode(p.title);
    double lp;
    if (index && index->title_trie.lookup(title_ids)) {
      sp.doc_id = *index->title_trie.lookup(title_ids);
      TokenSeq with_eos = title_ids;
      with_eos.push_back(kEos);
      lp = sequence_logprob(lm, prompt, with_eos, &index->title_trie, {});
    } else {
      lp = sequence_logprob(lm, prompt, title_ids);
    }
    if (cfg.length_normalize_titles && !title_ids.empty())
      lp /= static_cast<double>(title_ids.size());
    sp.title_logprob = lp;
    sp.rejection_prob =
        rejection_prob(lm, tok, query, p.title, p.text, cfg, prompts);
    items.push_back(std::move(sp));
  }
  return finish(std::move(items), cfg);
}

RagAnswer generate_answer(const LanguageModel& lm, const Tokenizer& tok,
                          const std::string& query, const ScoredPassage& top,
                          const RankConfig& cfg, const PromptTemplates& prompts,
                          int max_answer_tokens) {
  if (top.rank != 1)
    throw std::invalid_argument("generate_answer requires the rank-1 passage");
  TokenSeq ctx = tok.encode(
      prompts.render_rag(query, top.title, top.text, cfg.acceptance_template));
  ctx.insert(ctx.begin(), kBos);

  RagAnswer ans;
  ans.passage_id = top.passage_id;
  TokenSeq generated;
  for (int i = 0; i < max_answer_tokens; ++i) {
    std::vector<double> lp = lm.next_logprobs(ctx);
    TokenId best = static_cast<TokenId>(
        std::max_element(lp.begin(), lp.end()) - lp.begin());
    if (best == kEos) {
      ans.text = tok.decode(generated);
      return ans;
    }
    generated.push_back(best);
    ctx.push_back(best);
  }
  ans.text = tok.decode(generated);
  ans.truncated = true;
  return ans;
}

void write_run_file(std::ostream& out, const std::string& query_id,
                    const std::vector<ScoredPassage>& ranked,
                    const std::string& run_tag) {
  char buf[32];
  for (const auto& sp : ranked) {
    std::snprintf(buf, sizeof(buf), "%.6f", sp.score);
    out << query_id << " Q0 " << sp.passage_id << ' ' << sp.rank << ' ' << buf
        << ' ' << run_tag << '\n';
  }
}

}  // namespace selfret
