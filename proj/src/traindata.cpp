#include "selfret/traindata.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

#include "json.hpp"

namespace selfret {

namespace {

constexpr const char* kSepText = "<sep>";

// Portable Fisher-Yates; avoids std::shuffle's library-defined draws so
// output files are identical across toolchains.
template <typename T>
void seeded_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i)
    std::swap(v[i - 1], v[rng() % i]);
}

template <typename T>
std::vector<T> sample_without_replacement(std::vector<T> pool, std::size_t m,
                                          std::mt19937_64& rng) {
  seeded_shuffle(pool, rng);
  if (pool.size() > m) pool.resize(m);
  return pool;
}

}  // namespace

const char* to_string(ExampleKind kind) {
  switch (kind) {
    case ExampleKind::kIndexing: return "indexing";
    case ExampleKind::kRetrieval: return "retrieval";
    case ExampleKind::kRerankingPos: return "reranking_pos";
    case ExampleKind::kRerankingNegSameDoc: return "reranking_neg_same_doc";
    case ExampleKind::kRerankingNegOtherDoc: return "reranking_neg_other_doc";
    case ExampleKind::kRag: return "rag";
  }
  return "unknown";
}

std::vector<TrainingExample> gen_indexing_examples(const CorpusStore& store) {
  std::vector<TrainingExample> out;
  for (const auto& p : store.passages) {
    for (const auto& s : split_sentences(p.text)) {
      TrainingExample ex;
      ex.kind = ExampleKind::kIndexing;
      ex.input = s.text;
      ex.target = p.text;
      ex.doc_id = p.doc_id;
      ex.passage_id = p.passage_id;
      out.push_back(std::move(ex));
    }
  }
  return out;
}

GenReport gen_retrieval_examples(const std::vector<Qrel>& qrels,
                                 const CorpusStore& store,
                                 const PromptTemplates& prompts) {
  GenReport rep;
  for (const auto& q : qrels) {
    if (!store.has_passage(q.gold_passage_id)) {
      ++rep.skipped;
      continue;
    }
    const Passage& psg = store.passage(q.gold_passage_id);
    TrainingExample ex;
    ex.kind = ExampleKind::kRetrieval;
    ex.input = prompts.render_retrieval(q.query_text);
    ex.target = psg.title + " " + kSepText + " " + psg.text;
    ex.doc_id = psg.doc_id;
    ex.passage_id = psg.passage_id;
    ex.query_id = q.query_id;
    rep.examples.push_back(std::move(ex));
  }
  return rep;
}

GenReport gen_reranking_examples(const std::vector<Qrel>& qrels,
                                 const CorpusStore& store,
                                 const MixtureConfig& cfg,
                                 const RankConfig& rank,
                                 const PromptTemplates& prompts) {
  if (cfg.neg_same_doc < 0 || cfg.neg_other_doc < 0)
    throw std::invalid_argument("negative counts must be >= 0");
  std::mt19937_64 rng(cfg.seed);
  GenReport rep;
  for (const auto& q : qrels) {
    if (!store.has_passage(q.gold_passage_id)) {
      ++rep.skipped;
      continue;
    }
    const Passage& gold = store.passage(q.gold_passage_id);
    auto make = [&](const Passage& psg, ExampleKind kind,
                    const std::string& target) {
      TrainingExample ex;
      ex.kind = kind;
      ex.input = prompts.render_assessment(q.query_text, psg.title, psg.text);
      ex.target = target;
      ex.doc_id = psg.doc_id;
      ex.passage_id = psg.passage_id;
      ex.query_id = q.query_id;
      rep.examples.push_back(std::move(ex));
    };
    make(gold, ExampleKind::kRerankingPos, rank.acceptance_template);

    std::vector<const Passage*> siblings, others;
    for (const auto& p : store.passages) {
      if (p.passage_id == gold.passage_id) continue;
      (p.doc_id == gold.doc_id ? siblings : others).push_back(&p);
    }
    for (const Passage* p : sample_without_replacement(
             siblings, static_cast<std::size_t>(cfg.neg_same_doc), rng))
      make(*p, ExampleKind::kRerankingNegSameDoc, rank.rejection_template);
    for (const Passage* p : sample_without_replacement(
             others, static_cast<std::size_t>(cfg.neg_other_doc), rng))
      make(*p, ExampleKind::kRerankingNegOtherDoc, rank.rejection_template);
  }
  return rep;
}

GenReport gen_rag_examples(const std::vector<Qrel>& qrels,
                           const CorpusStore& store, const RankConfig& rank,
                           const PromptTemplates& prompts) {
  GenReport rep;
  for (const auto& q : qrels) {
    if (q.answer.empty() || !store.has_passage(q.gold_passage_id)) {
      ++rep.skipped;
      continue;
    }
    const Passage& gold = store.passage(q.gold_passage_id);
    TrainingExample ex;
    ex.kind = ExampleKind::kRag;
    ex.input = prompts.render_assessment(q.query_text, gold.title, gold.text);
    ex.target =
        rank.acceptance_template + " " + kSepText + " " + q.answer;
    ex.doc_id = gold.doc_id;
    ex.passage_id = gold.passage_id;
    ex.query_id = q.query_id;
    rep.examples.push_back(std::move(ex));
  }
  return rep;
}

std::vector<TrainingExample> build_stage2_mixture(
    const std::vector<TrainingExample>& indexing,
    const std::vector<TrainingExample>& retrieval,
    const std::vector<TrainingExample>& reranking,
    const std::vector<TrainingExample>& rag, const MixtureConfig& cfg) {
  if (cfg.retention < 0.0 || cfg.retention > 1.0)
    throw std::invalid_argument("retention must be in [0,1]");
  std::mt19937_64 rng(cfg.seed);
  std::vector<TrainingExample> kept = sample_without_replacement(
      indexing,
      static_cast<std::size_t>(cfg.retention *
                               static_cast<double>(indexing.size())),
      rng);
  std::vector<TrainingExample> out = std::move(kept);
  out.insert(out.end(), retrieval.begin(), retrieval.end());
  out.insert(out.end(), reranking.begin(), reranking.end());
  out.insert(out.end(), rag.begin(), rag.end());
  seeded_shuffle(out, rng);
  return out;
}

void write_examples_jsonl(std::ostream& out,
                          const std::vector<TrainingExample>& examples) {
  for (const auto& ex : examples) {
    nlohmann::json meta = {{"doc_id", ex.doc_id},
                           {"passage_id", ex.passage_id}};
    if (!ex.query_id.empty()) meta["query_id"] = ex.query_id;
    nlohmann::json j = {{"kind", to_string(ex.kind)},
                        {"input", ex.input},
                        {"target", ex.target},
                        {"meta", meta}};
    out << j.dump() << '\n';
  }
}

}  // namespace selfret
