#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "selfret/config.hpp"
#include "selfret/corpus.hpp"
#include "selfret/qrels.hpp"

namespace selfret {

enum class ExampleKind {
  kIndexing,
  kRetrieval,
  kRerankingPos,
  kRerankingNegSameDoc,
  kRerankingNegOtherDoc,
  kRag,
};

const char* to_string(ExampleKind kind);

struct TrainingExample {
  ExampleKind kind;
  std::string input;
  std::string target;
  std::string doc_id;
  std::string passage_id;
  std::string query_id;  // empty for self-supervised examples
};

struct MixtureConfig {
  int neg_same_doc = 1;    // m1
  int neg_other_doc = 3;   // m2
  double retention = 0.5;  // rho, stage-2 share of indexing examples
  std::uint64_t seed = 42;
};

struct GenReport {
  std::vector<TrainingExample> examples;
  int skipped = 0;
};

// Sentence-to-passage self-supervision: one example per (sentence, passage).
std::vector<TrainingExample> gen_indexing_examples(const CorpusStore& store);

// query -> title SEP passage.
GenReport gen_retrieval_examples(const std::vector<Qrel>& qrels,
                                 const CorpusStore& store,
                                 const PromptTemplates& prompts);

// Per qrel: one acceptance positive, m1 same-doc and m2 other-doc rejection
// negatives, sampled uniformly without replacement under the seed.
GenReport gen_reranking_examples(const std::vector<Qrel>& qrels,
                                 const CorpusStore& store,
                                 const MixtureConfig& cfg,
                                 const RankConfig& rank,
                                 const PromptTemplates& prompts);

// Positive reranking example with SEP + gold answer appended to the target.
GenReport gen_rag_examples(const std::vector<Qrel>& qrels,
                           const CorpusStore& store, const RankConfig& rank,
                           const PromptTemplates& prompts);

// floor(rho * |indexing|) seeded-sampled indexing examples plus everything
// else, shuffled with the seed.
std::vector<TrainingExample> build_stage2_mixture(
    const std::vector<TrainingExample>& indexing,
    const std::vector<TrainingExample>& retrieval,
    const std::vector<TrainingExample>& reranking,
    const std::vector<TrainingExample>& rag, const MixtureConfig& cfg);

void write_examples_jsonl(std::ostream& out,
                          const std::vector<TrainingExample>& examples);

}  // namespace selfret
