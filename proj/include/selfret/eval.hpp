#pragma once

#include <istream>
#include <map>
#include <string>
#include <vector>

#include "selfret/config.hpp"
#include "selfret/decode.hpp"
#include "selfret/lm.hpp"
#include "selfret/qrels.hpp"
#include "selfret/trie.hpp"

namespace selfret {

// query_id -> ranked (item_id, score), rank order as listed.
struct RunFile {
  std::map<std::string, std::vector<std::pair<std::string, double>>> entries;
};

RunFile parse_run_file(std::istream& in);
RunFile load_run_file(const std::string& path);

// query_id -> gold item ids (possibly several).
using GoldMap = std::map<std::string, std::vector<std::string>>;

GoldMap golds_from_qrels(const std::vector<Qrel>& qrels,
                         bool document_level = false);

double hits_at_k(const RunFile& run, const GoldMap& golds, int k);
double mrr_at_k(const RunFile& run, const GoldMap& golds, int k);
// Fraction of a query's golds found in the top k, averaged over queries.
double recall_at_k(const RunFile& run, const GoldMap& golds, int k);

// Open-domain QA normalization: lowercase, strip punctuation, drop articles
// {a, an, the}, collapse whitespace.
std::string normalize_answer(const std::string& text);
double exact_match(const std::vector<std::string>& predictions,
                   const std::vector<std::vector<std::string>>& golds);

enum class EvalLevel { kPassage, kDocument };

struct MetricsReport {
  std::map<std::string, double> metrics;  // metric name -> mean value
  std::map<std::string, std::map<std::string, double>> per_query;
  int missing_queries = 0;

  std::string to_table() const;
  std::string to_json() const;
};

// Passage ids project to doc ids via the "doc#ordinal" convention at the
// document level.
MetricsReport evaluate_run(const RunFile& run, const std::vector<Qrel>& qrels,
                           EvalLevel level);
MetricsReport evaluate_run(const std::string& run_path,
                           const std::string& qrels_path, EvalLevel level);

struct BenchRow {
  int beam = 0;
  double mean_latency_ms = 0.0;
  double median_latency_ms = 0.0;
  std::size_t candidates = 0;
};

struct BenchReport {
  std::vector<BenchRow> rows;
  std::size_t trie_memory_bytes = 0;
  std::size_t trie_nodes = 0;

  std::string to_table() const;
};

BenchReport benchmark(const TrieIndex& index, const LanguageModel& lm,
                      const Tokenizer& tok,
                      const std::vector<std::string>& queries,
                      const std::vector<int>& beam_sizes,
                      const PromptTemplates& prompts,
                      const DecodeConfig& base_cfg);

std::string passage_to_doc_id(const std::string& passage_id);

}  // namespace selfret
