#include "selfret/eval.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace selfret {

std::string passage_to_doc_id(const std::string& passage_id) {
  auto hash = passage_id.rfind('#');
  return hash == std::string::npos ? passage_id : passage_id.substr(0, hash);
}

RunFile parse_run_file(std::istream& in) {
  RunFile run;
  std::string line;
  std::size_t line_no = 0;
  std::map<std::string, std::set<std::string>> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string qid, q0, item;
    int rank;
    double score;
    std::string tag;
    if (!(ss >> qid >> q0 >> item >> rank >> score >> tag))
      throw std::runtime_error("run file line " + std::to_string(line_no) +
                               ": malformed");
    auto& entry = run.entries[qid];
    if (rank != static_cast<int>(entry.size()) + 1)
      throw std::runtime_error("run file line " + std::to_string(line_no) +
                               ": ranks not dense from 1");
    if (!seen[qid].insert(item).second)
      throw std::runtime_error("run file line " + std::to_string(line_no) +
                               ": duplicate item for query " + qid);
    entry.emplace_back(item, score);
  }
  return run;
}

RunFile load_run_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read run file: " + path);
  return parse_run_file(in);
}

GoldMap golds_from_qrels(const std::vector<Qrel>& qrels, bool document_level) {
  GoldMap golds;
  for (const auto& q : qrels) {
    std::string id = document_level ? passage_to_doc_id(q.gold_passage_id)
                                    : q.gold_passage_id;
    auto& v = golds[q.query_id];
    if (std::find(v.begin(), v.end(), id) == v.end()) v.push_back(id);
  }
  return golds;
}

namespace {

// Rank of the first gold in the run entry, 0 when absent.
int first_gold_rank(const std::vector<std::pair<std::string, double>>& entry,
                    const std::vector<std::string>& golds) {
  for (std::size_t i = 0; i < entry.size(); ++i)
    if (std::find(golds.begin(), golds.end(), entry[i].first) != golds.end())
      return static_cast<int>(i + 1);
  return 0;
}

}  // namespace

double hits_at_k(const RunFile& run, const GoldMap& golds, int k) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (golds.empty()) return 0.0;
  double hits = 0.0;
  for (const auto& [qid, gold] : golds) {
    auto it = run.entries.find(qid);
    if (it == run.entries.end()) continue;  // missing query counts as miss
    int r = first_gold_rank(it->second, gold);
    if (r >= 1 && r <= k) hits += 1.0;
  }
  return hits / static_cast<double>(golds.size());
}

double mrr_at_k(const RunFile& run, const GoldMap& golds, int k) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (golds.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [qid, gold] : golds) {
    auto it = run.entries.find(qid);
    if (it == run.entries.end()) continue;
    int r = first_gold_rank(it->second, gold);
    if (r >= 1 && r <= k) sum += 1.0 / static_cast<double>(r);
  }
  return sum / static_cast<double>(golds.size());
}

double recall_at_k(const RunFile& run, const GoldMap& golds, int k) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (golds.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [qid, gold] : golds) {
    auto it = run.entries.find(qid);
    if (it == run.entries.end() || gold.empty()) continue;
    std::size_t found = 0;
    std::size_t top = std::min<std::size_t>(it->second.size(),
                                            static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < top; ++i)
      if (std::find(gold.begin(), gold.end(), it->second[i].first) !=
          gold.end())
        ++found;
    sum += static_cast<double>(found) / static_cast<double>(gold.size());
  }
  return sum / static_cast<double>(golds.size());
}

std::string normalize_answer(const std::string& text) {
  std::string lowered;
  lowered.reserve(text.size());
  for (char c : text) {
    unsigned char u = static_cast<unsigned char>(c);
    if (std::ispunct(u)) continue;
    lowered.push_back(static_cast<char>(std::tolower(u)));
  }
  std::istringstream ss(lowered);
  std::string word, out;
  while (ss >> word) {
    if (word == "a" || word == "an" || word == "the") continue;
    if (!out.empty()) out.push_back(' ');
    out += word;
  }
  return out;
}

double exact_match(const std::vector<std::string>& predictions,
                   const std::vector<std::vector<std::string>>& golds) {
  if (predictions.size() != golds.size())
    throw std::invalid_argument("exact_match: length mismatch");
  if (predictions.empty()) return 0.0;
  double hits = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    std::string pred = normalize_answer(predictions[i]);
    for (const auto& g : golds[i]) {
      if (normalize_answer(g) == pred) {
        hits += 1.0;
        break;
      }
    }
  }
  return hits / static_cast<double>(predictions.size());
}

MetricsReport evaluate_run(const RunFile& run, const std::vector<Qrel>& qrels,
                           EvalLevel level) {
  const bool doc_level = level == EvalLevel::kDocument;
  GoldMap golds = golds_from_qrels(qrels, doc_level);

  RunFile projected;
  if (doc_level) {
    // Project passage ids onto doc ids, keeping each doc's best rank.
    for (const auto& [qid, entry] : run.entries) {
      auto& out = projected.entries[qid];
      std::set<std::string> seen;
      for (const auto& [item, score] : entry) {
        std::string doc = passage_to_doc_id(item);
        if (seen.insert(doc).second) out.emplace_back(doc, score);
      }
    }
  }
  const RunFile& use = doc_level ? projected : run;

  MetricsReport rep;
  for (const auto& [qid, _] : golds)
    if (!use.entries.count(qid)) ++rep.missing_queries;

  rep.metrics["hits@1"] = hits_at_k(use, golds, 1);
  rep.metrics["hits@5"] = hits_at_k(use, golds, 5);
  rep.metrics["mrr@5"] = mrr_at_k(use, golds, 5);
  rep.metrics["mrr@10"] = mrr_at_k(use, golds, 10);
  rep.metrics["mrr@100"] = mrr_at_k(use, golds, 100);
  rep.metrics["recall@1"] = recall_at_k(use, golds, 1);
  rep.metrics["recall@5"] = recall_at_k(use, golds, 5);
  rep.metrics["recall@10"] = recall_at_k(use, golds, 10);

  for (const auto& [qid, gold] : golds) {
    auto it = use.entries.find(qid);
    std::map<std::string, double> row;
    int r = it == use.entries.end() ? 0 : first_gold_rank(it->second, gold);
    row["first_gold_rank"] = r;
    row["rr@100"] = (r >= 1 && r <= 100) ? 1.0 / r : 0.0;
    rep.per_query[qid] = std::move(row);
  }
  return rep;
}

MetricsReport evaluate_run(const std::string& run_path,
                           const std::string& qrels_path, EvalLevel level) {
  return evaluate_run(load_run_file(run_path), load_qrels(qrels_path), level);
}

std::string MetricsReport::to_table() const {
  std::ostringstream out;
  for (const auto& [name, value] : metrics) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%-10s %.4f\n", name.c_str(), value);
    out << buf;
  }
  if (missing_queries > 0)
    out << "warning: " << missing_queries << " queries missing from run\n";
  return out.str();
}

std::string MetricsReport::to_json() const {
  nlohmann::json j;
  j["metrics"] = metrics;
  j["missing_queries"] = missing_queries;
  j["per_query"] = per_query;
  return j.dump(2);
}

BenchReport benchmark(const TrieIndex& index, const LanguageModel& lm,
                      const Tokenizer& tok,
                      const std::vector<std::string>& queries,
                      const std::vector<int>& beam_sizes,
                      const PromptTemplates& prompts,
                      const DecodeConfig& base_cfg) {
  BenchReport rep;
  TrieStats stats = trie_stats(index);
  rep.trie_memory_bytes = stats.memory_bytes;
  rep.trie_nodes = stats.node_count;
  for (int beam : beam_sizes) {
    DecodeConfig cfg = base_cfg;
    cfg.title_beam = beam;
    BenchRow row;
    row.beam = beam;
    std::vector<double> latencies;
    for (const auto& q : queries) {
      auto t0 = std::chrono::steady_clock::now();
      auto cands = retrieve(lm, index, tok, q, prompts, cfg);
      auto t1 = std::chrono::steady_clock::now();
      latencies.push_back(
          std::chrono::duration<double, std::milli>(t1 - t0).count());
      row.candidates += cands.size();
    }
    if (!latencies.empty()) {
      double sum = 0.0;
      for (double v : latencies) sum += v;
      row.mean_latency_ms = sum / static_cast<double>(latencies.size());
      std::sort(latencies.begin(), latencies.end());
      row.median_latency_ms = latencies[latencies.size() / 2];
    }
    rep.rows.push_back(row);
  }
  return rep;
}

std::string BenchReport::to_table() const {
  std::ostringstream out;
  out << "beam  mean_ms  median_ms  candidates\n";
  for (const auto& r : rows) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%-5d %8.2f %10.2f %11zu\n", r.beam,
                  r.mean_latency_ms, r.median_latency_ms, r.candidates);
    out << buf;
  }
  out << "trie nodes: " << trie_nodes
      << ", memory: " << trie_memory_bytes / (1024.0 * 1024.0) << " MB\n";
  return out.str();
}

}  // namespace selfret
