#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "selfret/config.hpp"
#include "selfret/corpus.hpp"
#include "selfret/decode.hpp"
#include "selfret/eval.hpp"
#include "selfret/external_lm.hpp"
#include "selfret/lm.hpp"
#include "selfret/qrels.hpp"
#include "selfret/rank.hpp"
#include "selfret/service.hpp"
#include "selfret/tokenizer.hpp"
#include "selfret/traindata.hpp"
#include "selfret/trie.hpp"

namespace {

using namespace selfret;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitRuntime = 3;

EngineConfig load_engine_config(const std::string& config_path) {
  if (!config_path.empty()) return EngineConfig::from_file(config_path);
  if (const char* env = std::getenv("SELFRET_CONFIG"))
    if (*env) return EngineConfig::from_file(env);
  return EngineConfig{};
}

std::unique_ptr<LanguageModel> open_lm(const std::string& descriptor,
                                       std::size_t vocab_size) {
  if (descriptor.rfind("cmd:", 0) == 0 || descriptor.rfind("http://", 0) == 0 ||
      descriptor.rfind("https://", 0) == 0)
    return open_external_lm(descriptor, vocab_size);
  auto lm = std::make_unique<NGramLM>(NGramLM::load(descriptor));
  if (lm->vocab_size() != vocab_size)
    throw std::runtime_error("lm/vocab size mismatch: lm has " +
                             std::to_string(lm->vocab_size()) + ", vocab has " +
                             std::to_string(vocab_size));
  return lm;
}

std::vector<std::string> corpus_training_texts(const CorpusStore& store) {
  std::vector<std::string> texts;
  texts.reserve(store.documents.size() + store.passages.size());
  for (const auto& d : store.documents) texts.push_back(d.title);
  for (const auto& p : store.passages) texts.push_back(p.text);
  return texts;
}

struct QueryEntry {
  std::string id;
  std::string text;
};

std::vector<QueryEntry> load_queries(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read queries file: " + path);
  std::vector<QueryEntry> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      out.push_back({"q" + std::to_string(n), line});
    else
      out.push_back({line.substr(0, tab),
                     line.substr(tab + 1, line.find('\t', tab + 1) - tab - 1)});
  }
  return out;
}

int cmd_ingest(const std::string& corpus_path, const std::string& out_path,
               int max_words) {
  std::ifstream in(corpus_path);
  if (!in) throw std::runtime_error("cannot read corpus file: " + corpus_path);
  CorpusStore store = ingest_corpus(in, max_words);
  save_store(store, out_path);
  StatsReport stats = corpus_stats(store);
  std::cerr << "ingested " << stats.num_documents << " documents, "
            << stats.num_passages << " passages";
  if (stats.rejected_records)
    std::cerr << " (" << stats.rejected_records << " records rejected)";
  if (stats.title_collisions)
    std::cerr << " (" << stats.title_collisions << " titles disambiguated)";
  std::cerr << "\n";
  return kExitOk;
}

int cmd_build_index(const std::string& store_path, const std::string& out_path,
                    const std::string& vocab_path,
                    const std::string& qrels_path,
                    const EngineConfig& engine) {
  CorpusStore store = load_store(store_path);
  std::vector<std::string> extra = engine.prompts.literals(engine.rank);
  if (!qrels_path.empty())
    for (const auto& q : load_qrels(qrels_path)) {
      extra.push_back(q.query_text);
      if (!q.answer.empty()) extra.push_back(q.answer);
    }
  WordTokenizer tok = build_vocab(store, extra);
  tok.save(vocab_path);
  TrieIndex index = build_index(store, tok);
  index.save(out_path);
  TrieStats stats = trie_stats(index);
  std::cerr << "index: " << index.title_trie.leaf_count() << " titles, "
            << stats.leaf_count << " leaves, " << stats.node_count
            << " nodes, " << stats.memory_bytes / (1024.0 * 1024.0)
            << " MB resident\n";
  return kExitOk;
}

int cmd_train_lm(const std::string& store_path, const std::string& vocab_path,
                 const std::string& qrels_path, const std::string& out_path,
                 int n, double k, const EngineConfig& engine) {
  CorpusStore store = load_store(store_path);
  WordTokenizer tok = WordTokenizer::load(vocab_path);
  std::vector<std::string> texts = corpus_training_texts(store);
  if (!qrels_path.empty()) {
    for (const auto& q : load_qrels(qrels_path)) {
      if (!store.has_passage(q.gold_passage_id)) continue;
      const Passage& gold = store.passage(q.gold_passage_id);
      texts.push_back(engine.prompts.render_retrieval(q.query_text) + " " +
                      gold.title);
      texts.push_back(engine.prompts.render_passage(q.query_text, gold.title) +
                      " " + gold.text);
    }
  }
  NGramLM lm = train_ngram(texts, tok, n, k);
  lm.save(out_path);
  std::cerr << "trained " << n << "-gram lm (k=" << k << ") on "
            << texts.size() << " texts\n";
  return kExitOk;
}

int cmd_retrieve(const std::string& store_path, const std::string& index_path,
                 const std::string& vocab_path, const std::string& lm_path,
                 const std::string& query, const std::string& queries_path,
                 const std::string& out_path, const std::string& run_tag,
                 int threads, EngineConfig engine) {
  CorpusStore store = load_store(store_path);
  WordTokenizer tok = WordTokenizer::load(vocab_path);
  TrieIndex index = TrieIndex::load(index_path);
  auto lm = open_lm(lm_path, tok.vocab_size());

  std::vector<QueryEntry> queries;
  if (!queries_path.empty())
    queries = load_queries(queries_path);
  else if (!query.empty())
    queries.push_back({"q1", query});
  else
    throw std::runtime_error("retrieve needs --query or --queries");

  std::vector<std::string> blocks(queries.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= queries.size()) break;
      auto cands =
          retrieve(*lm, index, tok, queries[i].text, engine.prompts,
                   engine.decode);
      auto ranked = rerank(cands, *lm, tok, store, queries[i].text,
                           engine.rank, engine.prompts);
      std::ostringstream block;
      write_run_file(block, queries[i].id, ranked, run_tag);
      blocks[i] = block.str();
    }
  };
  int n_threads = std::max(1, threads);
  std::vector<std::thread> pool;
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) throw std::runtime_error("cannot write run file: " + out_path);
    out = &file;
  }
  for (const auto& b : blocks) *out << b;
  return kExitOk;
}

int cmd_gen_train_data(const std::string& store_path,
                       const std::string& qrels_path,
                       const std::string& out_path, const std::string& kind,
                       MixtureConfig mix, const EngineConfig& engine) {
  CorpusStore store = load_store(store_path);
  std::vector<Qrel> qrels =
      qrels_path.empty() ? std::vector<Qrel>{} : load_qrels(qrels_path);

  std::vector<TrainingExample> result;
  int skipped = 0;
  if (kind == "indexing") {
    result = gen_indexing_examples(store);
  } else if (kind == "retrieval") {
    auto rep = gen_retrieval_examples(qrels, store, engine.prompts);
    result = std::move(rep.examples);
    skipped = rep.skipped;
  } else if (kind == "reranking") {
    auto rep = gen_reranking_examples(qrels, store, mix, engine.rank,
                                      engine.prompts);
    result = std::move(rep.examples);
    skipped = rep.skipped;
  } else if (kind == "rag") {
    auto rep = gen_rag_examples(qrels, store, engine.rank, engine.prompts);
    result = std::move(rep.examples);
    skipped = rep.skipped;
  } else if (kind == "stage2") {
    auto indexing = gen_indexing_examples(store);
    auto retrieval = gen_retrieval_examples(qrels, store, engine.prompts);
    auto reranking = gen_reranking_examples(qrels, store, mix, engine.rank,
                                            engine.prompts);
    auto rag = gen_rag_examples(qrels, store, engine.rank, engine.prompts);
    skipped = retrieval.skipped + reranking.skipped + rag.skipped;
    result = build_stage2_mixture(indexing, retrieval.examples,
                                  reranking.examples, rag.examples, mix);
  } else {
    throw std::runtime_error("unknown --kind: " + kind);
  }

  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) throw std::runtime_error("cannot write output: " + out_path);
    out = &file;
  }
  write_examples_jsonl(*out, result);
  std::cerr << "wrote " << result.size() << " examples";
  if (skipped) std::cerr << " (" << skipped << " qrels skipped)";
  std::cerr << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& run_path, const std::string& qrels_path,
             const std::string& level, bool as_json) {
  EvalLevel lvl =
      level == "document" ? EvalLevel::kDocument : EvalLevel::kPassage;
  MetricsReport rep = evaluate_run(run_path, qrels_path, lvl);
  std::cout << (as_json ? rep.to_json() + "\n" : rep.to_table());
  return kExitOk;
}

int cmd_bench(const std::string& store_path, const std::string& index_path,
              const std::string& vocab_path, const std::string& lm_path,
              const std::string& queries_path, const std::string& beams,
              const EngineConfig& engine) {
  WordTokenizer tok = WordTokenizer::load(vocab_path);
  TrieIndex index = TrieIndex::load(index_path);
  auto lm = open_lm(lm_path, tok.vocab_size());
  std::vector<std::string> queries;
  for (const auto& q : load_queries(queries_path)) queries.push_back(q.text);
  std::vector<int> beam_sizes;
  std::istringstream ss(beams);
  std::string piece;
  while (std::getline(ss, piece, ',')) beam_sizes.push_back(std::stoi(piece));
  BenchReport rep = benchmark(index, *lm, tok, queries, beam_sizes,
                              engine.prompts, engine.decode);
  std::cout << rep.to_table();
  (void)store_path;
  return kExitOk;
}

int cmd_serve(const std::string& store_path, const std::string& index_path,
              const std::string& vocab_path, const std::string& lm_path,
              const std::string& host, int port, int max_concurrent,
              EngineConfig engine) {
  CorpusStore store = load_store(store_path);
  WordTokenizer tok = WordTokenizer::load(vocab_path);
  TrieIndex index = TrieIndex::load(index_path);
  std::shared_ptr<const LanguageModel> lm =
      open_lm(lm_path, tok.vocab_size());
  ServiceConfig svc;
  svc.host = host;
  svc.port = port;
  svc.max_concurrent_requests = max_concurrent;
  RetrievalService service(svc, std::move(engine), std::move(store),
                           std::move(index), std::move(tok), lm);
  std::cerr << "listening on " << host << ":" << port << "\n";
  if (!service.run())
    throw std::runtime_error("cannot bind " + host + ":" +
                             std::to_string(port));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"self-retrieval engine"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "engine config JSON")
      ->envname("SELFRET_CONFIG");

  // ingest
  auto* ingest_cmd = app.add_subcommand("ingest", "corpus JSONL -> store file");
  std::string corpus_path, store_out;
  int max_words = 200;
  ingest_cmd->add_option("--corpus", corpus_path)->required();
  ingest_cmd->add_option("--out", store_out)->required();
  ingest_cmd->add_option("--max-words", max_words);

  // build-index
  auto* index_cmd = app.add_subcommand("build-index", "store -> trie index");
  std::string store_path, index_out, vocab_out, qrels_path;
  index_cmd->add_option("--store", store_path)->required();
  index_cmd->add_option("--out", index_out)->required();
  index_cmd->add_option("--vocab", vocab_out)->required();
  index_cmd->add_option("--qrels", qrels_path);

  // train-lm
  auto* train_cmd = app.add_subcommand("train-lm", "store -> n-gram lm");
  std::string tl_store, tl_vocab, tl_qrels, tl_out;
  int ngram_n = 2;
  double ngram_k = 0.1;
  train_cmd->add_option("--store", tl_store)->required();
  train_cmd->add_option("--vocab", tl_vocab)->required();
  train_cmd->add_option("--qrels", tl_qrels);
  train_cmd->add_option("--out", tl_out)->required();
  train_cmd->add_option("--n", ngram_n);
  train_cmd->add_option("--k", ngram_k);

  // retrieve
  auto* retrieve_cmd = app.add_subcommand("retrieve", "query -> run file");
  std::string r_store, r_index, r_vocab, r_lm, r_query, r_queries, r_out;
  std::string run_tag = "selfret";
  int titles = -1, passages = -1, threads = 1;
  double tau = -1.0, delta = -1.0;
  std::uint64_t seed = 42;
  retrieve_cmd->add_option("--store", r_store)->required();
  retrieve_cmd->add_option("--index", r_index)->required();
  retrieve_cmd->add_option("--vocab", r_vocab)->required();
  retrieve_cmd->add_option("--lm", r_lm)->required();
  retrieve_cmd->add_option("--query", r_query);
  retrieve_cmd->add_option("--queries", r_queries);
  retrieve_cmd->add_option("--out", r_out);
  retrieve_cmd->add_option("--run-tag", run_tag);
  retrieve_cmd->add_option("--titles", titles);
  retrieve_cmd->add_option("--passages", passages);
  retrieve_cmd->add_option("--tau", tau);
  retrieve_cmd->add_option("--delta", delta);
  retrieve_cmd->add_option("--threads", threads);
  retrieve_cmd->add_option("--seed", seed);

  // gen-train-data
  auto* gen_cmd = app.add_subcommand("gen-train-data", "store+qrels -> JSONL");
  std::string g_store, g_qrels, g_out, g_kind = "stage2";
  MixtureConfig mix;
  gen_cmd->add_option("--store", g_store)->required();
  gen_cmd->add_option("--qrels", g_qrels);
  gen_cmd->add_option("--out", g_out);
  gen_cmd->add_option("--kind", g_kind)
      ->check(CLI::IsMember({"indexing", "retrieval", "reranking", "rag",
                             "stage2"}));
  gen_cmd->add_option("--m1", mix.neg_same_doc);
  gen_cmd->add_option("--m2", mix.neg_other_doc);
  gen_cmd->add_option("--rho", mix.retention);
  gen_cmd->add_option("--seed", mix.seed);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "run+qrels -> metrics");
  std::string e_run, e_qrels, e_level = "passage";
  bool e_json = false;
  eval_cmd->add_option("--run", e_run)->required();
  eval_cmd->add_option("--qrels", e_qrels)->required();
  eval_cmd->add_option("--level", e_level)
      ->check(CLI::IsMember({"passage", "document"}));
  eval_cmd->add_flag("--json", e_json);

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "latency/memory vs beam size");
  std::string b_store, b_index, b_vocab, b_lm, b_queries, b_beams = "5,10";
  bench_cmd->add_option("--store", b_store);
  bench_cmd->add_option("--index", b_index)->required();
  bench_cmd->add_option("--vocab", b_vocab)->required();
  bench_cmd->add_option("--lm", b_lm)->required();
  bench_cmd->add_option("--queries", b_queries)->required();
  bench_cmd->add_option("--beams", b_beams);

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "HTTP retrieval service");
  std::string s_store, s_index, s_vocab, s_lm, s_host = "127.0.0.1";
  int s_port = 8080, s_max = 32;
  serve_cmd->add_option("--store", s_store)->required();
  serve_cmd->add_option("--index", s_index)->required();
  serve_cmd->add_option("--vocab", s_vocab)->required();
  serve_cmd->add_option("--lm", s_lm)->required();
  serve_cmd->add_option("--host", s_host);
  serve_cmd->add_option("--port", s_port);
  serve_cmd->add_option("--max-concurrent", s_max);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    EngineConfig engine = load_engine_config(config_path);
    if (ingest_cmd->parsed())
      return cmd_ingest(corpus_path, store_out, max_words);
    if (index_cmd->parsed())
      return cmd_build_index(store_path, index_out, vocab_out, qrels_path,
                             engine);
    if (train_cmd->parsed())
      return cmd_train_lm(tl_store, tl_vocab, tl_qrels, tl_out, ngram_n,
                          ngram_k, engine);
    if (retrieve_cmd->parsed()) {
      if (titles > 0) engine.decode.title_beam = titles;
      if (passages > 0) engine.decode.passage_beam = passages;
      if (tau > 0) engine.rank.tau = tau;
      if (delta > 0) engine.rank.delta = delta;
      engine.seed = seed;
      return cmd_retrieve(r_store, r_index, r_vocab, r_lm, r_query, r_queries,
                          r_out, run_tag, threads, engine);
    }
    if (gen_cmd->parsed())
      return cmd_gen_train_data(g_store, g_qrels, g_out, g_kind, mix, engine);
    if (eval_cmd->parsed()) return cmd_eval(e_run, e_qrels, e_level, e_json);
    if (bench_cmd->parsed())
      return cmd_bench(b_store, b_index, b_vocab, b_lm, b_queries, b_beams,
                       engine);
    if (serve_cmd->parsed())
      return cmd_serve(s_store, s_index, s_vocab, s_lm, s_host, s_port, s_max,
                       engine);
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
