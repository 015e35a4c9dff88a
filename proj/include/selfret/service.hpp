#pragma once

#include <atomic>
#include <memory>
#include <string>

#include "selfret/config.hpp"
#include "selfret/corpus.hpp"
#include "selfret/lm.hpp"
#include "selfret/tokenizer.hpp"
#include "selfret/trie.hpp"

namespace selfret {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  int max_concurrent_requests = 32;
  int request_timeout_sec = 60;
};

// JSON-over-HTTP front end on a loaded engine. Endpoints:
//   POST /retrieve  {query, k}           -> {results, timing_ms}
//   POST /rerank    {query, passages}    -> {results}
//   POST /answer    {query}              -> {answer, passage_id, results}
//   GET  /health                         -> {status, index_stats, uptime_sec}
//   GET  /stats                          -> trie stats
// Shared state is immutable after startup; requests beyond the in-flight
// bound get 503.
class RetrievalService {
 public:
  RetrievalService(ServiceConfig service_cfg, EngineConfig engine_cfg,
                   CorpusStore store, TrieIndex index, WordTokenizer tok,
                   std::shared_ptr<const LanguageModel> lm);
  ~RetrievalService();

  // Blocks until stop(); returns false if the port could not be bound.
  bool run();
  // Starts in a background thread and waits until the socket is ready.
  bool start();
  void stop();

  int port() const { return service_cfg_.port; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  ServiceConfig service_cfg_;
};

}  // namespace selfret
