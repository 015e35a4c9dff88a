#include "selfret/service.hpp"

#include <chrono>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "selfret/decode.hpp"
#include "selfret/eval.hpp"
#include "selfret/rank.hpp"

namespace selfret {

namespace {

nlohmann::json scored_to_json(const ScoredPassage& sp) {
  return {{"passage_id", sp.passage_id},
          {"doc_id", sp.doc_id},
          {"title", sp.title},
          {"text", sp.text},
          {"title_logprob", sp.title_logprob},
          {"rejection_prob", sp.rejection_prob},
          {"score_title", sp.score_title},
          {"score_assessment", sp.score_assessment},
          {"score", sp.score},
          {"rank", sp.rank}};
}

void error_response(httplib::Response& res, int status,
                    const std::string& message) {
  res.status = status;
  res.set_content(
      nlohmann::json{{"code", status}, {"message", message}}.dump(),
      "application/json");
}

}  // namespace

struct RetrievalService::Impl {
  EngineConfig engine;
  CorpusStore store;
  TrieIndex index;
  WordTokenizer tok;
  std::shared_ptr<const LanguageModel> lm;
  httplib::Server server;
  std::thread thread;
  std::atomic<int> in_flight{0};
  std::atomic<bool> ready{false};
  std::chrono::steady_clock::time_point started =
      std::chrono::steady_clock::now();
};

RetrievalService::RetrievalService(ServiceConfig service_cfg,
                                   EngineConfig engine_cfg, CorpusStore store,
                                   TrieIndex index, WordTokenizer tok,
                                   std::shared_ptr<const LanguageModel> lm)
    : impl_(std::make_unique<Impl>()), service_cfg_(service_cfg) {
  impl_->engine = std::move(engine_cfg);
  impl_->store = std::move(store);
  impl_->index = std::move(index);
  impl_->tok = std::move(tok);
  impl_->lm = std::move(lm);

  Impl* s = impl_.get();
  const int max_inflight = service_cfg_.max_concurrent_requests;

  auto guard = [s, max_inflight](httplib::Response& res) {
    if (s->in_flight.fetch_add(1) >= max_inflight) {
      s->in_flight.fetch_sub(1);
      error_response(res, 503, "over max concurrent requests");
      return false;
    }
    return true;
  };
  auto done = [s]() { s->in_flight.fetch_sub(1); };

  s->server.Post("/retrieve", [s, guard, done](const httplib::Request& req,
                                               httplib::Response& res) {
    if (!guard(res)) return;
    try {
      auto body = nlohmann::json::parse(req.body);
      std::string query = body.value("query", "");
      int k = body.value("k", 10);
      if (query.empty()) {
        error_response(res, 400, "empty query");
        done();
        return;
      }
      if (k < 1) {
        error_response(res, 400, "k must be >= 1");
        done();
        return;
      }
      auto t0 = std::chrono::steady_clock::now();
      auto cands = retrieve(*s->lm, s->index, s->tok, query,
                            s->engine.prompts, s->engine.decode);
      auto ranked = rerank(cands, *s->lm, s->tok, s->store, query,
                           s->engine.rank, s->engine.prompts);
      if (ranked.size() > static_cast<std::size_t>(k)) ranked.resize(k);
      auto t1 = std::chrono::steady_clock::now();
      nlohmann::json results = nlohmann::json::array();
      for (const auto& sp : ranked) results.push_back(scored_to_json(sp));
      nlohmann::json out = {
          {"results", results},
          {"timing_ms",
           std::chrono::duration<double, std::milli>(t1 - t0).count()}};
      res.set_content(out.dump(), "application/json");
    } catch (const std::exception& e) {
      error_response(res, 500, e.what());
    }
    done();
  });

  s->server.Post("/rerank", [s, guard, done](const httplib::Request& req,
                                             httplib::Response& res) {
    if (!guard(res)) return;
    try {
      auto body = nlohmann::json::parse(req.body);
      std::string query = body.value("query", "");
      if (query.empty()) {
        error_response(res, 400, "empty query");
        done();
        return;
      }
      std::vector<ExternalPassage> passages;
      for (const auto& p : body.at("passages"))
        passages.push_back({p.at("passage_id").get<std::string>(),
                            p.at("title").get<std::string>(),
                            p.at("text").get<std::string>()});
      if (passages.empty()) {
        error_response(res, 400, "no passages");
        done();
        return;
      }
      auto ranked = rerank_external(passages, *s->lm, s->tok, &s->index, query,
                                    s->engine.rank, s->engine.prompts);
      nlohmann::json results = nlohmann::json::array();
      for (const auto& sp : ranked) results.push_back(scored_to_json(sp));
      res.set_content(nlohmann::json{{"results", results}}.dump(),
                      "application/json");
    } catch (const std::invalid_argument& e) {
      error_response(res, 400, e.what());
    } catch (const std::exception& e) {
      error_response(res, 500, e.what());
    }
    done();
  });

  s->server.Post("/answer", [s, guard, done](const httplib::Request& req,
                                             httplib::Response& res) {
    if (!guard(res)) return;
    try {
      auto body = nlohmann::json::parse(req.body);
      std::string query = body.value("query", "");
      if (query.empty()) {
        error_response(res, 400, "empty query");
        done();
        return;
      }
      if (s->index.title_trie.empty()) {
        error_response(res, 500, "empty index");
        done();
        return;
      }
      auto cands = retrieve(*s->lm, s->index, s->tok, query,
                            s->engine.prompts, s->engine.decode);
      auto ranked = rerank(cands, *s->lm, s->tok, s->store, query,
                           s->engine.rank, s->engine.prompts);
      RagAnswer ans =
          generate_answer(*s->lm, s->tok, query, ranked.front(),
                          s->engine.rank, s->engine.prompts,
                          s->engine.decode.max_answer_tokens);
      nlohmann::json results = nlohmann::json::array();
      for (const auto& sp : ranked) results.push_back(scored_to_json(sp));
      nlohmann::json out = {{"answer", ans.text},
                            {"passage_id", ans.passage_id},
                            {"truncated", ans.truncated},
                            {"results", results}};
      res.set_content(out.dump(), "application/json");
    } catch (const std::exception& e) {
      error_response(res, 500, e.what());
    }
    done();
  });

  s->server.Get("/health", [s](const httplib::Request&, httplib::Response& res) {
    if (!s->ready.load()) {
      error_response(res, 503, "loading");
      return;
    }
    TrieStats stats = trie_stats(s->index);
    double uptime = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - s->started)
                        .count();
    nlohmann::json out = {
        {"status", "ready"},
        {"uptime_sec", uptime},
        {"index_stats",
         {{"titles", s->index.title_trie.leaf_count()},
          {"documents", s->index.passage_tries.size()},
          {"nodes", stats.node_count},
          {"leaves", stats.leaf_count},
          {"memory_bytes", stats.memory_bytes}}},
        {"lm_descriptor", "loaded"}};
    res.set_content(out.dump(), "application/json");
  });

  s->server.Get("/stats", [s](const httplib::Request&, httplib::Response& res) {
    TrieStats stats = trie_stats(s->index);
    nlohmann::json out = {{"nodes", stats.node_count},
                          {"leaves", stats.leaf_count},
                          {"max_depth", stats.max_depth},
                          {"memory_bytes", stats.memory_bytes}};
    res.set_content(out.dump(), "application/json");
  });
}

RetrievalService::~RetrievalService() { stop(); }

bool RetrievalService::run() {
  impl_->ready = true;
  return impl_->server.listen(service_cfg_.host, service_cfg_.port);
}

bool RetrievalService::start() {
  Impl* s = impl_.get();
  s->ready = true;
  s->thread = std::thread([this]() {
    impl_->server.listen(service_cfg_.host, service_cfg_.port);
  });
  for (int i = 0; i < 200; ++i) {
    if (s->server.is_running()) return true;
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  return false;
}

void RetrievalService::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace selfret
