#include "selfret/service.hpp"

#include <unistd.h>

#include <memory>

#include "doctest.h"
#include "fixtures.hpp"
#include "httplib.h"
#include "json.hpp"
#include "selfret/decode.hpp"
#include "selfret/rank.hpp"

using namespace selfret;

namespace {

struct LiveService {
  EngineConfig engine;
  CorpusStore store;
  WordTokenizer tok;
  TrieIndex index;
  std::shared_ptr<NGramLM> lm;
  std::unique_ptr<RetrievalService> service;
  std::unique_ptr<httplib::Client> client;
};

LiveService start_service(int max_concurrent = 32) {
  LiveService ls;
  ls.store = selfret::testing::f1_store();
  ls.tok = build_vocab(ls.store, ls.engine.prompts.literals(ls.engine.rank));
  ls.index = build_index(ls.store, ls.tok);
  std::vector<std::string> texts;
  for (const auto& d : ls.store.documents) texts.push_back(d.title);
  for (const auto& p : ls.store.passages) texts.push_back(p.text);
  ls.lm = std::make_shared<NGramLM>(train_ngram(texts, ls.tok, 2, 0.1));

  ServiceConfig cfg;
  cfg.port = 18100 + static_cast<int>(getpid() % 8000);
  cfg.max_concurrent_requests = max_concurrent;
  ls.service = std::make_unique<RetrievalService>(
      cfg, ls.engine, ls.store, build_index(ls.store, ls.tok), ls.tok, ls.lm);
  REQUIRE(ls.service->start());
  ls.client = std::make_unique<httplib::Client>("127.0.0.1", cfg.port);
  ls.client->set_read_timeout(10, 0);
  return ls;
}

}  // namespace

TEST_CASE("service endpoints") {
  LiveService ls = start_service();

  SUBCASE("health reports index stats") {
    auto res = ls.client->Get("/health");
    REQUIRE(res);
    CHECK(res->status == 200);
    auto j = nlohmann::json::parse(res->body);
    CHECK(j["status"] == "ready");
    CHECK(j["index_stats"]["titles"] == 3);
    CHECK(j["index_stats"]["documents"] == 3);
    CHECK(j["uptime_sec"].get<double>() >= 0.0);
  }

  SUBCASE("stats mirrors trie_stats") {
    auto res = ls.client->Get("/stats");
    REQUIRE(res);
    CHECK(res->status == 200);
    auto j = nlohmann::json::parse(res->body);
    TrieStats stats = trie_stats(ls.index);
    CHECK(j["nodes"] == stats.node_count);
    CHECK(j["leaves"] == stats.leaf_count);
    CHECK(j["memory_bytes"] == stats.memory_bytes);
  }

  SUBCASE("retrieve agrees with the in-process pipeline") {
    auto res = ls.client->Post(
        "/retrieve", R"({"query":"apple pie","k":10})", "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
    auto j = nlohmann::json::parse(res->body);
    CHECK(j["timing_ms"].get<double>() >= 0.0);

    auto cands = retrieve(*ls.lm, ls.index, ls.tok, "apple pie",
                          ls.engine.prompts, ls.engine.decode);
    auto ranked = rerank(cands, *ls.lm, ls.tok, ls.store, "apple pie",
                         ls.engine.rank, ls.engine.prompts);
    REQUIRE(j["results"].size() == ranked.size());
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      CHECK(j["results"][i]["passage_id"] == ranked[i].passage_id);
      CHECK(j["results"][i]["rank"] == ranked[i].rank);
      CHECK(j["results"][i]["score"].get<double>() ==
            doctest::Approx(ranked[i].score).epsilon(1e-9));
    }
  }

  SUBCASE("retrieve truncates to k") {
    auto res = ls.client->Post(
        "/retrieve", R"({"query":"apple pie","k":1})", "application/json");
    REQUIRE(res);
    auto j = nlohmann::json::parse(res->body);
    CHECK(j["results"].size() == 1);
    CHECK(j["results"][0]["rank"] == 1);
  }

  SUBCASE("retrieve input validation") {
    auto empty =
        ls.client->Post("/retrieve", R"({"query":""})", "application/json");
    REQUIRE(empty);
    CHECK(empty->status == 400);
    CHECK(nlohmann::json::parse(empty->body)["message"] == "empty query");

    auto bad_k = ls.client->Post(
        "/retrieve", R"({"query":"x","k":0})", "application/json");
    REQUIRE(bad_k);
    CHECK(bad_k->status == 400);

    auto garbage = ls.client->Post("/retrieve", "{not json", "application/json");
    REQUIRE(garbage);
    CHECK(garbage->status == 500);
  }

  SUBCASE("rerank endpoint") {
    nlohmann::json body = {
        {"query", "apple pie"},
        {"passages",
         {{{"passage_id", "d1#0"},
           {"title", "apple pie"},
           {"text", "apple pie is sweet. apple pie uses flour."}},
          {{"passage_id", "d3#0"},
           {"title", "banana bread"},
           {"text", "banana bread is moist."}}}}};
    auto res = ls.client->Post("/rerank", body.dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
    auto j = nlohmann::json::parse(res->body);
    REQUIRE(j["results"].size() == 2);
    CHECK(j["results"][0]["rank"] == 1);

    body["passages"].push_back(body["passages"][0]);
    auto dup = ls.client->Post("/rerank", body.dump(), "application/json");
    REQUIRE(dup);
    CHECK(dup->status == 400);
    CHECK(nlohmann::json::parse(dup->body)["message"] ==
          "duplicate candidate: d1#0");
  }

  SUBCASE("answer endpoint returns the top passage's answer fields") {
    auto res = ls.client->Post("/answer", R"({"query":"apple pie"})",
                               "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
    auto j = nlohmann::json::parse(res->body);
    CHECK(j.contains("answer"));
    CHECK(ls.store.has_passage(j["passage_id"].get<std::string>()));
    REQUIRE(!j["results"].empty());
    CHECK(j["results"][0]["passage_id"] == j["passage_id"]);
  }

  SUBCASE("unknown route is a 404") {
    auto res = ls.client->Get("/nope");
    REQUIRE(res);
    CHECK(res->status == 404);
  }
}
