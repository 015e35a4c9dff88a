#include "selfret/decode.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"

using namespace selfret;
using selfret::testing::UniformLM;

namespace {

// Exhaustive oracle: every stored sequence scored by sequence_logprob under
// the same constraint, sorted with the decoder's tie-break.
std::vector<Candidate> enumerate_all(const LanguageModel& lm,
                                     const TokenTrie& trie,
                                     std::span<const TokenId> prompt) {
  std::vector<Candidate> out;
  std::vector<std::pair<TokenTrie::NodeRef, TokenSeq>> stack{
      {TokenTrie::kRoot, {}}};
  while (!stack.empty()) {
    auto [node, tokens] = stack.back();
    stack.pop_back();
    for (TokenId t : trie.children_tokens(node)) {
      auto c = *trie.child(node, t);
      if (t == kEos) {
        TokenSeq with_eos = tokens;
        with_eos.push_back(kEos);
        Candidate cand;
        cand.tokens = tokens;
        cand.leaf_id = *trie.leaf_at(c);
        cand.logprob = sequence_logprob(lm, prompt, with_eos, &trie, {});
        out.push_back(std::move(cand));
      } else {
        TokenSeq next = tokens;
        next.push_back(t);
        stack.push_back({c, std::move(next)});
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
    if (a.logprob != b.logprob) return a.logprob > b.logprob;
    return a.tokens < b.tokens;
  });
  return out;
}

struct Engine {
  CorpusStore store;
  WordTokenizer tok;
  TrieIndex index;
};

Engine make_engine(const std::string& jsonl, int max_words = 200) {
  Engine e;
  std::istringstream in(jsonl);
  e.store = ingest_corpus(in, max_words);
  e.tok = build_vocab(e.store);
  e.index = build_index(e.store, e.tok);
  return e;
}

}  // namespace

TEST_CASE("single-sequence trie decodes with zero logprob") {
  TokenTrie trie;
  trie.insert(TokenSeq{5, 6, 7}, "only");
  UniformLM lm(10);
  auto cands = constrained_beam_search(lm, trie, {}, 1, 16);
  REQUIRE(cands.size() == 1);
  CHECK(cands[0].tokens == TokenSeq{5, 6, 7});
  CHECK(cands[0].logprob == 0.0);
  CHECK(cands[0].leaf_id == "only");
}

TEST_CASE("fixture F1 title scores under the uniform LM") {
  Engine e = make_engine(selfret::testing::f1_jsonl());
  UniformLM lm(e.tok.vocab_size());
  auto cands = constrained_beam_search(lm, e.index.title_trie, {}, 3, 16);
  REQUIRE(cands.size() == 3);
  // banana bread: step 1 over {apple,banana} then forced -> -ln 2.
  CHECK(cands[0].leaf_id == "d3");
  CHECK(cands[0].logprob == doctest::Approx(-std::log(2.0)).epsilon(1e-12));
  // apple {pie,tree}: -ln 2 - ln 2, tie broken by token order.
  CHECK(cands[1].logprob == doctest::Approx(-2 * std::log(2.0)).epsilon(1e-12));
  CHECK(cands[2].logprob == doctest::Approx(-2 * std::log(2.0)).epsilon(1e-12));
  CHECK(cands[1].tokens < cands[2].tokens);
  TokenSeq pie{e.tok.id_of("apple"), e.tok.id_of("pie")};
  TokenSeq tree{e.tok.id_of("apple"), e.tok.id_of("tree")};
  if (pie < tree) {
    CHECK(cands[1].tokens == pie);
  } else {
    CHECK(cands[1].tokens == tree);
  }
}

TEST_CASE("beam equals exhaustive enumeration on random corpora") {
  std::mt19937_64 rng(31);
  for (int round = 0; round < 10; ++round) {
    Engine e = make_engine(selfret::testing::synthetic_jsonl(12, rng), 10);
    std::vector<std::string> texts;
    for (const auto& p : e.store.passages) texts.push_back(p.text);
    NGramLM lm = train_ngram(texts, e.tok, 2, 0.1);
    TokenSeq prompt = e.tok.encode("search : W1 title :");
    prompt.insert(prompt.begin(), kBos);

    int leaves = static_cast<int>(e.index.title_trie.leaf_count());
    auto got =
        constrained_beam_search(lm, e.index.title_trie, prompt, leaves, 64);
    auto want = enumerate_all(lm, e.index.title_trie, prompt);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].tokens == want[i].tokens);
      CHECK(got[i].leaf_id == want[i].leaf_id);
      CHECK(got[i].logprob ==
            doctest::Approx(want[i].logprob).epsilon(1e-10));
    }
  }
}

TEST_CASE("early termination is score- and token-exact") {
  std::mt19937_64 rng(37);
  for (int round = 0; round < 10; ++round) {
    Engine e = make_engine(selfret::testing::synthetic_jsonl(10, rng), 10);
    std::vector<std::string> texts;
    for (const auto& p : e.store.passages) texts.push_back(p.text);
    NGramLM lm = train_ngram(texts, e.tok, 2, 0.1);

    for (int beam : {1, 2, 5}) {
      auto fast =
          constrained_beam_search(lm, e.index.title_trie, {}, beam, 64, true);
      auto slow =
          constrained_beam_search(lm, e.index.title_trie, {}, beam, 64, false);
      REQUIRE(fast.size() == slow.size());
      for (std::size_t i = 0; i < fast.size(); ++i) {
        CHECK(fast[i].tokens == slow[i].tokens);
        CHECK(std::abs(fast[i].logprob - slow[i].logprob) < 1e-12);
      }
    }
  }
}

TEST_CASE("every decoded candidate is corpus content") {
  std::mt19937_64 rng(41);
  Engine e = make_engine(selfret::testing::synthetic_jsonl(30, rng), 10);
  std::vector<std::string> texts;
  for (const auto& p : e.store.passages) texts.push_back(p.text);
  NGramLM lm = train_ngram(texts, e.tok, 2, 0.1);
  PromptTemplates prompts;
  DecodeConfig cfg;
  cfg.title_beam = 3;
  cfg.passage_beam = 2;
  for (const char* q : {"W1 W2", "W5", "T3 W0"}) {
    for (const auto& rc : retrieve(lm, e.index, e.tok, q, prompts, cfg)) {
      CHECK(e.index.title_trie.lookup(rc.title.tokens) == rc.doc_id);
      CHECK(e.index.passages_of(rc.doc_id).lookup(rc.passage.tokens) ==
            rc.passage_id);
      CHECK(e.tok.decode(rc.passage.tokens) ==
            e.store.passage(rc.passage_id).text);
    }
  }
}

TEST_CASE("generate_titles clamps to the title count") {
  Engine e = make_engine(selfret::testing::f1_jsonl());
  UniformLM lm(e.tok.vocab_size());
  PromptTemplates prompts;
  DecodeConfig cfg;
  cfg.title_beam = 50;
  auto titles = generate_titles(lm, e.index, e.tok, "anything", prompts, cfg);
  CHECK(titles.size() == 3);
}

TEST_CASE("generate_titles ranks the trained continuation first") {
  Engine e = make_engine(selfret::testing::f1_jsonl());
  std::vector<std::string> texts;
  for (const auto& d : e.store.documents) texts.push_back(d.title);
  for (const auto& p : e.store.passages) texts.push_back(p.text);
  PromptTemplates prompts;
  // Teach the bigram model the retrieval prompt -> title transition.
  texts.push_back(prompts.render_retrieval("apple pie recipe") + " apple pie");
  NGramLM lm = train_ngram(texts, e.tok, 2, 0.01);
  DecodeConfig cfg;
  cfg.title_beam = 3;
  auto titles =
      generate_titles(lm, e.index, e.tok, "apple pie recipe", prompts, cfg);
  REQUIRE(!titles.empty());
  CHECK(titles[0].leaf_id == "d1");

  // Oracle: exhaustive scoring agrees on the winner.
  TokenSeq prompt = e.tok.encode(prompts.render_retrieval("apple pie recipe"));
  prompt.insert(prompt.begin(), kBos);
  auto all = enumerate_all(lm, e.index.title_trie, prompt);
  CHECK(all[0].leaf_id == "d1");
}

TEST_CASE("generate_passages on single- and multi-passage docs") {
  Engine e = make_engine(selfret::testing::f1_jsonl(), 5);  // d1 -> 2 passages
  UniformLM lm(e.tok.vocab_size());
  PromptTemplates prompts;
  DecodeConfig cfg;
  cfg.passage_beam = 10;

  Candidate title;
  title.tokens = e.tok.encode("apple tree");
  title.leaf_id = "d2";
  auto single = generate_passages(lm, e.index, e.tok, "q", title, prompts, cfg);
  REQUIRE(single.size() == 1);
  CHECK(single[0].logprob == 0.0);
  CHECK(single[0].leaf_id == "d2#0");

  title.tokens = e.tok.encode("apple pie");
  title.leaf_id = "d1";
  auto both = generate_passages(lm, e.index, e.tok, "q", title, prompts, cfg);
  CHECK(both.size() == 2);  // passage_beam clamps to the doc's passage count

  Candidate missing;
  missing.tokens = e.tok.encode("nope");
  missing.leaf_id = "dX";
  CHECK_THROWS_AS(
      generate_passages(lm, e.index, e.tok, "q", missing, prompts, cfg),
      std::runtime_error);
}

TEST_CASE("retrieve on fixture F1 with i=3 j=2") {
  Engine e = make_engine(selfret::testing::f1_jsonl(), 5);
  UniformLM lm(e.tok.vocab_size());
  PromptTemplates prompts;
  DecodeConfig cfg;
  cfg.title_beam = 3;
  cfg.passage_beam = 2;
  auto cands = retrieve(lm, e.index, e.tok, "anything", prompts, cfg);
  CHECK(cands.size() == 4);  // d1 has two passages, d2/d3 one each

  std::set<std::string> ids;
  for (const auto& rc : cands) CHECK(ids.insert(rc.passage_id).second);
}

TEST_CASE("retrieve degenerate single-doc corpus") {
  Engine e = make_engine(
      R"({"doc_id":"d","title":"lone title","text":"just one passage here"})");
  UniformLM lm(e.tok.vocab_size());
  PromptTemplates prompts;
  DecodeConfig cfg;
  auto cands = retrieve(lm, e.index, e.tok, "q", prompts, cfg);
  REQUIRE(cands.size() == 1);
  CHECK(cands[0].passage_id == "d#0");
}

TEST_CASE("max_len shorter than sequences still completes unique paths") {
  TokenTrie trie;
  trie.insert(TokenSeq{5, 6, 7, 8}, "a");
  UniformLM lm(10);
  auto cands = constrained_beam_search(lm, trie, {}, 2, 2, false);
  REQUIRE(cands.size() == 1);
  CHECK(cands[0].tokens == TokenSeq{5, 6, 7, 8});

  // Two sequences diverging beyond the budget: no completion possible.
  TokenTrie wide;
  wide.insert(TokenSeq{5, 6, 7}, "a");
  wide.insert(TokenSeq{5, 6, 8}, "b");
  CHECK_THROWS_WITH_AS(constrained_beam_search(lm, wide, {}, 2, 1, false),
                       "no complete candidate within max_len",
                       std::runtime_error);
}

TEST_CASE("widening the beam preserves discovered candidates") {
  std::mt19937_64 rng(43);
  for (int round = 0; round < 8; ++round) {
    Engine e = make_engine(selfret::testing::synthetic_jsonl(15, rng), 10);
    std::vector<std::string> texts;
    for (const auto& p : e.store.passages) texts.push_back(p.text);
    NGramLM lm = train_ngram(texts, e.tok, 2, 0.1);
    int leaves = static_cast<int>(e.index.title_trie.leaf_count());
    std::vector<std::vector<Candidate>> runs;
    for (int beam : {1, 2, 4, leaves}) {
      runs.push_back(
          constrained_beam_search(lm, e.index.title_trie, {}, beam, 64));
    }
    for (std::size_t i = 0; i + 1 < runs.size(); ++i) {
      for (const auto& c : runs[i]) {
        bool found = false;
        for (const auto& d : runs[i + 1])
          if (d.tokens == c.tokens) found = true;
        CHECK(found);
      }
    }
  }
}
