#include "selfret/tokenizer.hpp"

#include "doctest.h"
#include "fixtures.hpp"

using namespace selfret;

TEST_CASE("build_vocab covers fixture words with specials first") {
  CorpusStore store = selfret::testing::f1_store();
  WordTokenizer tok = build_vocab(store);
  for (const char* w : {"apple", "pie", "tree", "banana", "bread"})
    CHECK(tok.id_of(w) != kUnk);
  CHECK(tok.token_text(kPad) == "<pad>");
  CHECK(tok.token_text(kBos) == "<bos>");
  CHECK(tok.token_text(kEos) == "<eos>");
  CHECK(tok.token_text(kUnk) == "<unk>");
  CHECK(tok.token_text(kSep) == "<sep>");
}

TEST_CASE("vocab id assignment is deterministic") {
  CorpusStore store = selfret::testing::f1_store();
  WordTokenizer a = build_vocab(store, {"extra words here"});
  WordTokenizer b = build_vocab(store, {"extra words here"});
  REQUIRE(a.vocab_size() == b.vocab_size());
  for (TokenId i = 0; i < a.vocab_size(); ++i)
    CHECK(a.token_text(i) == b.token_text(i));
}

TEST_CASE("encode basics") {
  CorpusStore store = selfret::testing::f1_store();
  WordTokenizer tok = build_vocab(store);
  CHECK(tok.encode("apple pie") ==
        TokenSeq{tok.id_of("apple"), tok.id_of("pie")});
  CHECK(tok.encode("").empty());
  CHECK(tok.encode("apple zzz") == TokenSeq{tok.id_of("apple"), kUnk});
}

TEST_CASE("decode basics and errors") {
  CorpusStore store = selfret::testing::f1_store();
  WordTokenizer tok = build_vocab(store);
  CHECK(tok.decode(TokenSeq{}) == "");
  CHECK(tok.decode(TokenSeq{tok.id_of("apple")}) == "apple");
  CHECK_THROWS_AS(tok.decode(TokenSeq{static_cast<TokenId>(tok.vocab_size())}),
                  std::out_of_range);
}

TEST_CASE("roundtrip on every fixture passage") {
  CorpusStore store = selfret::testing::f1_store();
  WordTokenizer tok = build_vocab(store);
  for (const auto& p : store.passages)
    CHECK(tok.decode(tok.encode(p.text)) == p.text);
  for (const auto& d : store.documents)
    CHECK(tok.decode(tok.encode(d.title)) == d.title);
}

TEST_CASE("vocab file round trip preserves ids") {
  CorpusStore store = selfret::testing::f1_store();
  WordTokenizer tok = build_vocab(store, {"query words"});
  std::string path = "/tmp/selfret_vocab_test.tsv";
  tok.save(path);
  WordTokenizer loaded = WordTokenizer::load(path);
  REQUIRE(loaded.vocab_size() == tok.vocab_size());
  for (TokenId i = 0; i < tok.vocab_size(); ++i)
    CHECK(loaded.token_text(i) == tok.token_text(i));
}
