#include "selfret/trie.hpp"

#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"

using namespace selfret;

namespace {

struct F1Index {
  CorpusStore store;
  WordTokenizer tok;
  TrieIndex index;
};

F1Index make_f1(int max_words = 200) {
  F1Index f;
  f.store = selfret::testing::f1_store(max_words);
  f.tok = build_vocab(f.store);
  f.index = build_index(f.store, f.tok);
  return f;
}

}  // namespace

TEST_CASE("build_index on fixture F1") {
  auto f = make_f1();
  CHECK(f.index.title_trie.leaf_count() == 3);
  auto roots = f.index.title_trie.allowed_next({});
  REQUIRE(roots.size() == 2);
  CHECK(std::count(roots.begin(), roots.end(), f.tok.id_of("apple")) == 1);
  CHECK(std::count(roots.begin(), roots.end(), f.tok.id_of("banana")) == 1);
}

TEST_CASE("per-document passage tries") {
  auto f = make_f1(5);  // d1 chunks into 2 passages at 5-word cap
  CHECK(f.index.passages_of("d1").leaf_count() == 2);
  CHECK(f.index.passages_of("d2").leaf_count() == 1);
}

TEST_CASE("single-document corpus is fully forced") {
  std::istringstream in(R"({"doc_id":"d","title":"only title","text":"x y z"})");
  CorpusStore store = ingest_corpus(in, 200);
  WordTokenizer tok = build_vocab(store);
  TrieIndex index = build_index(store, tok);
  CHECK(index.title_trie.leaf_count() == 1);
  auto uc = index.title_trie.unique_completion({});
  REQUIRE(uc.has_value());
  CHECK(uc->second == "d");
}

TEST_CASE("allowed_next on fixture paths") {
  auto f = make_f1();
  TokenId apple = f.tok.id_of("apple"), banana = f.tok.id_of("banana");
  TokenId pie = f.tok.id_of("pie"), tree = f.tok.id_of("tree");
  TokenId bread = f.tok.id_of("bread");

  auto after_apple = f.index.title_trie.allowed_next(TokenSeq{apple});
  REQUIRE(after_apple.size() == 2);
  CHECK(std::count(after_apple.begin(), after_apple.end(), pie) == 1);
  CHECK(std::count(after_apple.begin(), after_apple.end(), tree) == 1);

  auto end = f.index.title_trie.allowed_next(TokenSeq{banana, bread});
  CHECK(end == std::vector<TokenId>{kEos});

  CHECK_THROWS_AS(f.index.title_trie.allowed_next(TokenSeq{pie}),
                  std::runtime_error);
}

TEST_CASE("unique_completion") {
  auto f = make_f1();
  TokenId apple = f.tok.id_of("apple"), banana = f.tok.id_of("banana");

  auto uc = f.index.title_trie.unique_completion(TokenSeq{banana});
  REQUIRE(uc.has_value());
  CHECK(uc->first == TokenSeq{f.tok.id_of("bread")});
  CHECK(uc->second == "d3");

  CHECK_FALSE(f.index.title_trie.unique_completion(TokenSeq{apple}));

  // A full stored sequence has an empty remainder.
  auto full = f.index.title_trie.unique_completion(
      TokenSeq{banana, f.tok.id_of("bread")});
  REQUIRE(full.has_value());
  CHECK(full->first.empty());
  CHECK(full->second == "d3");
}

TEST_CASE("lookup exact membership") {
  auto f = make_f1();
  CHECK(f.index.title_trie.lookup(f.tok.encode("apple pie")) == "d1");
  CHECK_FALSE(f.index.title_trie.lookup(f.tok.encode("apple")));
  CHECK_FALSE(f.index.title_trie.lookup(f.tok.encode("grape jam")));
}

TEST_CASE("build_index rejects UNK sequences") {
  CorpusStore store = selfret::testing::f1_store();
  CorpusStore other = store;
  other.documents[0].title = "zzz unseen";
  WordTokenizer tok = build_vocab(store);
  CHECK_THROWS_AS(build_index(other, tok), std::runtime_error);
}

TEST_CASE("leaf count consistency over children") {
  std::mt19937_64 rng(3);
  std::istringstream in(selfret::testing::synthetic_jsonl(40, rng));
  CorpusStore store = ingest_corpus(in, 12);
  WordTokenizer tok = build_vocab(store);
  TrieIndex index = build_index(store, tok);

  // Sum of child subtree_leaves equals the parent count at every node.
  std::vector<TokenTrie::NodeRef> stack{TokenTrie::kRoot};
  const TokenTrie& trie = index.title_trie;
  while (!stack.empty()) {
    auto node = stack.back();
    stack.pop_back();
    auto toks = trie.children_tokens(node);
    if (toks.empty()) continue;
    std::uint32_t sum = 0;
    for (TokenId t : toks) {
      auto c = *trie.child(node, t);
      sum += trie.subtree_leaves(c);
      stack.push_back(c);
    }
    CHECK(sum == trie.subtree_leaves(node));
  }
}

TEST_CASE("membership completeness on a random corpus") {
  std::mt19937_64 rng(5);
  std::istringstream in(selfret::testing::synthetic_jsonl(30, rng));
  CorpusStore store = ingest_corpus(in, 12);
  WordTokenizer tok = build_vocab(store);
  TrieIndex index = build_index(store, tok);
  for (const auto& d : store.documents)
    CHECK(index.title_trie.lookup(tok.encode(d.title)) == d.doc_id);
  for (const auto& p : store.passages)
    CHECK(index.passages_of(p.doc_id).lookup(tok.encode(p.text)) ==
          p.passage_id);
  CHECK_FALSE(index.title_trie.lookup(tok.encode("T0")));  // strict prefix
}

TEST_CASE("prefix sharing keeps node count flat for duplicates") {
  TokenTrie trie;
  TokenSeq seq{10, 11, 12, 13};
  for (int i = 0; i < 25; ++i) trie.insert(seq, "p0");
  // root + 4 tokens + EOS
  CHECK(trie.node_count() == 6);
  CHECK(trie.leaf_count() == 1);
  CHECK(*trie.lookup(seq) == "p0");
}

TEST_CASE("shared prefixes are stored once") {
  TokenTrie trie;
  TokenSeq prefix;
  for (TokenId t = 100; t < 110; ++t) prefix.push_back(t);
  std::size_t unique_suffix_tokens = 0;
  for (int i = 0; i < 1000; ++i) {
    TokenSeq seq = prefix;
    seq.push_back(static_cast<TokenId>(2000 + i));
    seq.push_back(static_cast<TokenId>(4000 + (i % 7)));
    unique_suffix_tokens += 2;
    trie.insert(seq, "p" + std::to_string(i));
  }
  // 10 prefix nodes + per-sequence suffix+EOS nodes + root, nothing more
  CHECK(trie.node_count() ==
        10 + unique_suffix_tokens + 1000 /*EOS nodes*/ + 1);
  CHECK(trie.leaf_count() == 1000);
}

TEST_CASE("trie_stats") {
  auto f = make_f1();
  TrieStats s = trie_stats(f.index.title_trie);
  CHECK(s.leaf_count == 3);
  CHECK(s.node_count > 3);
  CHECK(s.memory_bytes > 0);
  CHECK(s.max_depth == 3);  // two title tokens + EOS

  TokenTrie empty;
  CHECK(trie_stats(empty).leaf_count == 0);
}

TEST_CASE("serialization round trip with checksum") {
  std::mt19937_64 rng(9);
  std::istringstream in(selfret::testing::synthetic_jsonl(25, rng));
  CorpusStore store = ingest_corpus(in, 12);
  WordTokenizer tok = build_vocab(store);
  TrieIndex index = build_index(store, tok);

  std::string path = "/tmp/selfret_index_test.bin";
  index.save(path);
  TrieIndex loaded = TrieIndex::load(path);
  CHECK(loaded.title_trie.leaf_count() == index.title_trie.leaf_count());
  CHECK(loaded.title_trie.node_count() == index.title_trie.node_count());
  for (const auto& d : store.documents)
    CHECK(loaded.title_trie.lookup(tok.encode(d.title)) == d.doc_id);
  for (const auto& p : store.passages)
    CHECK(loaded.passages_of(p.doc_id).lookup(tok.encode(p.text)) ==
          p.passage_id);

  // Flip one byte in the body: loader must reject the file.
  std::ifstream fin(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(fin)),
                    std::istreambuf_iterator<char>());
  fin.close();
  bytes[bytes.size() - 1] ^= 0x01;  // stored checksum of the last trie
  std::string bad = "/tmp/selfret_index_corrupt.bin";
  std::ofstream fout(bad, std::ios::binary);
  fout.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  fout.close();
  CHECK_THROWS_AS(TrieIndex::load(bad), std::runtime_error);
}

TEST_CASE("duplicate passages deduplicate to the lowest ordinal") {
  TokenTrie trie;
  TokenSeq seq{7, 8, 9};
  trie.insert(seq, "d#0");
  trie.insert(seq, "d#2");
  CHECK(trie.leaf_count() == 1);
  CHECK(*trie.lookup(seq) == "d#0");
}
