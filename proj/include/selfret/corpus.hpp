#pragma once

#include <cstddef>
#include <istream>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

namespace selfret {

struct Document {
  std::string doc_id;
  std::string title;
  std::string text;  // whitespace-normalized
};

struct Sentence {
  std::string text;
  std::size_t begin = 0;  // char span into the normalized parent text
  std::size_t end = 0;
};

struct Passage {
  std::string passage_id;  // doc_id + "#" + ordinal
  std::string doc_id;
  std::string title;
  std::string text;
  int word_count = 0;
  int ordinal = 0;
  bool hard_split = false;  // a sentence longer than max_words was cut
};

struct CorpusStore {
  std::vector<Document> documents;  // ingest order
  std::vector<Passage> passages;    // (doc, ordinal) order
  std::unordered_map<std::string, std::size_t> doc_by_id;
  std::unordered_map<std::string, std::size_t> passage_by_id;
  std::unordered_map<std::string, std::string> doc_by_title;
  int max_words = 200;
  int rejected_records = 0;
  int title_collisions = 0;

  const Document& document(const std::string& doc_id) const;
  const Passage& passage(const std::string& passage_id) const;
  bool has_document(const std::string& doc_id) const {
    return doc_by_id.count(doc_id) > 0;
  }
  bool has_passage(const std::string& passage_id) const {
    return passage_by_id.count(passage_id) > 0;
  }
  std::vector<const Passage*> passages_of(const std::string& doc_id) const;
};

struct StatsReport {
  std::size_t num_documents = 0;
  std::size_t num_passages = 0;
  int title_collisions = 0;
  int rejected_records = 0;
  std::map<int, std::size_t> word_count_histogram;  // bucketed by 10
};

// Collapses whitespace runs to single spaces and trims the ends.
std::string normalize_whitespace(const std::string& text);

int count_words(const std::string& text);

// Terminator-based splitter: {., !, ?} followed by whitespace and an
// uppercase letter, with a fixed abbreviation exception list.
std::vector<Sentence> split_sentences(const std::string& text);

std::vector<Passage> chunk_document(const Document& doc, int max_words);

// Reads line-delimited JSON records {doc_id, title, text}. Throws
// std::runtime_error on duplicate doc_id; empty-text records are dropped
// and counted. Duplicate titles get " (doc_id)" appended.
CorpusStore ingest_corpus(std::istream& in, int max_words = 200);

StatsReport corpus_stats(const CorpusStore& store);

// Store file round trip (JSON).
void save_store(const CorpusStore& store, const std::string& path);
CorpusStore load_store(const std::string& path);

}  // namespace selfret
