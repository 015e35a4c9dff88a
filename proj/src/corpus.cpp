#include "selfret/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace selfret {

namespace {

const std::array<std::string, 7> kAbbreviations = {
    "Dr.", "Mr.", "Mrs.", "etc.", "e.g.", "i.e.", "vs."};

bool ends_with_abbreviation(const std::string& text, std::size_t dot_pos) {
  // Word containing the terminator: from the previous whitespace to dot_pos.
  std::size_t start = dot_pos;
  while (start > 0 && !std::isspace(static_cast<unsigned char>(text[start - 1])))
    --start;
  const std::string word = text.substr(start, dot_pos - start + 1);
  return std::find(kAbbreviations.begin(), kAbbreviations.end(), word) !=
         kAbbreviations.end();
}

}  // namespace

const Document& CorpusStore::document(const std::string& doc_id) const {
  auto it = doc_by_id.find(doc_id);
  if (it == doc_by_id.end())
    throw std::runtime_error("unknown doc_id: " + doc_id);
  return documents[it->second];
}

const Passage& CorpusStore::passage(const std::string& passage_id) const {
  auto it = passage_by_id.find(passage_id);
  if (it == passage_by_id.end())
    throw std::runtime_error("unknown passage_id: " + passage_id);
  return passages[it->second];
}

std::vector<const Passage*> CorpusStore::passages_of(
    const std::string& doc_id) const {
  std::vector<const Passage*> out;
  for (const auto& p : passages)
    if (p.doc_id == doc_id) out.push_back(&p);
  return out;
}

std::string normalize_whitespace(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  bool in_space = true;  // trims leading whitespace
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!in_space) out.push_back(' ');
      in_space = true;
    } else {
      out.push_back(c);
      in_space = false;
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

int count_words(const std::string& text) {
  int n = 0;
  bool in_word = false;
  for (char c : text) {
    bool ws = std::isspace(static_cast<unsigned char>(c));
    if (!ws && !in_word) ++n;
    in_word = !ws;
  }
  return n;
}

std::vector<Sentence> split_sentences(const std::string& raw) {
  const std::string text = normalize_whitespace(raw);
  std::vector<Sentence> out;
  if (text.empty()) return out;

  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (c != '.' && c != '!' && c != '?') continue;
    if (i + 1 >= text.size()) break;  // final terminator ends the last sentence
    if (text[i + 1] != ' ') continue;
    // Next non-space char must be uppercase to count as a boundary.
    std::size_t nxt = i + 2;
    if (nxt >= text.size() ||
        !std::isupper(static_cast<unsigned char>(text[nxt])))
      continue;
    if (c == '.' && ends_with_abbreviation(text, i)) continue;
    out.push_back({text.substr(start, i + 1 - start), start, i + 1});
    start = nxt;
  }
  if (start < text.size())
    out.push_back({text.substr(start), start, text.size()});
  return out;
}

std::vector<Passage> chunk_document(const Document& doc, int max_words) {
  if (max_words < 1) throw std::invalid_argument("max_words must be >= 1");
  std::vector<Sentence> sentences = split_sentences(doc.text);

  std::vector<Passage> out;
  std::string cur;
  int cur_words = 0;
  bool cur_flag = false;

  auto flush = [&]() {
    if (cur.empty()) return;
    Passage p;
    p.ordinal = static_cast<int>(out.size());
    p.doc_id = doc.doc_id;
    p.title = doc.title;
    p.passage_id = doc.doc_id + "#" + std::to_string(p.ordinal);
    p.text = cur;
    p.word_count = cur_words;
    p.hard_split = cur_flag;
    out.push_back(std::move(p));
    cur.clear();
    cur_words = 0;
    cur_flag = false;
  };
  auto append = [&](const std::string& piece, int words) {
    if (!cur.empty()) cur.push_back(' ');
    cur += piece;
    cur_words += words;
  };

  for (const auto& s : sentences) {
    int w = count_words(s.text);
    if (w <= max_words) {
      if (cur_words + w > max_words) flush();
      append(s.text, w);
    } else {
      // Hard split: cut at max_words word boundaries.
      flush();
      std::istringstream words(s.text);
      std::string word;
      std::string piece;
      int piece_words = 0;
      while (words >> word) {
        if (piece_words == max_words) {
          cur = piece;
          cur_words = piece_words;
          cur_flag = true;
          flush();
          piece.clear();
          piece_words = 0;
        }
        if (!piece.empty()) piece.push_back(' ');
        piece += word;
        ++piece_words;
      }
      cur = piece;
      cur_words = piece_words;
      cur_flag = true;  // remainder of a hard-split sentence
    }
  }
  flush();
  return out;
}

CorpusStore ingest_corpus(std::istream& in, int max_words) {
  CorpusStore store;
  store.max_words = max_words;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw std::runtime_error("corpus line " + std::to_string(line_no) +
                               ": invalid JSON: " + e.what());
    }
    Document doc;
    doc.doc_id = rec.at("doc_id").get<std::string>();
    doc.title = normalize_whitespace(rec.at("title").get<std::string>());
    doc.text = normalize_whitespace(rec.at("text").get<std::string>());

    if (store.doc_by_id.count(doc.doc_id))
      throw std::runtime_error("duplicate doc_id: " + doc.doc_id);
    if (doc.text.empty() || doc.title.empty()) {
      ++store.rejected_records;
      continue;
    }
    if (store.doc_by_title.count(doc.title)) {
      doc.title += " (" + doc.doc_id + ")";
      ++store.title_collisions;
    }
    store.doc_by_id[doc.doc_id] = store.documents.size();
    store.doc_by_title[doc.title] = doc.doc_id;
    store.documents.push_back(doc);
  }
  for (const auto& doc : store.documents) {
    for (auto& p : chunk_document(doc, max_words)) {
      store.passage_by_id[p.passage_id] = store.passages.size();
      store.passages.push_back(std::move(p));
    }
  }
  return store;
}

StatsReport corpus_stats(const CorpusStore& store) {
  StatsReport r;
  r.num_documents = store.documents.size();
  r.num_passages = store.passages.size();
  r.title_collisions = store.title_collisions;
  r.rejected_records = store.rejected_records;
  for (const auto& p : store.passages)
    ++r.word_count_histogram[(p.word_count / 10) * 10];
  return r;
}

void save_store(const CorpusStore& store, const std::string& path) {
  nlohmann::json j;
  j["max_words"] = store.max_words;
  j["rejected_records"] = store.rejected_records;
  j["title_collisions"] = store.title_collisions;
  auto& docs = j["documents"] = nlohmann::json::array();
  for (const auto& d : store.documents)
    docs.push_back({{"doc_id", d.doc_id}, {"title", d.title}, {"text", d.text}});
  auto& psgs = j["passages"] = nlohmann::json::array();
  for (const auto& p : store.passages)
    psgs.push_back({{"passage_id", p.passage_id},
                    {"doc_id", p.doc_id},
                    {"title", p.title},
                    {"text", p.text},
                    {"word_count", p.word_count},
                    {"ordinal", p.ordinal},
                    {"hard_split", p.hard_split}});
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write store file: " + path);
  out << j.dump() << "\n";
}

CorpusStore load_store(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read store file: " + path);
  nlohmann::json j;
  in >> j;
  CorpusStore store;
  store.max_words = j.at("max_words").get<int>();
  store.rejected_records = j.at("rejected_records").get<int>();
  store.title_collisions = j.at("title_collisions").get<int>();
  for (const auto& d : j.at("documents")) {
    Document doc{d.at("doc_id"), d.at("title"), d.at("text")};
    store.doc_by_id[doc.doc_id] = store.documents.size();
    store.doc_by_title[doc.title] = doc.doc_id;
    store.documents.push_back(std::move(doc));
  }
  for (const auto& p : j.at("passages")) {
    Passage psg;
    psg.passage_id = p.at("passage_id");
    psg.doc_id = p.at("doc_id");
    psg.title = p.at("title");
    psg.text = p.at("text");
    psg.word_count = p.at("word_count");
    psg.ordinal = p.at("ordinal");
    psg.hard_split = p.at("hard_split");
    store.passage_by_id[psg.passage_id] = store.passages.size();
    store.passages.push_back(std::move(psg));
  }
  return store;
}

}  // namespace selfret
