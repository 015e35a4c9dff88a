#include "selfret/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace selfret {

namespace {

const char* kSpecialNames[kNumSpecials] = {"<pad>", "<bos>", "<eos>", "<unk>",
                                           "<sep>"};

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i])))
      ++i;
    std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i])))
      ++i;
    if (i > start) out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

}  // namespace

TokenSeq WordTokenizer::encode(std::string_view text) const {
  TokenSeq out;
  for (const auto& w : split_words(text)) {
    auto it = ids_.find(w);
    out.push_back(it == ids_.end() ? kUnk : it->second);
  }
  return out;
}

std::string WordTokenizer::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId id : ids) {
    if (id >= tokens_.size())
      throw std::out_of_range("token id out of range: " + std::to_string(id));
    if (!out.empty()) out.push_back(' ');
    out += tokens_[id];
  }
  return out;
}

const std::string& WordTokenizer::token_text(TokenId id) const {
  if (id >= tokens_.size())
    throw std::out_of_range("token id out of range: " + std::to_string(id));
  return tokens_[id];
}

TokenId WordTokenizer::id_of(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnk : it->second;
}

WordTokenizer build_vocab(const CorpusStore& store,
                          const std::vector<std::string>& extra_texts) {
  std::map<std::string, std::size_t> freq;  // ordered map gives the tie-break
  auto add = [&](const std::string& text) {
    for (const auto& w : split_words(text)) ++freq[w];
  };
  for (const auto& d : store.documents) add(d.title);
  for (const auto& p : store.passages) add(p.text);
  for (const auto& t : extra_texts) add(t);

  std::vector<std::pair<std::string, std::size_t>> entries(freq.begin(),
                                                           freq.end());
  std::stable_sort(entries.begin(), entries.end(),
                   [](const auto& a, const auto& b) {
                     return a.second > b.second;  // lexicographic ties kept
                   });

  WordTokenizer tok;
  for (const char* s : kSpecialNames) {
    tok.ids_[s] = static_cast<TokenId>(tok.tokens_.size());
    tok.tokens_.emplace_back(s);
  }
  for (const auto& [word, _] : entries) {
    if (tok.ids_.count(word)) continue;  // literal special in the text
    tok.ids_[word] = static_cast<TokenId>(tok.tokens_.size());
    tok.tokens_.push_back(word);
  }
  return tok;
}

void WordTokenizer::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write vocab file: " + path);
  for (std::size_t i = 0; i < tokens_.size(); ++i)
    out << tokens_[i] << '\t' << i << '\n';
}

WordTokenizer WordTokenizer::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read vocab file: " + path);
  WordTokenizer tok;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error("malformed vocab line: " + line);
    std::string word = line.substr(0, tab);
    TokenId id = static_cast<TokenId>(std::stoul(line.substr(tab + 1)));
    if (id != tok.tokens_.size())
      throw std::runtime_error("vocab ids not dense at id " +
                               std::to_string(id));
    tok.ids_[word] = id;
    tok.tokens_.push_back(std::move(word));
  }
  for (TokenId i = 0; i < kNumSpecials; ++i)
    if (tok.tokens_.size() <= i || tok.tokens_[i] != kSpecialNames[i])
      throw std::runtime_error("vocab file missing special tokens");
  return tok;
}

}  // namespace selfret
