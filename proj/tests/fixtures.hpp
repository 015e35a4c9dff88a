#pragma once

#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "selfret/corpus.hpp"
#include "selfret/lm.hpp"
#include "selfret/tokenizer.hpp"
#include "selfret/trie.hpp"

namespace selfret::testing {

// The 3-document desk corpus used across the tests.
inline std::string f1_jsonl() {
  return
      R"({"doc_id":"d1","title":"apple pie","text":"apple pie is sweet. apple pie uses flour."})"
      "\n"
      R"({"doc_id":"d2","title":"apple tree","text":"apple tree grows tall."})"
      "\n"
      R"({"doc_id":"d3","title":"banana bread","text":"banana bread is moist."})"
      "\n";
}

inline CorpusStore f1_store(int max_words = 200) {
  std::istringstream in(f1_jsonl());
  return ingest_corpus(in, max_words);
}

class UniformLM final : public LanguageModel {
 public:
  explicit UniformLM(std::size_t vocab) : vocab_(vocab) {}
  std::size_t vocab_size() const override { return vocab_; }
  std::vector<double> next_logprobs(
      std::span<const TokenId>) const override {
    return std::vector<double>(vocab_,
                               -std::log(static_cast<double>(vocab_)));
  }

 private:
  std::size_t vocab_;
};

// Always continues with a fixed token sequence, then EOS.
class ScriptedLM final : public LanguageModel {
 public:
  ScriptedLM(std::size_t vocab, TokenSeq script, std::size_t prompt_len)
      : vocab_(vocab), script_(std::move(script)), prompt_len_(prompt_len) {}
  std::size_t vocab_size() const override { return vocab_; }
  std::vector<double> next_logprobs(
      std::span<const TokenId> context) const override {
    std::vector<double> lp(vocab_, std::log(0.01 / (vocab_ - 1)));
    std::size_t pos = context.size() >= prompt_len_
                          ? context.size() - prompt_len_
                          : 0;
    TokenId target = pos < script_.size() ? script_[pos] : kEos;
    lp[target] = std::log(0.99);
    return lp;
  }

 private:
  std::size_t vocab_;
  TokenSeq script_;
  std::size_t prompt_len_;
};

// Random synthetic corpus: n_docs documents with distinct titles and a few
// sentences each, drawn from a small word alphabet.
inline std::string synthetic_jsonl(int n_docs, std::mt19937_64& rng,
                                   int vocab_words = 50,
                                   int sentences_min = 1,
                                   int sentences_max = 4,
                                   int words_per_sentence = 6) {
  std::ostringstream out;
  // Capitalized words so ". " boundaries register as sentence breaks.
  auto word = [&](std::uint64_t i) { return "W" + std::to_string(i); };
  for (int d = 0; d < n_docs; ++d) {
    std::string title = "T" + std::to_string(d) + " " + word(rng() % vocab_words);
    std::string text;
    int n_sent = sentences_min +
                 static_cast<int>(rng() % (sentences_max - sentences_min + 1));
    for (int s = 0; s < n_sent; ++s) {
      if (!text.empty()) text += " ";
      for (int w = 0; w < words_per_sentence; ++w)
        text += (w ? " " : "") + word(rng() % vocab_words);
      text += ".";
    }
    out << R"({"doc_id":"doc)" << d << R"(","title":")" << title
        << R"(","text":")" << text << R"("})" << "\n";
  }
  return out.str();
}

}  // namespace selfret::testing
