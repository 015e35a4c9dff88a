#include "selfret/lm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace selfret {

NGramLM::NGramLM(std::size_t vocab_size, int order, double k)
    : vocab_size_(vocab_size), order_(order), k_(k) {
  if (order < 1) throw std::invalid_argument("n-gram order must be >= 1");
  if (k <= 0.0) throw std::invalid_argument("smoothing k must be > 0");
}

TokenSeq NGramLM::context_key(std::span<const TokenId> context) const {
  std::size_t want = static_cast<std::size_t>(order_ - 1);
  TokenSeq key;
  key.reserve(want);
  if (context.size() >= want) {
    key.assign(context.end() - want, context.end());
  } else {
    key.assign(want - context.size(), kBos);  // BOS padding for short contexts
    key.insert(key.end(), context.begin(), context.end());
  }
  return key;
}

void NGramLM::observe(std::span<const TokenId> tokens) {
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    TokenSeq key = context_key(tokens.subspan(0, i));
    ++counts_[key][tokens[i]];
    ++totals_[key];
  }
}

std::vector<double> NGramLM::next_logprobs(
    std::span<const TokenId> context) const {
  TokenSeq key = context_key(context);
  const double v = static_cast<double>(vocab_size_);
  auto tot = totals_.find(key);
  double denom = (tot == totals_.end() ? 0.0 : static_cast<double>(tot->second)) +
                 k_ * v;
  std::vector<double> out(vocab_size_, std::log(k_ / denom));
  if (tot != totals_.end()) {
    for (const auto& [tokid, c] : counts_.at(key))
      out[tokid] = std::log((static_cast<double>(c) + k_) / denom);
  }
  return out;
}

NGramLM train_ngram(const std::vector<std::string>& texts, const Tokenizer& tok,
                    int n, double k) {
  if (texts.empty()) throw std::invalid_argument("train_ngram: no texts");
  NGramLM lm(tok.vocab_size(), n, k);
  for (const auto& text : texts) {
    TokenSeq ids = tok.encode(text);
    ids.push_back(kEos);
    lm.observe(ids);
  }
  return lm;
}

double sequence_logprob(const LanguageModel& lm,
                        std::span<const TokenId> context,
                        std::span<const TokenId> continuation,
                        const TokenTrie* constraint,
                        std::span<const TokenId> anchor) {
  TokenSeq ctx(context.begin(), context.end());
  TokenTrie::NodeRef node = TokenTrie::kRoot;
  if (constraint) {
    auto at = constraint->walk(anchor);
    if (!at) throw std::runtime_error("sequence_logprob: anchor not in trie");
    node = *at;
  }
  double total = 0.0;
  for (TokenId tok : continuation) {
    if (constraint) {
      auto allowed = constraint->children_tokens(node);
      if (std::find(allowed.begin(), allowed.end(), tok) == allowed.end())
        throw std::runtime_error("sequence_logprob: constraint violation");
      if (allowed.size() == 1) {
        // renormalization over a singleton forces probability 1
        node = *constraint->child(node, tok);
        ctx.push_back(tok);
        continue;
      }
      std::vector<double> lp = lm.next_logprobs(ctx);
      double mx = -std::numeric_limits<double>::infinity();
      for (TokenId a : allowed) mx = std::max(mx, lp[a]);
      double lse = 0.0;
      for (TokenId a : allowed) lse += std::exp(lp[a] - mx);
      total += lp[tok] - (mx + std::log(lse));
      node = *constraint->child(node, tok);
    } else {
      std::vector<double> lp = lm.next_logprobs(ctx);
      if (tok >= lp.size())
        throw std::runtime_error("sequence_logprob: token out of range");
      total += lp[tok];
    }
    ctx.push_back(tok);
  }
  return total;
}

void NGramLM::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write lm file: " + path);
  const char magic[4] = {'S', 'R', 'N', 'G'};
  out.write(magic, 4);
  std::uint32_t version = 1;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  std::uint64_t vs = vocab_size_;
  out.write(reinterpret_cast<const char*>(&vs), sizeof(vs));
  std::int32_t ord = order_;
  out.write(reinterpret_cast<const char*>(&ord), sizeof(ord));
  out.write(reinterpret_cast<const char*>(&k_), sizeof(k_));

  // Deterministic dump: contexts sorted lexicographically.
  std::vector<const TokenSeq*> keys;
  keys.reserve(counts_.size());
  for (const auto& [key, _] : counts_) keys.push_back(&key);
  std::sort(keys.begin(), keys.end(),
            [](const TokenSeq* a, const TokenSeq* b) { return *a < *b; });
  std::uint64_t n = keys.size();
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  for (const TokenSeq* key : keys) {
    std::uint32_t klen = static_cast<std::uint32_t>(key->size());
    out.write(reinterpret_cast<const char*>(&klen), sizeof(klen));
    out.write(reinterpret_cast<const char*>(key->data()),
              klen * sizeof(TokenId));
    const auto& row = counts_.at(*key);
    std::vector<std::pair<TokenId, std::uint64_t>> cells(row.begin(), row.end());
    std::sort(cells.begin(), cells.end());
    std::uint32_t rlen = static_cast<std::uint32_t>(cells.size());
    out.write(reinterpret_cast<const char*>(&rlen), sizeof(rlen));
    for (const auto& [tokid, c] : cells) {
      out.write(reinterpret_cast<const char*>(&tokid), sizeof(tokid));
      out.write(reinterpret_cast<const char*>(&c), sizeof(c));
    }
  }
}

NGramLM NGramLM::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read lm file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "SRNG")
    throw std::runtime_error("bad lm file magic");
  std::uint32_t version;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (version != 1) throw std::runtime_error("unsupported lm format version");
  std::uint64_t vs;
  std::int32_t ord;
  double k;
  in.read(reinterpret_cast<char*>(&vs), sizeof(vs));
  in.read(reinterpret_cast<char*>(&ord), sizeof(ord));
  in.read(reinterpret_cast<char*>(&k), sizeof(k));
  NGramLM lm(vs, ord, k);
  std::uint64_t n;
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  for (std::uint64_t i = 0; i < n; ++i) {
    std::uint32_t klen;
    in.read(reinterpret_cast<char*>(&klen), sizeof(klen));
    TokenSeq key(klen);
    in.read(reinterpret_cast<char*>(key.data()), klen * sizeof(TokenId));
    std::uint32_t rlen;
    in.read(reinterpret_cast<char*>(&rlen), sizeof(rlen));
    std::uint64_t total = 0;
    for (std::uint32_t j = 0; j < rlen; ++j) {
      TokenId tokid;
      std::uint64_t c;
      in.read(reinterpret_cast<char*>(&tokid), sizeof(tokid));
      in.read(reinterpret_cast<char*>(&c), sizeof(c));
      lm.counts_[key][tokid] = c;
      total += c;
    }
    lm.totals_[key] = total;
    if (!in) throw std::runtime_error("truncated lm file");
  }
  return lm;
}

}  // namespace selfret
