#include "selfret/trie.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace selfret {

namespace {

constexpr char kMagic[4] = {'S', 'R', 'T', 'I'};
constexpr std::uint32_t kFormatVersion = 1;

// Streaming FNV-1a over serialized payload bytes.
struct Checksum {
  std::uint64_t state = 1469598103934665603ull;
  void feed(const char* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      state ^= static_cast<unsigned char>(data[i]);
      state *= 1099511628211ull;
    }
  }
};

struct Writer {
  std::ostream& out;
  Checksum sum;
  void bytes(const char* data, std::size_t n) {
    out.write(data, static_cast<std::streamsize>(n));
    sum.feed(data, n);
  }
  template <typename T>
  void pod(T v) {
    bytes(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void str(const std::string& s) {
    pod(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
};

struct Reader {
  std::istream& in;
  Checksum sum;
  void bytes(char* data, std::size_t n) {
    in.read(data, static_cast<std::streamsize>(n));
    if (!in) throw std::runtime_error("truncated trie file");
    sum.feed(data, n);
  }
  template <typename T>
  T pod() {
    T v;
    bytes(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
  }
  std::string str() {
    auto n = pod<std::uint32_t>();
    std::string s(n, '\0');
    if (n) bytes(s.data(), n);
    return s;
  }
};

}  // namespace

TokenTrie::NodeRef TokenTrie::find_or_add_child(NodeRef node, TokenId tok,
                                                bool& added) {
  added = false;
  Node& n = nodes_[node];
  if (n.map) {
    auto it = n.map->find(tok);
    if (it != n.map->end()) return it->second;
  } else if (n.vec) {
    auto it = std::lower_bound(
        n.vec->begin(), n.vec->end(), tok,
        [](const auto& p, TokenId t) { return p.first < t; });
    if (it != n.vec->end() && it->first == tok) return it->second;
  } else if (n.first_child != kRoot) {
    if (n.first_tok == tok) return n.first_child;
  }

  NodeRef fresh = static_cast<NodeRef>(nodes_.size());
  nodes_.emplace_back();
  Node& parent = nodes_[node];  // re-fetch, emplace_back may reallocate
  added = true;
  if (parent.map) {
    (*parent.map)[tok] = fresh;
  } else if (parent.vec) {
    auto it = std::lower_bound(
        parent.vec->begin(), parent.vec->end(), tok,
        [](const auto& p, TokenId t) { return p.first < t; });
    parent.vec->insert(it, {tok, fresh});
    if (parent.vec->size() > kHashThreshold) {
      parent.map = std::make_unique<std::unordered_map<TokenId, NodeRef>>(
          parent.vec->begin(), parent.vec->end());
      parent.vec.reset();
    }
  } else if (parent.first_child == kRoot) {
    parent.first_tok = tok;
    parent.first_child = fresh;
  } else {
    parent.vec = std::make_unique<std::vector<std::pair<TokenId, NodeRef>>>();
    parent.vec->push_back({parent.first_tok, parent.first_child});
    parent.vec->push_back({tok, fresh});
    std::sort(parent.vec->begin(), parent.vec->end());
    parent.first_child = kRoot;
  }
  return fresh;
}

void TokenTrie::insert(std::span<const TokenId> seq, const std::string& leaf_id) {
  // First pass: walk/extend without counting, so duplicates leave counts alone.
  std::vector<NodeRef> path;
  path.reserve(seq.size() + 2);
  path.push_back(kRoot);
  NodeRef cur = kRoot;
  bool any_added = false;
  for (std::size_t i = 0; i <= seq.size(); ++i) {
    TokenId tok = (i < seq.size()) ? seq[i] : kEos;
    bool added = false;
    cur = find_or_add_child(cur, tok, added);
    any_added = any_added || added;
    path.push_back(cur);
  }
  Node& end = nodes_[cur];
  if (end.leaf >= 0) return;  // duplicate sequence, keep first leaf_id
  (void)any_added;
  end.leaf = static_cast<std::int32_t>(leaf_ids_.size());
  leaf_ids_.push_back(leaf_id);
  for (NodeRef n : path) ++nodes_[n].subtree_leaves;
}

std::optional<TokenTrie::NodeRef> TokenTrie::child(NodeRef node,
                                                  TokenId tok) const {
  const Node& n = nodes_[node];
  if (n.map) {
    auto it = n.map->find(tok);
    if (it != n.map->end()) return it->second;
    return std::nullopt;
  }
  if (n.vec) {
    auto it = std::lower_bound(
        n.vec->begin(), n.vec->end(), tok,
        [](const auto& p, TokenId t) { return p.first < t; });
    if (it != n.vec->end() && it->first == tok) return it->second;
    return std::nullopt;
  }
  if (n.first_child != kRoot && n.first_tok == tok) return n.first_child;
  return std::nullopt;
}

std::vector<TokenId> TokenTrie::children_tokens(NodeRef node) const {
  const Node& n = nodes_[node];
  std::vector<TokenId> out;
  if (n.map) {
    out.reserve(n.map->size());
    for (const auto& [tok, _] : *n.map) out.push_back(tok);
    std::sort(out.begin(), out.end());
  } else if (n.vec) {
    out.reserve(n.vec->size());
    for (const auto& [tok, _] : *n.vec) out.push_back(tok);
  } else if (n.first_child != kRoot) {
    out.push_back(n.first_tok);
  }
  return out;
}

const std::string* TokenTrie::leaf_at(NodeRef node) const {
  const Node& n = nodes_[node];
  return n.leaf >= 0 ? &leaf_ids_[static_cast<std::size_t>(n.leaf)] : nullptr;
}

std::optional<TokenTrie::NodeRef> TokenTrie::walk(
    std::span<const TokenId> prefix) const {
  NodeRef cur = kRoot;
  for (TokenId tok : prefix) {
    auto next = child(cur, tok);
    if (!next) return std::nullopt;
    cur = *next;
  }
  return cur;
}

std::vector<TokenId> TokenTrie::allowed_next(
    std::span<const TokenId> prefix) const {
  auto node = walk(prefix);
  if (!node) throw std::runtime_error("allowed_next: prefix not in trie");
  return children_tokens(*node);
}

std::optional<std::pair<TokenSeq, std::string>> TokenTrie::unique_completion_from(
    NodeRef node) const {
  if (nodes_[node].subtree_leaves != 1) return std::nullopt;
  TokenSeq remaining;
  NodeRef cur = node;
  while (true) {
    if (const std::string* leaf = leaf_at(cur))
      return std::make_pair(std::move(remaining), *leaf);
    auto toks = children_tokens(cur);
    // subtree_leaves == 1 forces a single-child chain down to the leaf
    cur = *child(cur, toks.front());
    if (toks.front() != kEos) remaining.push_back(toks.front());
  }
}

std::optional<std::pair<TokenSeq, std::string>> TokenTrie::unique_completion(
    std::span<const TokenId> prefix) const {
  auto node = walk(prefix);
  if (!node) throw std::runtime_error("unique_completion: prefix not in trie");
  return unique_completion_from(*node);
}

std::optional<std::string> TokenTrie::lookup(
    std::span<const TokenId> seq) const {
  auto node = walk(seq);
  if (!node) return std::nullopt;
  auto end = child(*node, kEos);
  if (!end) return std::nullopt;
  const std::string* leaf = leaf_at(*end);
  return leaf ? std::optional<std::string>(*leaf) : std::nullopt;
}

std::size_t TokenTrie::max_depth() const {
  // Iterative DFS over (node, depth).
  std::size_t best = 0;
  std::vector<std::pair<NodeRef, std::size_t>> stack{{kRoot, 0}};
  while (!stack.empty()) {
    auto [node, depth] = stack.back();
    stack.pop_back();
    best = std::max(best, depth);
    for (TokenId tok : children_tokens(node))
      stack.push_back({*child(node, tok), depth + 1});
  }
  return best;
}

std::size_t TokenTrie::memory_bytes() const {
  std::size_t total = nodes_.capacity() * sizeof(Node);
  for (const auto& n : nodes_) {
    if (n.vec) total += sizeof(*n.vec) + n.vec->capacity() * sizeof((*n.vec)[0]);
    if (n.map)
      total += sizeof(*n.map) +
               n.map->bucket_count() * sizeof(void*) +
               n.map->size() * (sizeof(std::pair<TokenId, NodeRef>) + 2 * sizeof(void*));
  }
  for (const auto& id : leaf_ids_) total += sizeof(std::string) + id.capacity();
  return total;
}

void TokenTrie::serialize(std::ostream& out) const {
  Writer w{out};
  out.write(kMagic, 4);
  std::uint32_t version = kFormatVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));

  w.pod<std::uint64_t>(leaf_ids_.size());
  for (const auto& id : leaf_ids_) w.str(id);
  w.pod<std::uint64_t>(nodes_.size());

  // Preorder: each node emits (leaf, subtree_leaves, child count, tokens),
  // then its subtrees in sorted-token order. Child refs are implicit.
  std::vector<NodeRef> stack{kRoot};
  while (!stack.empty()) {
    NodeRef node = stack.back();
    stack.pop_back();
    const Node& n = nodes_[node];
    w.pod<std::int32_t>(n.leaf);
    w.pod<std::uint32_t>(n.subtree_leaves);
    auto toks = children_tokens(node);
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(toks.size()));
    for (TokenId t : toks) w.pod<std::uint32_t>(t);
    for (auto it = toks.rbegin(); it != toks.rend(); ++it)
      stack.push_back(*child(node, *it));
  }
  w.pod<std::uint64_t>(0);  // reserved
  std::uint64_t sum = w.sum.state;
  out.write(reinterpret_cast<const char*>(&sum), sizeof(sum));
}

TokenTrie TokenTrie::deserialize(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("bad trie file magic");
  std::uint32_t version;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (!in || version != kFormatVersion)
    throw std::runtime_error("unsupported trie format version");

  Reader r{in};
  TokenTrie trie;
  auto n_leaves = r.pod<std::uint64_t>();
  trie.leaf_ids_.reserve(n_leaves);
  for (std::uint64_t i = 0; i < n_leaves; ++i) trie.leaf_ids_.push_back(r.str());
  auto n_nodes = r.pod<std::uint64_t>();
  trie.nodes_.clear();
  trie.nodes_.reserve(n_nodes);

  struct Pending {
    NodeRef parent;
    TokenId tok;
  };
  std::vector<Pending> stack{{kRoot, 0}};  // sentinel for the root
  bool first = true;
  while (!stack.empty()) {
    Pending p = stack.back();
    stack.pop_back();
    NodeRef idx = static_cast<NodeRef>(trie.nodes_.size());
    trie.nodes_.emplace_back();
    if (first) {
      first = false;
    } else {
      bool added = false;
      // Rebuild the child link; node already exists so wire it manually.
      Node& parent = trie.nodes_[p.parent];
      if (parent.map) {
        (*parent.map)[p.tok] = idx;
      } else if (parent.vec) {
        parent.vec->push_back({p.tok, idx});
        std::sort(parent.vec->begin(), parent.vec->end());
        if (parent.vec->size() > kHashThreshold) {
          parent.map = std::make_unique<std::unordered_map<TokenId, NodeRef>>(
              parent.vec->begin(), parent.vec->end());
          parent.vec.reset();
        }
      } else if (parent.first_child == kRoot) {
        parent.first_tok = p.tok;
        parent.first_child = idx;
      } else {
        parent.vec = std::make_unique<std::vector<std::pair<TokenId, NodeRef>>>();
        parent.vec->push_back({parent.first_tok, parent.first_child});
        parent.vec->push_back({p.tok, idx});
        std::sort(parent.vec->begin(), parent.vec->end());
        parent.first_child = kRoot;
      }
      (void)added;
    }
    Node& node = trie.nodes_[idx];
    node.leaf = r.pod<std::int32_t>();
    node.subtree_leaves = r.pod<std::uint32_t>();
    auto n_children = r.pod<std::uint32_t>();
    std::vector<TokenId> toks(n_children);
    for (auto& t : toks) t = r.pod<std::uint32_t>();
    for (auto it = toks.rbegin(); it != toks.rend(); ++it)
      stack.push_back({idx, *it});
  }
  if (trie.nodes_.size() != n_nodes)
    throw std::runtime_error("trie node count mismatch");
  auto reserved = r.pod<std::uint64_t>();
  (void)reserved;
  std::uint64_t expect = r.sum.state;
  std::uint64_t sum;
  in.read(reinterpret_cast<char*>(&sum), sizeof(sum));
  if (!in || sum != expect) throw std::runtime_error("trie checksum mismatch");
  return trie;
}

const TokenTrie& TrieIndex::passages_of(const std::string& doc_id) const {
  auto it = passage_tries.find(doc_id);
  if (it == passage_tries.end())
    throw std::runtime_error("no passage trie for doc: " + doc_id);
  return it->second;
}

void TrieIndex::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write index file: " + path);
  std::uint64_t n = passage_tries.size();
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  title_trie.serialize(out);
  for (const auto& [doc_id, trie] : passage_tries) {
    std::uint32_t len = static_cast<std::uint32_t>(doc_id.size());
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(doc_id.data(), len);
    trie.serialize(out);
  }
}

TrieIndex TrieIndex::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read index file: " + path);
  std::uint64_t n;
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  if (!in) throw std::runtime_error("truncated index file");
  TrieIndex index;
  index.title_trie = TokenTrie::deserialize(in);
  for (std::uint64_t i = 0; i < n; ++i) {
    std::uint32_t len;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    if (!in) throw std::runtime_error("truncated index file");
    std::string doc_id(len, '\0');
    in.read(doc_id.data(), len);
    index.passage_tries[doc_id] = TokenTrie::deserialize(in);
  }
  return index;
}

TrieIndex build_index(const CorpusStore& store, const Tokenizer& tok) {
  TrieIndex index;
  auto encode_checked = [&](const std::string& text, const std::string& what) {
    TokenSeq ids = tok.encode(text);
    for (TokenId id : ids)
      if (id == kUnk)
        throw std::runtime_error("UNK token while indexing " + what +
                                 ": vocabulary does not cover the corpus");
    return ids;
  };
  for (const auto& doc : store.documents) {
    index.title_trie.insert(encode_checked(doc.title, "title of " + doc.doc_id),
                            doc.doc_id);
    index.passage_tries.emplace(doc.doc_id, TokenTrie{});
  }
  for (const auto& p : store.passages)
    index.passage_tries.at(p.doc_id)
        .insert(encode_checked(p.text, p.passage_id), p.passage_id);
  return index;
}

TrieStats trie_stats(const TokenTrie& trie) {
  TrieStats s;
  s.node_count = trie.node_count();
  s.leaf_count = trie.leaf_count();
  s.max_depth = trie.max_depth();
  s.memory_bytes = trie.memory_bytes();
  return s;
}

TrieStats trie_stats(const TrieIndex& index) {
  TrieStats s = trie_stats(index.title_trie);
  for (const auto& [_, trie] : index.passage_tries) {
    TrieStats t = trie_stats(trie);
    s.node_count += t.node_count;
    s.leaf_count += t.leaf_count;
    s.max_depth = std::max(s.max_depth, t.max_depth);
    s.memory_bytes += t.memory_bytes;
  }
  return s;
}

}  // namespace selfret
