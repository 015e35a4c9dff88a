#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "selfret/corpus.hpp"
#include "selfret/tokenizer.hpp"
#include "selfret/types.hpp"

namespace selfret {

// Prefix tree over EOS-terminated token sequences. Each root-to-leaf path is
// one stored sequence; every node tracks how many leaves sit below it, which
// drives both allowed-next lookups and unique-completion early termination.
class TokenTrie {
 public:
  using NodeRef = std::uint32_t;
  static constexpr NodeRef kRoot = 0;

  TokenTrie() { nodes_.emplace_back(); }

  // Stores seq + EOS. Duplicate sequences keep the first leaf_id.
  void insert(std::span<const TokenId> seq, const std::string& leaf_id);

  std::size_t leaf_count() const { return nodes_[kRoot].subtree_leaves; }
  bool empty() const { return leaf_count() == 0; }

  // Node-level API used by the decoder.
  std::optional<NodeRef> child(NodeRef node, TokenId tok) const;
  std::vector<TokenId> children_tokens(NodeRef node) const;  // sorted
  std::uint32_t subtree_leaves(NodeRef node) const {
    return nodes_[node].subtree_leaves;
  }
  // Leaf id when `node` terminates a stored sequence (reached via EOS).
  const std::string* leaf_at(NodeRef node) const;

  // Walks a prefix from the root; nullopt when the path leaves the trie.
  std::optional<NodeRef> walk(std::span<const TokenId> prefix) const;

  // Child tokens of the prefix node; EOS appears when a sequence ends here.
  // Throws when prefix is not a valid path.
  std::vector<TokenId> allowed_next(std::span<const TokenId> prefix) const;

  // When exactly one leaf remains below the prefix, the forced remainder
  // (EOS excluded) and its leaf id.
  std::optional<std::pair<TokenSeq, std::string>> unique_completion(
      std::span<const TokenId> prefix) const;
  std::optional<std::pair<TokenSeq, std::string>> unique_completion_from(
      NodeRef node) const;

  // Some(leaf_id) iff the sequence is stored exactly.
  std::optional<std::string> lookup(std::span<const TokenId> seq) const;

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t max_depth() const;
  std::size_t memory_bytes() const;  // resident-size estimate

  void serialize(std::ostream& out) const;
  static TokenTrie deserialize(std::istream& in);

 private:
  static constexpr std::size_t kHashThreshold = 16;

  struct Node {
    // Child storage: sorted vector up to kHashThreshold children, then a
    // hash map. First child kept inline since most nodes have exactly one.
    TokenId first_tok = 0;
    NodeRef first_child = 0;  // 0 (root) means "no inline child"
    std::unique_ptr<std::vector<std::pair<TokenId, NodeRef>>> vec;
    std::unique_ptr<std::unordered_map<TokenId, NodeRef>> map;
    std::uint32_t subtree_leaves = 0;
    std::int32_t leaf = -1;  // index into leaf_ids_ for EOS nodes
  };

  NodeRef find_or_add_child(NodeRef node, TokenId tok, bool& added);

  std::vector<Node> nodes_;
  std::vector<std::string> leaf_ids_;
};

struct TrieStats {
  std::size_t node_count = 0;
  std::size_t leaf_count = 0;
  std::size_t max_depth = 0;
  std::size_t memory_bytes = 0;
};

// Two-stage index: one trie over all titles, one passage trie per document.
struct TrieIndex {
  TokenTrie title_trie;
  std::map<std::string, TokenTrie> passage_tries;  // doc_id -> trie

  const TokenTrie& passages_of(const std::string& doc_id) const;

  void save(const std::string& path) const;
  static TrieIndex load(const std::string& path);
};

// Throws if any title/passage encoding contains UNK (vocabulary bug).
TrieIndex build_index(const CorpusStore& store, const Tokenizer& tok);

TrieStats trie_stats(const TokenTrie& trie);
TrieStats trie_stats(const TrieIndex& index);  // aggregated over all tries

}  // namespace selfret
