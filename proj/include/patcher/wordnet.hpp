#pragma once

// Reader for the WordNet noun database (WNDB index.noun / data.noun) and
// the hyponym tree built from it.

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "patcher/error.hpp"
#include "patcher/text.hpp"

namespace patcher {

struct Synset {
  std::string offset;
  std::vector<std::string> words;  // underscores already replaced by spaces
  std::vector<std::string> hyponyms;  // offsets, in file order
};

class WordNet {
 public:
  static WordNet load(const std::string& dir) {
    WordNet wn;
    wn.load_index(dir + "/index.noun");
    wn.load_data(dir + "/data.noun");
    return wn;
  }

  /// Noun synset offsets of `lemma`, most frequent sense first.
  const std::vector<std::string>* senses(std::string_view lemma) const {
    auto it = index_.find(normalize(lemma));
    return it == index_.end() ? nullptr : &it->second;
  }

  const Synset* synset(const std::string& offset) const {
    auto it = data_.find(offset);
    return it == data_.end() ? nullptr : &it->second;
  }

  size_t synset_count() const { return data_.size(); }

  static std::string normalize(std::string_view lemma) {
    std::string s = to_lower(trim(lemma));
    for (auto& c : s)
      if (c == ' ') c = '_';
    return s;
  }

 private:
  static std::string display(std::string word) {
    for (auto& c : word)
      if (c == '_') c = ' ';
    // Adjective markers such as "(p)" are not part of the lemma.
    if (auto paren = word.find('('); paren != std::string::npos) word = word.substr(0, paren);
    return word;
  }

  void load_index(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::WordNetUnreadable, "cannot read " + path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == ' ') continue;  // license header
      std::istringstream ls(line);
      std::string lemma, pos;
      size_t synset_cnt = 0, p_cnt = 0;
      if (!(ls >> lemma >> pos >> synset_cnt >> p_cnt))
        throw Error(ErrorCode::WordNetUnreadable, path + ": malformed line: " + line);
      std::string tok;
      for (size_t i = 0; i < p_cnt; ++i) ls >> tok;
      size_t sense_cnt = 0, tagsense_cnt = 0;
      ls >> sense_cnt >> tagsense_cnt;
      std::vector<std::string> offsets;
      for (size_t i = 0; i < synset_cnt && (ls >> tok); ++i) offsets.push_back(tok);
      if (offsets.size() != synset_cnt)
        throw Error(ErrorCode::WordNetUnreadable, path + ": truncated line: " + line);
      index_[lemma] = std::move(offsets);
    }
  }

  void load_data(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::WordNetUnreadable, "cannot read " + path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == ' ') continue;
      auto bar = line.find(" | ");
      std::istringstream ls(line.substr(0, bar));
      Synset s;
      std::string lex_filenum, ss_type, w_cnt_hex;
      if (!(ls >> s.offset >> lex_filenum >> ss_type >> w_cnt_hex))
        throw Error(ErrorCode::WordNetUnreadable, path + ": malformed line at " + s.offset);
      size_t w_cnt = std::stoul(w_cnt_hex, nullptr, 16);
      for (size_t i = 0; i < w_cnt; ++i) {
        std::string word, lex_id;
        if (!(ls >> word >> lex_id))
          throw Error(ErrorCode::WordNetUnreadable, path + ": truncated words at " + s.offset);
        s.words.push_back(display(word));
      }
      size_t p_cnt = 0;
      ls >> p_cnt;
      for (size_t i = 0; i < p_cnt; ++i) {
        std::string symbol, target, pos, source_target;
        if (!(ls >> symbol >> target >> pos >> source_target))
          throw Error(ErrorCode::WordNetUnreadable, path + ": truncated pointers at " + s.offset);
        if ((symbol == "~" || symbol == "~i") && pos == "n") s.hyponyms.push_back(target);
      }
      data_[s.offset] = std::move(s);
    }
  }

  std::unordered_map<std::string, std::vector<std::string>> index_;
  std::unordered_map<std::string, Synset> data_;
};

using NodeId = size_t;

struct HyponymNode {
  std::string lemma;
  std::string synset_id;
  int depth = 0;
  std::optional<NodeId> parent;
  std::vector<NodeId> children;
  std::optional<double> sim_to_root;
  bool pruned = false;
};

/// Tree stored as an arena; node 0 is the root.
struct HyponymTree {
  std::vector<HyponymNode> nodes;

  static constexpr NodeId kRoot = 0;

  const HyponymNode& root() const { return nodes.at(kRoot); }
  const HyponymNode& operator[](NodeId id) const { return nodes.at(id); }
  HyponymNode& operator[](NodeId id) { return nodes.at(id); }
  size_t size() const { return nodes.size(); }

  NodeId add(HyponymNode n) {
    NodeId id = nodes.size();
    if (n.parent) nodes.at(*n.parent).children.push_back(id);
    nodes.push_back(std::move(n));
    return id;
  }

  /// Same-parent nodes other than `id`, in the parent's child order.
  std::vector<NodeId> siblings(NodeId id) const {
    std::vector<NodeId> out;
    const auto& n = nodes.at(id);
    if (!n.parent) return out;
    for (NodeId c : nodes.at(*n.parent).children)
      if (c != id) out.push_back(c);
    return out;
  }

  size_t unpruned_non_root() const {
    size_t n = 0;
    for (size_t i = 1; i < nodes.size(); ++i) n += nodes[i].pruned ? 0 : 1;
    return n;
  }

  std::optional<NodeId> find(std::string_view lemma) const {
    for (NodeId i = 0; i < nodes.size(); ++i)
      if (nodes[i].lemma == lemma) return i;
    return std::nullopt;
  }

  std::vector<std::string> violations() const {
    std::vector<std::string> v;
    if (nodes.empty()) return {"empty tree"};
    if (nodes[0].parent) v.push_back("root has a parent");
    for (NodeId i = 0; i < nodes.size(); ++i) {
      for (NodeId c : nodes[i].children) {
        if (nodes[c].depth != nodes[i].depth + 1) v.push_back("depth mismatch at " + nodes[c].lemma);
        if (nodes[c].parent != i) v.push_back("parent link mismatch at " + nodes[c].lemma);
        if (nodes[i].pruned && !nodes[c].pruned) v.push_back("pruned node has live child " + nodes[c].lemma);
      }
    }
    return v;
  }
};

/// All hyponyms of the first noun sense of `lemma`, down to `max_depth`.
inline HyponymTree build_hyponym_tree(const WordNet& wn, std::string_view lemma, int max_depth) {
  const auto* senses = wn.senses(lemma);
  if (!senses || senses->empty())
    throw Error(ErrorCode::LemmaNotFound, std::string(lemma) + " has no noun synset");
  const Synset* root_ss = wn.synset(senses->front());
  if (!root_ss)
    throw Error(ErrorCode::WordNetUnreadable, "index points at missing synset " + senses->front());

  HyponymTree tree;
  tree.add(HyponymNode{to_lower(trim(lemma)), root_ss->offset, 0, std::nullopt, {}, std::nullopt, false});
  // Depth-first with an on-path guard; WordNet is a DAG, so a synset may
  // legitimately appear under several parents.
  std::vector<std::string> path{root_ss->offset};
  auto expand = [&](auto&& self, NodeId at, const Synset& ss) -> void {
    if (tree[at].depth >= max_depth) return;
    for (const auto& off : ss.hyponyms) {
      const Synset* child = wn.synset(off);
      if (!child || child->words.empty()) continue;
      if (std::find(path.begin(), path.end(), off) != path.end()) continue;
      NodeId id = tree.add(HyponymNode{child->words.front(), child->offset, tree[at].depth + 1, at, {},
                                       std::nullopt, false});
      path.push_back(off);
      self(self, id, *child);
      path.pop_back();
    }
  };
  expand(expand, HyponymTree::kRoot, *root_ss);
  return tree;
}

inline HyponymTree build_hyponym_tree(std::string_view lemma, const std::string& wordnet_dir,
                                      int max_depth) {
  return build_hyponym_tree(WordNet::load(wordnet_dir), lemma, max_depth);
}

}  // namespace patcher
