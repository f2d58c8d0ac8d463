#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mca/common.hpp"

namespace mca {

// Rooted single-parent hypernym forest over a word list. Root is the literal
// parent name "ROOT" at depth 0. Words with no edge are kept as orphans with
// unknown depth so later filtering never drops them silently.
struct TaxonomyTree {
  static constexpr std::uint32_t kOrphanDepth = std::numeric_limits<std::uint32_t>::max();

  std::vector<std::string> words;                    // vocabulary order
  std::unordered_map<std::string, int> word_index;   // word -> position
  std::vector<int> parent;                           // -1 = ROOT, -2 = orphan
  std::vector<std::uint32_t> depth;                  // kOrphanDepth for orphans

  bool is_orphan(std::size_t i) const { return depth[i] == kOrphanDepth; }

  std::uint32_t max_depth() const {
    std::uint32_t mx = 0;
    for (std::uint32_t v : depth)
      if (v != kOrphanDepth) mx = std::max(mx, v);
    return mx;
  }
};

inline constexpr const char* kTaxonomyRoot = "ROOT";

// Builds the forest from (child, parent) pairs over the given vocabulary.
// Every endpoint must be a vocabulary word or ROOT; a child may have only one
// parent; cycles and unrooted chains are rejected.
inline TaxonomyTree build_taxonomy(
    const std::vector<std::pair<std::string, std::string>>& edges,
    const std::vector<std::string>& words) {
  TaxonomyTree t;
  t.words = words;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (!t.word_index.emplace(words[i], static_cast<int>(i)).second)
      throw DataError("duplicate vocabulary word: " + words[i]);
  }
  t.parent.assign(words.size(), -2);
  t.depth.assign(words.size(), TaxonomyTree::kOrphanDepth);

  for (const auto& [child, parent_word] : edges) {
    auto ci = t.word_index.find(child);
    if (ci == t.word_index.end())
      throw DataError("taxonomy edge references unknown word: " + child);
    int pidx = -1;
    if (parent_word != kTaxonomyRoot) {
      auto pi = t.word_index.find(parent_word);
      if (pi == t.word_index.end())
        throw DataError("taxonomy edge references unknown word: " + parent_word);
      pidx = pi->second;
    }
    if (t.parent[ci->second] != -2)
      throw DataError("duplicate parent for word: " + child);
    t.parent[ci->second] = pidx;
  }

  // Resolve depths by walking parent links; a walk that revisits a node is a
  // cycle, a walk that ends at a parentless non-root node marks the whole
  // chain as orphan.
  std::vector<int> state(words.size(), 0);  // 0 unvisited, 1 on path, 2 done
  std::vector<int> path;
  for (std::size_t start = 0; start < words.size(); ++start) {
    if (state[start] == 2) continue;
    path.clear();
    int cur = static_cast<int>(start);
    std::uint32_t base = 0;
    bool rooted = false;
    while (true) {
      if (state[cur] == 1) throw DataError("taxonomy cycle through word: " + words[cur]);
      if (state[cur] == 2) {
        base = t.depth[cur];
        rooted = !t.is_orphan(cur);
        break;
      }
      state[cur] = 1;
      path.push_back(cur);
      if (t.parent[cur] == -1) {
        base = 0;
        rooted = true;
        break;
      }
      if (t.parent[cur] == -2) {
        rooted = false;
        break;
      }
      cur = t.parent[cur];
    }
    // Deepest path entry sits directly under the resolved ancestor.
    for (std::size_t k = path.size(); k-- > 0;) {
      const int node = path[k];
      state[node] = 2;
      if (rooted) {
        base += 1;
        t.depth[node] = base;
      } else {
        t.depth[node] = TaxonomyTree::kOrphanDepth;
        t.parent[node] = -2;
      }
    }
  }
  return t;
}

// Parses UTF-8 lines "child<TAB>parent"; blank lines and #-comments skipped.
inline TaxonomyTree load_taxonomy(const std::filesystem::path& path,
                                  const std::vector<std::string>& words) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open taxonomy file: " + path.string());
  std::vector<std::pair<std::string, std::string>> edges;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size())
      throw DataError("malformed taxonomy line " + std::to_string(lineno) + " in " +
                      path.string());
    edges.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return build_taxonomy(edges, words);
}

inline void save_taxonomy(const std::vector<std::pair<std::string, std::string>>& edges,
                          const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write taxonomy file: " + path.string());
  for (const auto& [child, parent] : edges) os << child << '\t' << parent << '\n';
}

}  // namespace mca
