#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "mca/common.hpp"
#include "mca/embedding.hpp"
#include "mca/kmeans.hpp"
#include "mca/matrix.hpp"
#include "mca/taxonomy.hpp"

namespace mca {

// Filtered word set whose embeddings act as the text side of alignment.
struct SemanticSpace {
  std::vector<std::string> kept_words;
  std::vector<int> kept_indices;  // positions in the input vocabulary
  EmbeddingMatrix kept_embeddings;

  struct Provenance {
    double uniqueness = 0.0;
    std::uint32_t depth = TaxonomyTree::kOrphanDepth;
    bool passed_uniqueness = false;
    bool passed_hierarchy = false;
  };
  std::vector<Provenance> provenance;  // one entry per input vocabulary word

  std::size_t size() const { return kept_words.size(); }
};

struct SpaceBuildConfig {
  std::size_t c = 0;
  double rho_u = 0.0;       // uniqueness threshold
  std::size_t gamma_r = 0;  // nearest kept words per center
  std::uint32_t gamma_h = 0;  // taxonomy levels to strip (root excluded)
  std::uint64_t seed = 1;
  int kmeans_max_iter = 100;
  double kmeans_tol = 1e-6;
};

struct StageReport {
  struct Row {
    std::string stage;
    std::size_t kept = 0;
    std::size_t dropped = 0;
  };
  std::vector<Row> rows;

  void print(std::ostream& os) const {
    os << "stage, kept, dropped\n";
    for (const auto& r : rows) os << r.stage << ", " << r.kept << ", " << r.dropped << "\n";
  }
};

// Normalizes k-means centers so dot products against unit word rows are
// cosines. A center can only be zero if opposite unit vectors cancel exactly.
inline Mat normalize_centers(const Mat& centers) {
  Mat out = centers;
  for (std::size_t k = 0; k < out.rows(); ++k) {
    const double norm = l2_norm(std::span<const double>(out.row(k)));
    if (norm < 1e-12)
      throw NumericError("cluster center " + std::to_string(k) + " has zero norm");
    for (double& v : out.row(k)) v /= norm;
  }
  return out;
}

// Margin between the largest and second-largest center cosine per word.
// Stand-in discriminativeness score; swap here if another definition is
// needed. Range [0, 2].
inline std::vector<double> uniqueness_scores(const EmbeddingMatrix& vocab_embeddings,
                                             const Mat& centers) {
  if (centers.rows() < 2)
    throw DataError("uniqueness scores need at least 2 centers, got " +
                    std::to_string(centers.rows()));
  std::vector<double> scores(vocab_embeddings.n);
  for (std::size_t w = 0; w < vocab_embeddings.n; ++w) {
    double s1 = -2.0, s2 = -2.0;
    for (std::size_t k = 0; k < centers.rows(); ++k) {
      const double s = dot(std::span<const double>(centers.row(k)),
                           std::span<const float>(vocab_embeddings.row(w)));
      if (s > s1) {
        s2 = s1;
        s1 = s;
      } else if (s > s2) {
        s2 = s;
      }
    }
    scores[w] = s1 - s2;
  }
  return scores;
}

// Keeps words scoring above rho_u, then unions each center's gamma_r nearest
// kept words. Output indices are in original vocabulary order.
inline std::vector<int> uniqueness_filter(const EmbeddingMatrix& vocab_embeddings,
                                          const Mat& centers, double rho_u,
                                          std::size_t gamma_r,
                                          std::vector<double>* scores_out = nullptr) {
  if (gamma_r < 1) throw DataError("gamma_r must be >= 1");
  if (rho_u < 0.0) throw DataError("rho_u must be >= 0");
  const std::vector<double> scores = uniqueness_scores(vocab_embeddings, centers);
  if (scores_out) *scores_out = scores;

  std::vector<int> unique_words;
  for (std::size_t w = 0; w < vocab_embeddings.n; ++w)
    if (scores[w] > rho_u) unique_words.push_back(static_cast<int>(w));
  if (unique_words.empty())
    throw DataError("uniqueness filter removed every word; lower rho_u");

  std::set<int> kept;
  std::vector<std::pair<double, int>> scored;
  for (std::size_t k = 0; k < centers.rows(); ++k) {
    scored.clear();
    for (int w : unique_words) {
      const double s = dot(std::span<const double>(centers.row(k)),
                           std::span<const float>(vocab_embeddings.row(w)));
      scored.emplace_back(s, w);
    }
    const std::size_t take = std::min(gamma_r, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + take, scored.end(),
                      [](const auto& a, const auto& b) {
                        return a.first > b.first ||
                               (a.first == b.first && a.second < b.second);
                      });
    for (std::size_t r = 0; r < take; ++r) kept.insert(scored[r].second);
  }
  return {kept.begin(), kept.end()};
}

// Drops candidates whose taxonomy depth is in [1, gamma_h]; orphans and deeper
// words survive. The root itself is never a candidate.
inline std::vector<int> hierarchy_filter_indices(const std::vector<int>& candidates,
                                                 const TaxonomyTree& tree,
                                                 std::uint32_t gamma_h) {
  std::vector<int> kept;
  for (int w : candidates) {
    const std::uint32_t depth = tree.depth[w];
    if (depth == TaxonomyTree::kOrphanDepth || depth > gamma_h) kept.push_back(w);
  }
  return kept;
}

namespace detail {

inline SemanticSpace make_space(const VocabularyBundle& vocab,
                                const std::vector<int>& kept,
                                const std::vector<double>& scores,
                                const std::vector<int>& uniqueness_kept,
                                const TaxonomyTree& tree) {
  SemanticSpace space;
  space.kept_indices = kept;
  space.kept_embeddings.n = kept.size();
  space.kept_embeddings.d = vocab.embeddings.d;
  space.kept_embeddings.data.reserve(kept.size() * vocab.embeddings.d);
  for (int w : kept) {
    space.kept_words.push_back(vocab.words[w]);
    space.kept_embeddings.ids.push_back(vocab.words[w]);
    auto row = vocab.embeddings.row(w);
    space.kept_embeddings.data.insert(space.kept_embeddings.data.end(), row.begin(),
                                      row.end());
  }
  space.provenance.resize(vocab.words.size());
  for (std::size_t w = 0; w < vocab.words.size(); ++w) {
    space.provenance[w].uniqueness = scores.empty() ? 0.0 : scores[w];
    space.provenance[w].depth = tree.depth[w];
  }
  for (int w : uniqueness_kept) space.provenance[w].passed_uniqueness = true;
  for (int w : kept) space.provenance[w].passed_hierarchy = true;
  return space;
}

}  // namespace detail

// Full two-stage pipeline: k-means centers -> uniqueness filter -> hierarchy
// filter. Reports per-stage sizes.
inline SemanticSpace build_semantic_space(const EmbeddingMatrix& images,
                                          const VocabularyBundle& vocab,
                                          const SpaceBuildConfig& cfg,
                                          StageReport* report = nullptr,
                                          KMeansResult* kmeans_out = nullptr) {
  KMeansResult km = kmeans_fit(images, cfg.c, cfg.seed, cfg.kmeans_max_iter,
                               cfg.kmeans_tol);
  const Mat centers = normalize_centers(km.centers);
  if (kmeans_out) *kmeans_out = std::move(km);

  std::vector<double> scores;
  const std::vector<int> unique_kept =
      uniqueness_filter(vocab.embeddings, centers, cfg.rho_u, cfg.gamma_r, &scores);

  const TaxonomyTree tree = build_taxonomy(vocab.taxonomy_edges, vocab.words);
  const std::vector<int> kept = hierarchy_filter_indices(unique_kept, tree, cfg.gamma_h);

  if (report) {
    report->rows.push_back({"vocabulary", vocab.words.size(), 0});
    report->rows.push_back(
        {"uniqueness", unique_kept.size(), vocab.words.size() - unique_kept.size()});
    report->rows.push_back({"hierarchy", kept.size(), unique_kept.size() - kept.size()});
  }
  return detail::make_space(vocab, kept, scores, unique_kept, tree);
}

// Hierarchy stage alone, packaged as a SemanticSpace (identity uniqueness).
inline SemanticSpace hierarchy_filter(const VocabularyBundle& vocab,
                                      const std::vector<int>& candidates,
                                      const TaxonomyTree& tree, std::uint32_t gamma_h) {
  const std::vector<int> kept = hierarchy_filter_indices(candidates, tree, gamma_h);
  return detail::make_space(vocab, kept, {}, candidates, tree);
}

inline void dump_space_csv(const VocabularyBundle& vocab, const SemanticSpace& space,
                           const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write space dump: " + path.string());
  os << "word,depth,uniqueness,kept_flag\n";
  for (std::size_t w = 0; w < vocab.words.size(); ++w) {
    const auto& p = space.provenance[w];
    os << vocab.words[w] << ',';
    if (p.depth == TaxonomyTree::kOrphanDepth)
      os << "orphan";
    else
      os << p.depth;
    os << ',' << p.uniqueness << ',' << (p.passed_hierarchy ? 1 : 0) << '\n';
  }
}

}  // namespace mca
