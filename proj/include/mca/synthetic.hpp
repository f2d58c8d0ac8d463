#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mca/common.hpp"
#include "mca/embedding.hpp"
#include "mca/matrix.hpp"
#include "mca/rng.hpp"

namespace mca {

// Paired image/word embedding benchmark with known clusters, a chain taxonomy
// with shared shallow ancestors, and a controllable fraction of words whose
// embeddings point at a random cluster instead of their own.
struct SynthConfig {
  std::size_t clusters = 3;
  std::size_t images_per_cluster = 200;
  std::size_t words_per_cluster = 12;
  std::size_t dim = 64;
  double separation = 1.0;     // 1 = fully orthogonal cluster directions
  double noise_sigma = 0.15;
  double misalignment_rate = 0.0;
  std::size_t taxonomy_depth = 6;   // deepest word level, root = 0
  std::size_t shared_levels = 2;    // cluster-agnostic ancestor levels
  std::uint64_t seed = 1;

  void validate() const {
    if (clusters < 1 || images_per_cluster < 1 || words_per_cluster < 1)
      throw UsageError("synthetic counts must be >= 1");
    if (dim < 2) throw UsageError("synthetic dim must be >= 2");
    if (clusters > dim)
      throw UsageError("cannot place " + std::to_string(clusters) +
                       " near-orthogonal directions in dimension " + std::to_string(dim));
    if (separation <= 0.0) throw UsageError("separation must be > 0");
    if (misalignment_rate < 0.0 || misalignment_rate > 1.0)
      throw UsageError("misalignment rate must be in [0, 1]");
    if (noise_sigma < 0.0) throw UsageError("noise sigma must be >= 0");
    if (taxonomy_depth < shared_levels + 1)
      throw UsageError("taxonomy depth must exceed the shared ancestor levels");
  }
};

struct SynthData {
  DatasetBundle dataset;
  VocabularyBundle vocab;
  std::vector<int> word_cluster;  // true lineage; -1 for shared ancestors
  std::vector<int> word_pointed;  // cluster the embedding was drawn near
  Mat directions;                 // clusters x dim unit rows
};

namespace detail {

inline void push_unit_row(EmbeddingMatrix& m, std::span<const double> row) {
  double norm = 0.0;
  for (double v : row) norm += v * v;
  norm = std::sqrt(norm);
  if (norm < 1e-12) throw NumericError("synthetic row collapsed to zero");
  for (double v : row) m.data.push_back(static_cast<float>(v / norm));
  ++m.n;
}

}  // namespace detail

inline SynthData generate(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng = Rng::derive(cfg.seed, 0x73796e7468ULL);
  const std::size_t c = cfg.clusters, d = cfg.dim;

  // Orthonormal cluster directions via Gram-Schmidt on Gaussian draws, then
  // optionally pulled toward a common base to soften the separation.
  Mat dirs(c, d);
  for (std::size_t k = 0; k < c; ++k) {
    auto row = dirs.row(k);
    for (double& v : row) v = rng.normal();
    for (std::size_t prev = 0; prev < k; ++prev) {
      const double proj = dot(std::span<const double>(row), dirs.row(prev));
      auto prow = dirs.row(prev);
      for (std::size_t j = 0; j < d; ++j) row[j] -= proj * prow[j];
    }
    const double norm = l2_norm(std::span<const double>(row));
    if (norm < 1e-8)
      throw NumericError("failed to draw independent cluster directions");
    for (double& v : row) v /= norm;
  }
  if (cfg.separation < 1.0) {
    std::vector<double> base(d, 0.0);
    for (std::size_t k = 0; k < c; ++k)
      for (std::size_t j = 0; j < d; ++j) base[j] += dirs(k, j);
    const double bn = l2_norm(std::span<const double>(base));
    for (double& v : base) v /= bn;
    for (std::size_t k = 0; k < c; ++k) {
      auto row = dirs.row(k);
      for (std::size_t j = 0; j < d; ++j)
        row[j] = cfg.separation * row[j] + (1.0 - cfg.separation) * base[j];
      const double norm = l2_norm(std::span<const double>(row));
      for (double& v : row) v /= norm;
    }
  }

  SynthData out;
  out.directions = dirs;
  out.dataset.c = static_cast<int>(c);
  out.dataset.images.d = d;
  out.dataset.labels.emplace();
  std::vector<double> buf(d);
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t i = 0; i < cfg.images_per_cluster; ++i) {
      for (std::size_t j = 0; j < d; ++j)
        buf[j] = dirs(k, j) + cfg.noise_sigma * rng.normal();
      detail::push_unit_row(out.dataset.images, buf);
      out.dataset.images.ids.push_back("img" +
                                       std::to_string(out.dataset.images.n - 1));
      out.dataset.labels->push_back(static_cast<int>(k));
    }
  }

  // Shared ancestor chain: depths 1..shared_levels, embedded near the global
  // mean direction so they separate nothing (the "mammal over dog and cat"
  // pattern).
  out.vocab.embeddings.d = d;
  std::vector<double> mean_dir(d, 0.0);
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t j = 0; j < d; ++j) mean_dir[j] += dirs(k, j) / static_cast<double>(c);
  std::string prev_parent = kTaxonomyRoot;
  for (std::size_t s = 0; s < cfg.shared_levels; ++s) {
    const std::string name = "shared" + std::to_string(s + 1);
    out.vocab.words.push_back(name);
    out.vocab.embeddings.ids.push_back(name);
    for (std::size_t j = 0; j < d; ++j)
      buf[j] = mean_dir[j] + cfg.noise_sigma * rng.normal();
    detail::push_unit_row(out.vocab.embeddings, buf);
    out.word_cluster.push_back(-1);
    out.word_pointed.push_back(-1);
    out.vocab.taxonomy_edges.emplace_back(name, prev_parent);
    prev_parent = name;
  }

  // Per-cluster words: a chain down to the configured depth, extra words as
  // siblings at intermediate levels. A misaligned word keeps its lineage but
  // its embedding is drawn near a uniformly random cluster, so at rate 1 the
  // nearest-word labels carry no information beyond chance.
  const std::size_t chain_len =
      std::min(cfg.words_per_cluster, cfg.taxonomy_depth - cfg.shared_levels);
  for (std::size_t k = 0; k < c; ++k) {
    std::vector<std::string> chain;
    for (std::size_t w = 0; w < cfg.words_per_cluster; ++w) {
      const std::string name = "c" + std::to_string(k) + "_w" + std::to_string(w);
      std::string parent;
      if (w < chain_len) {
        parent = w == 0 ? prev_parent : chain.back();
        chain.push_back(name);
      } else {
        // depth of chain node i is shared_levels + 1 + i; stay at or above
        // the configured max depth
        const std::size_t pool =
            std::min(chain_len, cfg.taxonomy_depth - cfg.shared_levels - 1);
        parent = pool == 0 ? prev_parent : chain[(w - chain_len) % pool];
      }
      out.vocab.words.push_back(name);
      out.vocab.embeddings.ids.push_back(name);
      out.vocab.taxonomy_edges.emplace_back(name, parent);

      int target = static_cast<int>(k);
      if (cfg.misalignment_rate > 0.0 && rng.uniform() < cfg.misalignment_rate)
        target = static_cast<int>(rng.index(c));
      for (std::size_t j = 0; j < d; ++j)
        buf[j] = dirs(target, j) + cfg.noise_sigma * rng.normal();
      detail::push_unit_row(out.vocab.embeddings, buf);
      out.word_cluster.push_back(static_cast<int>(k));
      out.word_pointed.push_back(target);
    }
  }
  return out;
}

}  // namespace mca
