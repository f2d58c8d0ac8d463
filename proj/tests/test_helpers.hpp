#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <vector>

#include "mca/embedding.hpp"
#include "mca/knn.hpp"
#include "mca/matrix.hpp"
#include "mca/model.hpp"
#include "mca/rng.hpp"

namespace test {

inline std::filesystem::path temp_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() / ("mca_test_" + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline mca::EmbeddingMatrix random_unit_embeddings(std::size_t n, std::size_t d,
                                                   std::uint64_t seed) {
  mca::Rng rng(seed);
  mca::EmbeddingMatrix m;
  m.n = n;
  m.d = d;
  m.data.resize(n * d);
  for (float& v : m.data) v = static_cast<float>(rng.normal());
  m.ids = mca::default_ids(n);
  return mca::l2_normalize(m);
}

inline mca::Mat random_stochastic_rows(std::size_t n, std::size_t c, std::uint64_t seed) {
  mca::Rng rng(seed);
  mca::Mat q(n, c);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = q.row(i);
    for (double& v : row) v = rng.normal();
    mca::softmax_inplace(row);
  }
  return q;
}

// Brute-force neighbor oracle: full sort of every candidate with the same tie
// rule, independent of the partial-selection path under test.
struct OracleNeighbors {
  std::vector<std::vector<int>> indices;
  std::vector<std::vector<double>> sims;
};

inline OracleNeighbors brute_force_in_modal(const mca::EmbeddingMatrix& m, std::size_t k) {
  OracleNeighbors out;
  out.indices.resize(m.n);
  out.sims.resize(m.n);
  for (std::size_t i = 0; i < m.n; ++i) {
    std::vector<std::pair<double, int>> all;
    for (std::size_t j = 0; j < m.n; ++j) {
      if (j == i) continue;
      double s = 0.0;
      for (std::size_t t = 0; t < m.d; ++t)
        s += static_cast<double>(m.row(i)[t]) * static_cast<double>(m.row(j)[t]);
      all.emplace_back(std::clamp(s, -1.0, 1.0), static_cast<int>(j));
    }
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
      return a.first > b.first || (a.first == b.first && a.second < b.second);
    });
    for (std::size_t r = 0; r < k; ++r) {
      out.indices[i].push_back(all[r].second);
      out.sims[i].push_back(all[r].first);
    }
  }
  return out;
}

inline OracleNeighbors brute_force_cross_modal(const mca::EmbeddingMatrix& queries,
                                               const mca::EmbeddingMatrix& keys,
                                               std::size_t k) {
  OracleNeighbors out;
  out.indices.resize(queries.n);
  out.sims.resize(queries.n);
  for (std::size_t i = 0; i < queries.n; ++i) {
    std::vector<std::pair<double, int>> all;
    for (std::size_t j = 0; j < keys.n; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < queries.d; ++t)
        s += static_cast<double>(queries.row(i)[t]) * static_cast<double>(keys.row(j)[t]);
      all.emplace_back(std::clamp(s, -1.0, 1.0), static_cast<int>(j));
    }
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
      return a.first > b.first || (a.first == b.first && a.second < b.second);
    });
    for (std::size_t r = 0; r < k; ++r) {
      out.indices[i].push_back(all[r].second);
      out.sims[i].push_back(all[r].first);
    }
  }
  return out;
}

// Exhaustive matching oracle for clustering accuracy, valid for small label
// alphabets: tries every permutation of the larger side.
inline double accuracy_by_permutation(const std::vector<int>& pred,
                                      const std::vector<int>& truth) {
  int cp = 0, ct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    cp = std::max(cp, pred[i] + 1);
    ct = std::max(ct, truth[i] + 1);
  }
  const int c = std::max(cp, ct);
  std::vector<int> perm(c);
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t best = 0;
  do {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
      if (perm[pred[i]] == truth[i]) ++hits;
    best = std::max(best, hits);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(best) / static_cast<double>(pred.size());
}

// All-pairs Rand statistic oracle, O(n^2).
inline double ari_by_pair_counting(const std::vector<int>& pred,
                                   const std::vector<int>& truth) {
  const std::size_t n = pred.size();
  double both = 0.0, pred_same = 0.0, true_same = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool sp = pred[i] == pred[j];
      const bool st = truth[i] == truth[j];
      if (sp) ++pred_same;
      if (st) ++true_same;
      if (sp && st) ++both;
    }
  }
  const double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
  const double expected = pred_same * true_same / pairs;
  const double max_index = 0.5 * (pred_same + true_same);
  if (max_index == expected) return 1.0;
  return (both - expected) / (max_index - expected);
}

// Direct entropy-formula oracle for normalized mutual information.
inline double nmi_by_formula(const std::vector<int>& pred, const std::vector<int>& truth) {
  const std::size_t n = pred.size();
  const int cp = *std::max_element(pred.begin(), pred.end()) + 1;
  const int ct = *std::max_element(truth.begin(), truth.end()) + 1;
  std::vector<double> pi(cp, 0.0), pj(ct, 0.0);
  std::vector<std::vector<double>> pij(cp, std::vector<double>(ct, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    pi[pred[i]] += 1.0 / n;
    pj[truth[i]] += 1.0 / n;
    pij[pred[i]][truth[i]] += 1.0 / n;
  }
  double hi = 0.0, hj = 0.0, mi = 0.0;
  for (double p : pi)
    if (p > 0) hi -= p * std::log(p);
  for (double p : pj)
    if (p > 0) hj -= p * std::log(p);
  for (int a = 0; a < cp; ++a)
    for (int b = 0; b < ct; ++b)
      if (pij[a][b] > 0) mi += pij[a][b] * std::log(pij[a][b] / (pi[a] * pj[b]));
  if (hi <= 0.0 || hj <= 0.0) return mi;  // caller handles degenerate cases
  return mi / std::sqrt(hi * hj);
}

}  // namespace test
