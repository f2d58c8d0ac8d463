#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "mca/common.hpp"

namespace mca {

// Prediction-by-truth count matrix with marginals.
struct ContingencyTable {
  std::size_t c_pred = 0;
  std::size_t c_true = 0;
  std::size_t n = 0;
  std::vector<std::int64_t> counts;     // c_pred * c_true
  std::vector<std::int64_t> pred_sizes; // row marginals
  std::vector<std::int64_t> true_sizes; // column marginals

  std::int64_t at(std::size_t i, std::size_t j) const { return counts[i * c_true + j]; }
};

inline ContingencyTable contingency_table(const std::vector<int>& pred,
                                          const std::vector<int>& truth) {
  if (pred.size() != truth.size())
    throw DataError("label vectors differ in length: " + std::to_string(pred.size()) +
                    " vs " + std::to_string(truth.size()));
  if (pred.empty()) throw DataError("label vectors are empty");
  ContingencyTable t;
  int mp = 0, mt = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] < 0 || truth[i] < 0) throw DataError("negative label");
    mp = std::max(mp, pred[i]);
    mt = std::max(mt, truth[i]);
  }
  t.c_pred = static_cast<std::size_t>(mp) + 1;
  t.c_true = static_cast<std::size_t>(mt) + 1;
  t.n = pred.size();
  t.counts.assign(t.c_pred * t.c_true, 0);
  t.pred_sizes.assign(t.c_pred, 0);
  t.true_sizes.assign(t.c_true, 0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    ++t.counts[pred[i] * t.c_true + truth[i]];
    ++t.pred_sizes[pred[i]];
    ++t.true_sizes[truth[i]];
  }
  return t;
}

namespace detail {

// Jonker-Volgenant style shortest augmenting path assignment on a square cost
// matrix; returns per-row assigned column. O(n^3).
inline std::vector<int> solve_assignment(const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = static_cast<int>(i);
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, std::numeric_limits<double>::infinity());
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      std::size_t j1 = 0;
      double delta = std::numeric_limits<double>::infinity();
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = static_cast<int>(j0);
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(n, -1);
  for (std::size_t j = 1; j <= n; ++j)
    if (p[j] != 0) row_to_col[p[j] - 1] = static_cast<int>(j) - 1;
  return row_to_col;
}

inline double entropy_from_sizes(const std::vector<std::int64_t>& sizes, std::size_t n) {
  double h = 0.0;
  for (std::int64_t s : sizes) {
    if (s == 0) continue;
    const double p = static_cast<double>(s) / static_cast<double>(n);
    h -= p * std::log(p);
  }
  return h;
}

inline bool partitions_identical(const ContingencyTable& t) {
  // Identical up to relabeling: every row and every column has at most one
  // non-zero cell.
  for (std::size_t i = 0; i < t.c_pred; ++i) {
    int nonzero = 0;
    for (std::size_t j = 0; j < t.c_true; ++j)
      if (t.at(i, j) != 0) ++nonzero;
    if (nonzero > 1) return false;
  }
  for (std::size_t j = 0; j < t.c_true; ++j) {
    int nonzero = 0;
    for (std::size_t i = 0; i < t.c_pred; ++i)
      if (t.at(i, j) != 0) ++nonzero;
    if (nonzero > 1) return false;
  }
  return true;
}

inline double comb2(std::int64_t v) {
  return 0.5 * static_cast<double>(v) * static_cast<double>(v - 1);
}

}  // namespace detail

// Clustering accuracy under the best one-to-one cluster/class matching.
// Rectangular tables are padded with zero-count rows/columns.
inline double accuracy_hungarian(const std::vector<int>& pred,
                                 const std::vector<int>& truth) {
  const ContingencyTable t = contingency_table(pred, truth);
  const std::size_t s = std::max(t.c_pred, t.c_true);
  std::vector<std::vector<double>> cost(s, std::vector<double>(s, 0.0));
  for (std::size_t i = 0; i < t.c_pred; ++i)
    for (std::size_t j = 0; j < t.c_true; ++j)
      cost[i][j] = -static_cast<double>(t.at(i, j));
  const std::vector<int> match = detail::solve_assignment(cost);
  std::int64_t hits = 0;
  for (std::size_t i = 0; i < t.c_pred; ++i) {
    const int j = match[i];
    if (j >= 0 && static_cast<std::size_t>(j) < t.c_true) hits += t.at(i, j);
  }
  return static_cast<double>(hits) / static_cast<double>(t.n);
}

enum class NmiNorm { kSqrt, kArithmetic };

// Normalized mutual information. Identical partitions score 1; if either side
// is a single cluster and the partitions differ, the score is 0.
inline double nmi(const std::vector<int>& pred, const std::vector<int>& truth,
                  NmiNorm norm = NmiNorm::kSqrt) {
  const ContingencyTable t = contingency_table(pred, truth);
  if (detail::partitions_identical(t)) return 1.0;
  const double hp = detail::entropy_from_sizes(t.pred_sizes, t.n);
  const double ht = detail::entropy_from_sizes(t.true_sizes, t.n);
  if (hp <= 0.0 || ht <= 0.0) return 0.0;

  double mi = 0.0;
  const double dn = static_cast<double>(t.n);
  for (std::size_t i = 0; i < t.c_pred; ++i) {
    for (std::size_t j = 0; j < t.c_true; ++j) {
      const std::int64_t nij = t.at(i, j);
      if (nij == 0) continue;
      const double pij = static_cast<double>(nij) / dn;
      const double pi = static_cast<double>(t.pred_sizes[i]) / dn;
      const double pj = static_cast<double>(t.true_sizes[j]) / dn;
      mi += pij * std::log(pij / (pi * pj));
    }
  }
  const double denom = norm == NmiNorm::kSqrt ? std::sqrt(hp * ht) : 0.5 * (hp + ht);
  return mi / denom;
}

// Adjusted Rand index via pair counting on the contingency table.
inline double ari(const std::vector<int>& pred, const std::vector<int>& truth) {
  const ContingencyTable t = contingency_table(pred, truth);
  double sum_ij = 0.0;
  for (std::int64_t v : t.counts) sum_ij += detail::comb2(v);
  double sum_a = 0.0, sum_b = 0.0;
  for (std::int64_t v : t.pred_sizes) sum_a += detail::comb2(v);
  for (std::int64_t v : t.true_sizes) sum_b += detail::comb2(v);
  const double pairs = detail::comb2(static_cast<std::int64_t>(t.n));
  if (pairs <= 0.0) return detail::partitions_identical(t) ? 1.0 : 0.0;
  const double expected = sum_a * sum_b / pairs;
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return detail::partitions_identical(t) ? 1.0 : 0.0;
  return (sum_ij - expected) / (max_index - expected);
}

struct MetricReport {
  double acc = 0.0;
  double nmi = 0.0;
  double ari = 0.0;

  void print(std::ostream& os) const {
    os << "metric   value\n";
    os << "ACC      " << acc << "\n";
    os << "NMI      " << nmi << "\n";
    os << "ARI      " << ari << "\n";
  }

  void write_csv(std::ostream& os) const {
    os << "metric,value\n";
    os << "acc," << acc << "\n";
    os << "nmi," << nmi << "\n";
    os << "ari," << ari << "\n";
  }
};

inline MetricReport evaluate_clustering(const std::vector<int>& pred,
                                        const std::vector<int>& truth) {
  return {accuracy_hungarian(pred, truth), nmi(pred, truth), ari(pred, truth)};
}

}  // namespace mca
