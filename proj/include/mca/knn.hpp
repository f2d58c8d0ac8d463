#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "mca/common.hpp"
#include "mca/embedding.hpp"
#include "mca/matrix.hpp"

namespace mca {

// Exact top-k cosine neighborhoods, one row of (index, similarity) pairs per
// query, sorted by similarity descending with ties broken by lower index.
struct NeighborIndex {
  std::size_t query_count = 0;
  std::size_t k = 0;
  std::vector<int> indices;     // query_count * k
  std::vector<double> sims;     // query_count * k

  std::span<const int> neighbors(std::size_t q) const {
    return {indices.data() + q * k, k};
  }
  std::span<const double> similarities(std::size_t q) const {
    return {sims.data() + q * k, k};
  }

  bool contains(std::size_t q, int idx) const {
    auto nb = neighbors(q);
    return std::find(nb.begin(), nb.end(), idx) != nb.end();
  }
};

namespace detail {

// Clamped cosine of two unit rows; sequential 64-bit accumulation so brute
// force and indexed search produce bitwise-equal values.
inline double unit_cosine(std::span<const float> a, std::span<const float> b) {
  return std::clamp(dot(a, b), -1.0, 1.0);
}

struct Scored {
  double sim;
  int idx;
};

inline bool scored_before(const Scored& a, const Scored& b) {
  return a.sim > b.sim || (a.sim == b.sim && a.idx < b.idx);
}

}  // namespace detail

// Exact top-k neighbors within one embedding table, self excluded.
inline NeighborIndex topk_in_modal(const EmbeddingMatrix& m, std::size_t k,
                                   int threads = 1) {
  if (k < 1 || k > m.n - 1)
    throw DataError("in-modal k must be in [1, n-1], got k=" + std::to_string(k) +
                    " for n=" + std::to_string(m.n));
  NeighborIndex out;
  out.query_count = m.n;
  out.k = k;
  out.indices.resize(m.n * k);
  out.sims.resize(m.n * k);

  parallel_for(m.n, threads, [&](std::size_t i) {
    std::vector<detail::Scored> scored;
    scored.reserve(m.n - 1);
    for (std::size_t j = 0; j < m.n; ++j) {
      if (j == i) continue;
      scored.push_back({detail::unit_cosine(m.row(i), m.row(j)), static_cast<int>(j)});
    }
    std::partial_sort(scored.begin(), scored.begin() + k, scored.end(),
                      detail::scored_before);
    for (std::size_t r = 0; r < k; ++r) {
      out.indices[i * k + r] = scored[r].idx;
      out.sims[i * k + r] = scored[r].sim;
    }
  });
  return out;
}

// Exact top-k key rows per query row; no self exclusion across modalities.
inline NeighborIndex topk_cross_modal(const EmbeddingMatrix& queries,
                                      const EmbeddingMatrix& keys, std::size_t k,
                                      int threads = 1) {
  if (queries.d != keys.d)
    throw DataError("cross-modal dimension mismatch: " + std::to_string(queries.d) +
                    " vs " + std::to_string(keys.d));
  if (k < 1 || k > keys.n)
    throw DataError("cross-modal k must be in [1, m], got k=" + std::to_string(k) +
                    " for m=" + std::to_string(keys.n));
  NeighborIndex out;
  out.query_count = queries.n;
  out.k = k;
  out.indices.resize(queries.n * k);
  out.sims.resize(queries.n * k);

  parallel_for(queries.n, threads, [&](std::size_t i) {
    std::vector<detail::Scored> scored;
    scored.reserve(keys.n);
    for (std::size_t j = 0; j < keys.n; ++j) {
      scored.push_back(
          {detail::unit_cosine(queries.row(i), keys.row(j)), static_cast<int>(j)});
    }
    std::partial_sort(scored.begin(), scored.begin() + k, scored.end(),
                      detail::scored_before);
    for (std::size_t r = 0; r < k; ++r) {
      out.indices[i * k + r] = scored[r].idx;
      out.sims[i * k + r] = scored[r].sim;
    }
  });
  return out;
}

// Inspection dump: query_id,rank,neighbor_id,similarity.
inline void dump_neighbors_csv(const NeighborIndex& index,
                               const std::vector<std::string>& query_ids,
                               const std::vector<std::string>& neighbor_ids,
                               const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write neighbor dump: " + path.string());
  os << "query_id,rank,neighbor_id,similarity\n";
  for (std::size_t q = 0; q < index.query_count; ++q) {
    for (std::size_t r = 0; r < index.k; ++r) {
      os << query_ids[q] << ',' << r << ',' << neighbor_ids[index.indices[q * index.k + r]]
         << ',' << index.sims[q * index.k + r] << '\n';
    }
  }
}

}  // namespace mca
