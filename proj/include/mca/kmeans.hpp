#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "mca/common.hpp"
#include "mca/embedding.hpp"
#include "mca/matrix.hpp"
#include "mca/rng.hpp"

namespace mca {

struct KMeansResult {
  Mat centers;                  // c x d
  std::vector<int> assignments; // n, values in [0, c)
  double inertia = 0.0;         // sum of squared distances to assigned center
  int iterations = 0;
};

namespace detail {

inline double sq_dist(std::span<const float> x, std::span<const double> c) {
  double s = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double diff = static_cast<double>(x[j]) - c[j];
    s += diff * diff;
  }
  return s;
}

}  // namespace detail

// Lloyd iterations from k-means++ seeding, Euclidean distance. Deterministic
// for a fixed seed; an emptied cluster is re-seeded at the point farthest from
// its assigned center (lowest index on ties).
inline KMeansResult kmeans_fit(const EmbeddingMatrix& m, std::size_t c,
                               std::uint64_t seed, int max_iter = 100,
                               double tol = 1e-6,
                               std::vector<double>* inertia_trace = nullptr) {
  if (c < 1 || c > m.n)
    throw DataError("k-means cluster count must be in [1, n], got " + std::to_string(c));
  Rng rng = Rng::derive(seed, 0x6b6d65616e73ULL);

  KMeansResult res;
  res.centers = Mat(c, m.d);
  res.assignments.assign(m.n, 0);

  // k-means++ seeding.
  std::vector<double> dist2(m.n, std::numeric_limits<double>::max());
  std::size_t first = rng.index(m.n);
  for (std::size_t j = 0; j < m.d; ++j) res.centers(0, j) = m.row(first)[j];
  for (std::size_t k = 1; k < c; ++k) {
    double total = 0.0;
    for (std::size_t i = 0; i < m.n; ++i) {
      dist2[i] = std::min(dist2[i], detail::sq_dist(m.row(i), res.centers.row(k - 1)));
      total += dist2[i];
    }
    std::size_t pick = 0;
    if (total <= 0.0) {
      pick = rng.index(m.n);  // all points coincide with chosen centers
    } else {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < m.n; ++i) {
        acc += dist2[i];
        if (acc >= target) {
          pick = i;
          break;
        }
      }
    }
    for (std::size_t j = 0; j < m.d; ++j) res.centers(k, j) = m.row(pick)[j];
  }

  std::vector<double> best(m.n);
  std::vector<std::size_t> counts(c);
  Mat next(c, m.d);
  for (int iter = 0; iter < max_iter; ++iter) {
    res.iterations = iter + 1;

    // Assignment step.
    for (std::size_t i = 0; i < m.n; ++i) {
      double bd = std::numeric_limits<double>::max();
      int bk = 0;
      for (std::size_t k = 0; k < c; ++k) {
        const double d2 = detail::sq_dist(m.row(i), res.centers.row(k));
        if (d2 < bd) {
          bd = d2;
          bk = static_cast<int>(k);
        }
      }
      res.assignments[i] = bk;
      best[i] = bd;
    }

    // Re-seed emptied clusters at the farthest point from its own center.
    std::fill(counts.begin(), counts.end(), 0);
    for (int a : res.assignments) ++counts[a];
    for (std::size_t k = 0; k < c; ++k) {
      if (counts[k] != 0) continue;
      std::size_t far = 0;
      double fd = -1.0;
      for (std::size_t i = 0; i < m.n; ++i) {
        if (counts[res.assignments[i]] <= 1) continue;  // keep donors non-empty
        if (best[i] > fd) {
          fd = best[i];
          far = i;
        }
      }
      --counts[res.assignments[far]];
      res.assignments[far] = static_cast<int>(k);
      counts[k] = 1;
      best[far] = 0.0;
      for (std::size_t j = 0; j < m.d; ++j) res.centers(k, j) = m.row(far)[j];
    }

    if (inertia_trace) {
      double it = 0.0;
      for (double b : best) it += b;
      inertia_trace->push_back(it);
    }

    // Update step.
    next.zero();
    for (std::size_t i = 0; i < m.n; ++i) {
      auto dst = next.row(res.assignments[i]);
      auto src = m.row(i);
      for (std::size_t j = 0; j < m.d; ++j) dst[j] += src[j];
    }
    double shift = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
      const double inv = 1.0 / static_cast<double>(counts[k]);
      for (std::size_t j = 0; j < m.d; ++j) {
        const double nj = next(k, j) * inv;
        const double diff = nj - res.centers(k, j);
        shift += diff * diff;
        res.centers(k, j) = nj;
      }
    }
    if (std::sqrt(shift) < tol) break;
  }

  res.inertia = 0.0;
  for (std::size_t i = 0; i < m.n; ++i) {
    double bd = std::numeric_limits<double>::max();
    int bk = 0;
    for (std::size_t k = 0; k < c; ++k) {
      const double d2 = detail::sq_dist(m.row(i), res.centers.row(k));
      if (d2 < bd) {
        bd = d2;
        bk = static_cast<int>(k);
      }
    }
    res.assignments[i] = bk;
    res.inertia += bd;
  }
  return res;
}

}  // namespace mca
