#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "mca/common.hpp"
#include "mca/embedding.hpp"
#include "mca/matrix.hpp"
#include "mca/rng.hpp"
#include "mca/semantic_space.hpp"

namespace mca {

// Row-stochastic n x c matrix of cluster probabilities.
using SoftAssignment = Mat;

inline bool is_row_stochastic(const Mat& m, double tol = 1e-6) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double sum = 0.0;
    for (double v : m.row(i)) {
      if (v < 0.0) return false;
      sum += v;
    }
    if (std::abs(sum - 1.0) > tol) return false;
  }
  return true;
}

// Trainable state: two linear-plus-softmax cluster heads and the bilinear
// attention matrices.
struct ModelParams {
  std::size_t c = 0;
  std::size_t d = 0;
  Mat img_head_w;                 // c x d
  std::vector<double> img_head_b; // c
  Mat txt_head_w;                 // c x d
  std::vector<double> txt_head_b; // c
  Mat attn_img;                   // d x d
  Mat attn_txt;                   // d x d
  bool use_bias = true;

  // Heads start as small uniform noise; attention starts at identity so the
  // step-0 pseudo-labels reduce to plain neighbor voting in the native
  // embedding geometry.
  static ModelParams init(std::size_t c, std::size_t d, std::uint64_t seed,
                          bool use_bias = true) {
    ModelParams p;
    p.c = c;
    p.d = d;
    p.use_bias = use_bias;
    p.img_head_w = Mat(c, d);
    p.txt_head_w = Mat(c, d);
    p.img_head_b.assign(c, 0.0);
    p.txt_head_b.assign(c, 0.0);
    Rng rng = Rng::derive(seed, 0x68656164ULL);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    for (std::size_t i = 0; i < c * d; ++i)
      p.img_head_w.data()[i] = rng.uniform(-scale, scale);
    for (std::size_t i = 0; i < c * d; ++i)
      p.txt_head_w.data()[i] = rng.uniform(-scale, scale);
    p.attn_img = Mat::identity(d);
    p.attn_txt = Mat::identity(d);
    return p;
  }

  bool all_finite() const {
    auto vec_finite = [](const std::vector<double>& v) {
      for (double x : v)
        if (!std::isfinite(x)) return false;
      return true;
    };
    return img_head_w.all_finite() && txt_head_w.all_finite() && attn_img.all_finite() &&
           attn_txt.all_finite() && vec_finite(img_head_b) && vec_finite(txt_head_b);
  }
};

namespace detail {

constexpr char kParamsMagic[4] = {'M', 'C', 'A', 'P'};
constexpr std::uint32_t kParamsVersion = 1;

inline void write_f32_block(std::ostream& os, std::span<const double> values) {
  for (double v : values) write_f32_le(os, static_cast<float>(v));
}

inline void read_f32_block(std::istream& is, std::span<double> values,
                           const std::string& what) {
  for (double& v : values) {
    float f;
    if (!read_f32_le(is, f)) throw DataError("truncated checkpoint block: " + what);
    v = static_cast<double>(f);
  }
}

// Bias is dropped from logits but stays in the checkpoint layout.
inline void affine_softmax(const Mat& w, const std::vector<double>& b, bool use_bias,
                           std::span<const double> x, std::span<double> out) {
  for (std::size_t k = 0; k < w.rows(); ++k)
    out[k] = dot(w.row(k), x) + (use_bias ? b[k] : 0.0);
  softmax_inplace(out);
}

inline void affine_softmax(const Mat& w, const std::vector<double>& b, bool use_bias,
                           std::span<const float> x, std::span<double> out) {
  for (std::size_t k = 0; k < w.rows(); ++k)
    out[k] = dot(w.row(k), x) + (use_bias ? b[k] : 0.0);
  softmax_inplace(out);
}

}  // namespace detail

// Checkpoint: "MCAP", version, c, d, then image head (weights + bias), text
// head (weights + bias), and both attention matrices as little-endian f32.
inline void save_params(const ModelParams& p, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write checkpoint: " + path.string());
  os.write(detail::kParamsMagic, 4);
  detail::write_u32_le(os, detail::kParamsVersion);
  detail::write_u32_le(os, static_cast<std::uint32_t>(p.c));
  detail::write_u32_le(os, static_cast<std::uint32_t>(p.d));
  detail::write_f32_block(os, {p.img_head_w.data(), p.c * p.d});
  detail::write_f32_block(os, p.img_head_b);
  detail::write_f32_block(os, {p.txt_head_w.data(), p.c * p.d});
  detail::write_f32_block(os, p.txt_head_b);
  detail::write_f32_block(os, {p.attn_img.data(), p.d * p.d});
  detail::write_f32_block(os, {p.attn_txt.data(), p.d * p.d});
  if (!os) throw DataError("checkpoint write failed: " + path.string());
}

inline ModelParams load_params(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint: " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, detail::kParamsMagic, 4) != 0)
    throw DataError("bad magic in checkpoint " + path.string() + " (expected MCAP)");
  std::uint32_t version = 0, c = 0, d = 0;
  if (!detail::read_u32_le(is, version) || !detail::read_u32_le(is, c) ||
      !detail::read_u32_le(is, d))
    throw DataError("truncated checkpoint header: " + path.string());
  if (version != detail::kParamsVersion)
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  if (c == 0 || d == 0) throw DataError("degenerate checkpoint shape");

  ModelParams p;
  p.c = c;
  p.d = d;
  p.img_head_w = Mat(c, d);
  p.txt_head_w = Mat(c, d);
  p.img_head_b.assign(c, 0.0);
  p.txt_head_b.assign(c, 0.0);
  p.attn_img = Mat(d, d);
  p.attn_txt = Mat(d, d);
  detail::read_f32_block(is, {p.img_head_w.data(), p.c * p.d}, "image head weights");
  detail::read_f32_block(is, p.img_head_b, "image head bias");
  detail::read_f32_block(is, {p.txt_head_w.data(), p.c * p.d}, "text head weights");
  detail::read_f32_block(is, p.txt_head_b, "text head bias");
  detail::read_f32_block(is, {p.attn_img.data(), p.d * p.d}, "image attention");
  detail::read_f32_block(is, {p.attn_txt.data(), p.d * p.d}, "text attention");
  return p;
}

// Row-wise softmax of the affine head over every embedding row.
inline SoftAssignment head_forward(const Mat& w, const std::vector<double>& b,
                                   bool use_bias, const EmbeddingMatrix& emb,
                                   int threads = 1) {
  if (emb.d != w.cols())
    throw DataError("head dimension mismatch: " + std::to_string(w.cols()) + " vs " +
                    std::to_string(emb.d));
  SoftAssignment q(emb.n, w.rows());
  parallel_for(emb.n, threads, [&](std::size_t i) {
    detail::affine_softmax(w, b, use_bias, emb.row(i), q.row(i));
  });
  if (!q.all_finite()) throw NumericError("non-finite head output");
  return q;
}

inline SoftAssignment head_forward(const Mat& w, const std::vector<double>& b,
                                   bool use_bias, const Mat& rows) {
  SoftAssignment q(rows.rows(), w.rows());
  for (std::size_t i = 0; i < rows.rows(); ++i)
    detail::affine_softmax(w, b, use_bias, rows.row(i), q.row(i));
  if (!q.all_finite()) throw NumericError("non-finite head output");
  return q;
}

inline SoftAssignment image_head_forward(const ModelParams& p, const EmbeddingMatrix& u,
                                         int threads = 1) {
  return head_forward(p.img_head_w, p.img_head_b, p.use_bias, u, threads);
}

inline SoftAssignment text_head_forward(const ModelParams& p, const EmbeddingMatrix& v,
                                        int threads = 1) {
  return head_forward(p.txt_head_w, p.txt_head_b, p.use_bias, v, threads);
}

// Attention vote over one image's neighboring texts: bilinear scores
// (W_img u)^T (W_txt v_j), softmax over the neighborhood, then the weighted
// mean of the neighbors' assignment rows.
inline std::vector<double> attention_combine(std::span<const double> u,
                                             const Mat& neighbor_txt_embs,
                                             const Mat& neighbor_txt_assigns,
                                             const Mat& attn_img, const Mat& attn_txt) {
  const std::size_t k = neighbor_txt_embs.rows();
  if (k < 1) throw DataError("attention needs at least one neighbor");
  const std::size_t d = u.size();
  std::vector<double> wu(d);
  mat_vec(attn_img, u, wu);
  std::vector<double> wv(d), scores(k);
  for (std::size_t j = 0; j < k; ++j) {
    mat_vec(attn_txt, neighbor_txt_embs.row(j), wv);
    scores[j] = dot(std::span<const double>(wu), std::span<const double>(wv));
  }
  softmax_inplace(scores);
  std::vector<double> combined(neighbor_txt_assigns.cols(), 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    const auto p = neighbor_txt_assigns.row(j);
    for (std::size_t l = 0; l < combined.size(); ++l) combined[l] += scores[j] * p[l];
  }
  return combined;
}

// Argmax with ties broken by the lowest index.
inline int argmax_label(std::span<const double> p) {
  int best = 0;
  for (std::size_t l = 1; l < p.size(); ++l)
    if (p[l] > p[best]) best = static_cast<int>(l);
  return best;
}

inline std::vector<double> pseudo_label(std::span<const double> p_prime) {
  std::vector<double> one_hot(p_prime.size(), 0.0);
  one_hot[argmax_label(p_prime)] = 1.0;
  return one_hot;
}

// Per-cluster assignment-weighted means of the image embeddings.
inline Mat image_prototypes(const SoftAssignment& q, const EmbeddingMatrix& u) {
  if (q.rows() != u.n) throw DataError("assignment/embedding row mismatch");
  const std::size_t c = q.cols();
  Mat protos(c, u.d);
  std::vector<double> mass(c, 0.0);
  for (std::size_t i = 0; i < u.n; ++i) {
    auto emb = u.row(i);
    for (std::size_t l = 0; l < c; ++l) {
      const double w = q(i, l);
      mass[l] += w;
      auto dst = protos.row(l);
      for (std::size_t j = 0; j < u.d; ++j) dst[j] += w * static_cast<double>(emb[j]);
    }
  }
  for (std::size_t l = 0; l < c; ++l) {
    if (mass[l] <= 0.0)
      throw NumericError("cluster " + std::to_string(l) + " has zero assignment mass");
    for (double& v : protos.row(l)) v /= mass[l];
  }
  return protos;
}

// Image prototypes paired with their text counterparts.
struct PrototypePair {
  Mat image;  // c x d, q-weighted means
  Mat text;   // c x d, unit rows
  std::vector<std::vector<int>> text_source;  // contributing word indices per row
};

// For each image prototype: nearest word embedding seeds the text prototype,
// which is then replaced by the renormalized mean of its k_p nearest words.
inline PrototypePair text_prototypes(const Mat& image_protos, const SemanticSpace& space,
                                     std::size_t k_p) {
  const std::size_t m = space.size();
  if (m == 0) throw DataError("semantic space is empty");
  if (k_p < 1 || k_p > m)
    throw DataError("k_p must be in [1, |T|], got " + std::to_string(k_p));
  const EmbeddingMatrix& words = space.kept_embeddings;

  PrototypePair pair;
  pair.image = image_protos;
  pair.text = Mat(image_protos.rows(), words.d);
  pair.text_source.resize(image_protos.rows());

  std::vector<std::pair<double, int>> scored(m);
  for (std::size_t l = 0; l < image_protos.rows(); ++l) {
    int seed_word = 0;
    double best = -std::numeric_limits<double>::max();
    for (std::size_t w = 0; w < m; ++w) {
      const double s = dot(std::span<const double>(image_protos.row(l)),
                           std::span<const float>(words.row(w)));
      if (s > best) {
        best = s;
        seed_word = static_cast<int>(w);
      }
    }
    for (std::size_t w = 0; w < m; ++w) {
      scored[w] = {dot(std::span<const float>(words.row(seed_word)),
                       std::span<const float>(words.row(w))),
                   static_cast<int>(w)};
    }
    std::partial_sort(scored.begin(), scored.begin() + k_p, scored.end(),
                      [](const auto& a, const auto& b) {
                        return a.first > b.first ||
                               (a.first == b.first && a.second < b.second);
                      });
    auto dst = pair.text.row(l);
    for (std::size_t r = 0; r < k_p; ++r) {
      const int w = scored[r].second;
      pair.text_source[l].push_back(w);
      auto row = words.row(w);
      for (std::size_t j = 0; j < words.d; ++j) dst[j] += static_cast<double>(row[j]);
    }
    for (double& v : dst) v /= static_cast<double>(k_p);
    const double norm = l2_norm(std::span<const double>(dst));
    if (norm < 1e-12)
      throw NumericError("text prototype " + std::to_string(l) + " collapsed to zero");
    for (double& v : dst) v /= norm;
  }
  return pair;
}

inline PrototypePair build_prototypes(const SoftAssignment& q, const EmbeddingMatrix& u,
                                      const SemanticSpace& space, std::size_t k_p) {
  return text_prototypes(image_prototypes(q, u), space, k_p);
}

inline std::vector<int> hard_labels(const SoftAssignment& q) {
  std::vector<int> labels(q.rows());
  for (std::size_t i = 0; i < q.rows(); ++i) labels[i] = argmax_label(q.row(i));
  return labels;
}

}  // namespace mca
