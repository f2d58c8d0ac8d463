#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "mca/common.hpp"
#include "mca/embedding.hpp"
#include "mca/knn.hpp"
#include "mca/matrix.hpp"
#include "mca/model.hpp"

namespace mca {

// Every log argument is clamped here.
inline constexpr double kLogClamp = 1e-12;

struct LossWeights {
  double eta = 0.0;
  double tau_ia = 1.0;
  double tau_pa = 1.0;
  double lambda_a = 0.0;
  double lambda_pa = 0.0;
  double lambda_sa = 0.0;
  // The balance term is implemented with the sign that actually favors
  // uniform cluster sizes under minimization; this flag restores the sign as
  // printed for exact-fidelity runs.
  bool paper_literal_entropy = false;
};

struct LossBreakdown {
  double consistency = 0.0;    // neighbor agreement term
  double entropy_term = 0.0;   // applied balance term (eta and sign included)
  double instance = 0.0;
  double prototype = 0.0;
  double semantic_ce = 0.0;    // pseudo-label cross entropy
  double semantic_attn = 0.0;  // attention-training cross entropy
  double semantic = 0.0;       // semantic_ce + semantic_attn
  double total = 0.0;
};

struct GradientSet {
  Mat d_img_head_w;
  std::vector<double> d_img_head_b;
  Mat d_txt_head_w;
  std::vector<double> d_txt_head_b;
  Mat d_attn_img;
  Mat d_attn_txt;

  static GradientSet zeros(const ModelParams& p) {
    GradientSet g;
    g.d_img_head_w = Mat(p.c, p.d);
    g.d_img_head_b.assign(p.c, 0.0);
    g.d_txt_head_w = Mat(p.c, p.d);
    g.d_txt_head_b.assign(p.c, 0.0);
    g.d_attn_img = Mat(p.d, p.d);
    g.d_attn_txt = Mat(p.d, p.d);
    return g;
  }

  void check_finite() const {
    auto vec_finite = [](const std::vector<double>& v) {
      for (double x : v)
        if (!std::isfinite(x)) return false;
      return true;
    };
    if (!d_img_head_w.all_finite() || !vec_finite(d_img_head_b))
      throw NumericError("non-finite gradient in image head");
    if (!d_txt_head_w.all_finite() || !vec_finite(d_txt_head_b))
      throw NumericError("non-finite gradient in text head");
    if (!d_attn_img.all_finite()) throw NumericError("non-finite gradient in image attention");
    if (!d_attn_txt.all_finite()) throw NumericError("non-finite gradient in text attention");
  }
};

// Parameter-independent batch state, materialized once per step. Gradients are
// taken with these held fixed; in particular the prototypes are detached
// constants recomputed every step rather than a backprop path through q.
struct BatchInputs {
  Mat u;      // B x d image rows
  Mat u_nbr;  // B x d drawn in-modal neighbor rows
  Mat v;      // m x d semantic-space word rows
  std::vector<int> txt_draw;               // B, drawn word per image
  std::vector<std::vector<int>> txt_nbrs;  // B x k_S word neighborhoods
  Mat proto_img;  // c x d
  Mat proto_txt;  // c x d
};

struct ForwardState {
  Mat q;          // B x c
  Mat q_nbr;      // B x c
  Mat p;          // m x c
  Mat rho_img;    // c x c head outputs on image prototypes
  Mat rho_txt;    // c x c head outputs on text prototypes
  Mat wi_u;       // B x d, attn_img * u_i
  Mat wv;         // m x d, attn_txt * v_j
  Mat attn_scores;   // B x k_S
  Mat attn_weights;  // B x k_S
  Mat p_prime;    // B x c
  std::vector<int> pseudo;  // B, argmax of p_prime
};

inline Mat to_mat(const EmbeddingMatrix& e) {
  Mat m(e.n, e.d);
  for (std::size_t i = 0; i < e.n; ++i) {
    auto src = e.row(i);
    auto dst = m.row(i);
    for (std::size_t j = 0; j < e.d; ++j) dst[j] = static_cast<double>(src[j]);
  }
  return m;
}

inline ForwardState forward(const BatchInputs& in, const ModelParams& params) {
  const std::size_t b = in.u.rows();
  ForwardState fs;
  fs.q = head_forward(params.img_head_w, params.img_head_b, params.use_bias, in.u);
  fs.q_nbr = head_forward(params.img_head_w, params.img_head_b, params.use_bias, in.u_nbr);
  fs.p = head_forward(params.txt_head_w, params.txt_head_b, params.use_bias, in.v);
  fs.rho_img =
      head_forward(params.img_head_w, params.img_head_b, params.use_bias, in.proto_img);
  fs.rho_txt =
      head_forward(params.txt_head_w, params.txt_head_b, params.use_bias, in.proto_txt);

  fs.wi_u = Mat(b, params.d);
  for (std::size_t i = 0; i < b; ++i) mat_vec(params.attn_img, in.u.row(i), fs.wi_u.row(i));
  fs.wv = Mat(in.v.rows(), params.d);
  for (std::size_t j = 0; j < in.v.rows(); ++j)
    mat_vec(params.attn_txt, in.v.row(j), fs.wv.row(j));

  const std::size_t k = in.txt_nbrs.empty() ? 0 : in.txt_nbrs.front().size();
  if (k == 0) throw DataError("attention needs at least one text neighbor per image");
  fs.attn_scores = Mat(b, k);
  fs.attn_weights = Mat(b, k);
  fs.p_prime = Mat(b, params.c);
  fs.pseudo.resize(b);
  for (std::size_t i = 0; i < b; ++i) {
    if (in.txt_nbrs[i].size() != k)
      throw DataError("ragged text neighborhoods in batch");
    auto scores = fs.attn_scores.row(i);
    for (std::size_t jj = 0; jj < k; ++jj)
      scores[jj] = dot(std::span<const double>(fs.wi_u.row(i)),
                       std::span<const double>(fs.wv.row(in.txt_nbrs[i][jj])));
    auto weights = fs.attn_weights.row(i);
    std::copy(scores.begin(), scores.end(), weights.begin());
    softmax_inplace(weights);
    auto out = fs.p_prime.row(i);
    for (std::size_t jj = 0; jj < k; ++jj) {
      const auto p_row = fs.p.row(in.txt_nbrs[i][jj]);
      for (std::size_t l = 0; l < params.c; ++l) out[l] += weights[jj] * p_row[l];
    }
    fs.pseudo[i] = argmax_label(out);
  }
  return fs;
}

namespace detail {

inline double consistency_value(const Mat& q, const Mat& q_nbr) {
  double sum = 0.0;
  for (std::size_t i = 0; i < q.rows(); ++i) {
    const double overlap = dot(q.row(i), q_nbr.row(i));
    if (overlap <= 0.0)
      throw NumericError("zero assignment overlap with drawn neighbor of sample " +
                         std::to_string(i));
    sum -= std::log(std::max(overlap, kLogClamp));
  }
  return sum / static_cast<double>(q.rows());
}

// Raw balance statistic sum_l mean_l * log(mean_l); always <= 0.
inline double entropy_raw(const Mat& q, std::vector<double>* col_means = nullptr) {
  const double inv_n = 1.0 / static_cast<double>(q.rows());
  std::vector<double> mean(q.cols(), 0.0);
  for (std::size_t i = 0; i < q.rows(); ++i) {
    auto row = q.row(i);
    for (std::size_t l = 0; l < q.cols(); ++l) mean[l] += row[l];
  }
  double value = 0.0;
  for (double& m : mean) {
    m *= inv_n;
    value += m * std::log(std::max(m, kLogClamp));
  }
  if (col_means) *col_means = std::move(mean);
  return value;
}

inline double applied_entropy_sign(const LossWeights& w) {
  return w.paper_literal_entropy ? -1.0 : 1.0;
}

inline double instance_value(const Mat& q, const Mat& p, const std::vector<int>& draws,
                             double tau) {
  const std::size_t m = p.rows();
  if (m < 2) throw DataError("instance alignment needs at least 2 words");
  double sum = 0.0;
  std::vector<double> scaled(m - 1);
  for (std::size_t i = 0; i < q.rows(); ++i) {
    const int t = draws[i];
    std::size_t out = 0;
    for (std::size_t l = 0; l < m; ++l) {
      if (static_cast<int>(l) == t) continue;
      scaled[out++] = dot(q.row(i), p.row(l)) / tau;
    }
    const double positive = dot(q.row(i), p.row(t)) / tau;
    sum -= positive - log_sum_exp(scaled);
  }
  return sum / static_cast<double>(q.rows());
}

inline double prototype_value(const Mat& rho_img, const Mat& rho_txt, double tau) {
  const std::size_t c = rho_img.rows();
  if (c < 2) throw DataError("prototype alignment needs at least 2 clusters");
  double sum = 0.0;
  std::vector<double> scaled(c - 1);
  for (std::size_t j = 0; j < c; ++j) {
    std::size_t out = 0;
    for (std::size_t l = 0; l < c; ++l) {
      if (l == j) continue;
      scaled[out++] = dot(rho_img.row(j), rho_txt.row(l)) / tau;
    }
    const double positive = dot(rho_img.row(j), rho_txt.row(j)) / tau;
    sum -= positive - log_sum_exp(scaled);
  }
  return sum / static_cast<double>(c);
}

inline double semantic_ce_value(const Mat& q, const std::vector<int>& pseudo) {
  double sum = 0.0;
  for (std::size_t i = 0; i < q.rows(); ++i)
    sum -= std::log(std::max(q(i, pseudo[i]), kLogClamp));
  return sum / static_cast<double>(q.rows());
}

inline double attention_ce_value(const Mat& q, const Mat& p_prime) {
  double sum = 0.0;
  for (std::size_t i = 0; i < q.rows(); ++i) {
    auto target = q.row(i);
    auto pred = p_prime.row(i);
    for (std::size_t l = 0; l < q.cols(); ++l)
      sum -= target[l] * std::log(std::max(pred[l], kLogClamp));
  }
  return sum / static_cast<double>(q.rows());
}

// Push dL/d(prob) through softmax(W x + b) into the weight accumulators.
inline void softmax_affine_backward(std::span<const double> prob,
                                    std::span<const double> grad,
                                    std::span<const double> x, Mat& d_w,
                                    std::vector<double>& d_b, bool use_bias) {
  double inner = 0.0;
  for (std::size_t l = 0; l < prob.size(); ++l) inner += grad[l] * prob[l];
  for (std::size_t k = 0; k < prob.size(); ++k) {
    const double dz = prob[k] * (grad[k] - inner);
    if (dz == 0.0) continue;
    auto w_row = d_w.row(k);
    for (std::size_t j = 0; j < x.size(); ++j) w_row[j] += dz * x[j];
    if (use_bias) d_b[k] += dz;
  }
}

}  // namespace detail

inline LossBreakdown compose_breakdown(double consistency, double entropy_applied,
                                       double instance, double prototype,
                                       double semantic_ce, double semantic_attn,
                                       const LossWeights& w) {
  LossBreakdown b;
  b.consistency = consistency;
  b.entropy_term = entropy_applied;
  b.instance = instance;
  b.prototype = prototype;
  b.semantic_ce = semantic_ce;
  b.semantic_attn = semantic_attn;
  b.semantic = semantic_ce + semantic_attn;
  b.total = (b.consistency + b.entropy_term) +
            w.lambda_a * (b.instance + w.lambda_pa * b.prototype + w.lambda_sa * b.semantic);
  return b;
}

// ---- spec-level loss operations over precomputed assignments ----

// Eq.-1 style image consistency block: neighbor agreement plus balance term.
// draws[i] must be a member of the i-th neighborhood.
inline double loss_consistency(const SoftAssignment& q, const NeighborIndex& neighbors,
                               const std::vector<int>& draws, double eta,
                               bool paper_literal_entropy = false) {
  if (draws.size() != q.rows()) throw DataError("one neighbor draw per sample required");
  Mat q_nbr(q.rows(), q.cols());
  for (std::size_t i = 0; i < q.rows(); ++i) {
    if (!neighbors.contains(i, draws[i]))
      throw DataError("draw " + std::to_string(draws[i]) +
                      " is not a neighbor of sample " + std::to_string(i));
    auto src = q.row(draws[i]);
    std::copy(src.begin(), src.end(), q_nbr.row(i).begin());
  }
  const double sign = paper_literal_entropy ? -1.0 : 1.0;
  return detail::consistency_value(q, q_nbr) + sign * eta * detail::entropy_raw(q);
}

// Contrastive image-to-drawn-text alignment; the denominator excludes the
// positive index.
inline double loss_instance_align(const SoftAssignment& q, const SoftAssignment& p,
                                  const NeighborIndex& cross_neighbors,
                                  const std::vector<int>& draws, double tau_ia) {
  if (draws.size() != q.rows()) throw DataError("one text draw per sample required");
  for (std::size_t i = 0; i < q.rows(); ++i)
    if (!cross_neighbors.contains(i, draws[i]))
      throw DataError("drawn text " + std::to_string(draws[i]) +
                      " is not a cross-modal neighbor of sample " + std::to_string(i));
  return detail::instance_value(q, p, draws, tau_ia);
}

inline double loss_prototype_align(const PrototypePair& protos, const ModelParams& params,
                                   double tau_pa) {
  const Mat rho_img =
      head_forward(params.img_head_w, params.img_head_b, params.use_bias, protos.image);
  const Mat rho_txt =
      head_forward(params.txt_head_w, params.txt_head_b, params.use_bias, protos.text);
  return detail::prototype_value(rho_img, rho_txt, tau_pa);
}

// Cross entropy with the one-hot pseudo-labels as constant targets.
inline double loss_semantic_align(const SoftAssignment& q, const std::vector<int>& pseudo) {
  if (pseudo.size() != q.rows()) throw DataError("one pseudo-label per sample required");
  return detail::semantic_ce_value(q, pseudo);
}

// Auxiliary trainer for the attention matrices: soft cross entropy pulling the
// attention vote toward the (detached) image assignment.
inline double loss_attention_train(const SoftAssignment& q, const SoftAssignment& p_prime) {
  if (q.rows() != p_prime.rows() || q.cols() != p_prime.cols())
    throw DataError("assignment shape mismatch in attention training loss");
  return detail::attention_ce_value(q, p_prime);
}

// ---- total objective over a materialized batch ----

inline LossBreakdown loss_total(const BatchInputs& in, const ModelParams& params,
                                const LossWeights& w, ForwardState* forward_out = nullptr) {
  ForwardState fs = forward(in, params);
  const double consistency = detail::consistency_value(fs.q, fs.q_nbr);
  const double entropy_applied =
      detail::applied_entropy_sign(w) * w.eta * detail::entropy_raw(fs.q);
  const double instance = detail::instance_value(fs.q, fs.p, in.txt_draw, w.tau_ia);
  const double prototype = detail::prototype_value(fs.rho_img, fs.rho_txt, w.tau_pa);
  const double semantic_ce = detail::semantic_ce_value(fs.q, fs.pseudo);
  const double semantic_attn = detail::attention_ce_value(fs.q, fs.p_prime);
  LossBreakdown b = compose_breakdown(consistency, entropy_applied, instance, prototype,
                                      semantic_ce, semantic_attn, w);
  if (!std::isfinite(b.total)) throw NumericError("non-finite total loss");
  if (forward_out) *forward_out = std::move(fs);
  return b;
}

// Analytic gradients of loss_total w.r.t. all four parameter blocks. The
// pseudo-labels are constants (argmax blocks the gradient); the attention
// matrices receive gradient only through the auxiliary attention term.
inline GradientSet grad_total(const BatchInputs& in, const ModelParams& params,
                              const LossWeights& w,
                              LossBreakdown* breakdown_out = nullptr) {
  ForwardState fs = forward(in, params);
  const std::size_t b = fs.q.rows();
  const std::size_t c = params.c;
  const std::size_t m = fs.p.rows();
  const double inv_b = 1.0 / static_cast<double>(b);

  Mat dq(b, c), dq_nbr(b, c), dp(m, c), drho_img(c, c), drho_txt(c, c), dp_prime(b, c);

  // Consistency block.
  double consistency = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    const double overlap = dot(fs.q.row(i), fs.q_nbr.row(i));
    if (overlap <= 0.0)
      throw NumericError("zero assignment overlap with drawn neighbor of sample " +
                         std::to_string(i));
    consistency -= std::log(std::max(overlap, kLogClamp)) * inv_b;
    const double g = overlap > kLogClamp ? -inv_b / overlap : 0.0;
    auto gi = dq.row(i);
    auto gn = dq_nbr.row(i);
    auto qi = fs.q.row(i);
    auto qn = fs.q_nbr.row(i);
    for (std::size_t l = 0; l < c; ++l) {
      gi[l] += g * qn[l];
      gn[l] += g * qi[l];
    }
  }

  // Balance term on the batch column means.
  std::vector<double> col_means;
  const double entropy_value = detail::entropy_raw(fs.q, &col_means);
  const double sign = detail::applied_entropy_sign(w);
  const double entropy_applied = sign * w.eta * entropy_value;
  for (std::size_t l = 0; l < c; ++l) {
    const double dmean = col_means[l] > kLogClamp ? std::log(col_means[l]) + 1.0
                                                  : std::log(kLogClamp);
    const double g = sign * w.eta * dmean * inv_b;
    for (std::size_t i = 0; i < b; ++i) dq(i, l) += g;
  }

  // Instance-level alignment.
  double instance = 0.0;
  if (m < 2) throw DataError("instance alignment needs at least 2 words");
  {
    std::vector<double> scores(m);
    const double coef = w.lambda_a * inv_b / w.tau_ia;
    for (std::size_t i = 0; i < b; ++i) {
      const int t = in.txt_draw[i];
      for (std::size_t l = 0; l < m; ++l) scores[l] = dot(fs.q.row(i), fs.p.row(l));
      double mx = -std::numeric_limits<double>::max();
      for (std::size_t l = 0; l < m; ++l)
        if (static_cast<int>(l) != t) mx = std::max(mx, scores[l] / w.tau_ia);
      double denom = 0.0;
      for (std::size_t l = 0; l < m; ++l)
        if (static_cast<int>(l) != t) denom += std::exp(scores[l] / w.tau_ia - mx);
      instance -= (scores[t] / w.tau_ia - (mx + std::log(denom))) * inv_b;

      auto gi = dq.row(i);
      auto qi = fs.q.row(i);
      {  // positive pair
        auto pt = fs.p.row(t);
        auto gpt = dp.row(t);
        for (std::size_t l2 = 0; l2 < c; ++l2) {
          gi[l2] -= coef * pt[l2];
          gpt[l2] -= coef * qi[l2];
        }
      }
      for (std::size_t l = 0; l < m; ++l) {
        if (static_cast<int>(l) == t) continue;
        const double weight = std::exp(scores[l] / w.tau_ia - mx) / denom;
        const double cl = coef * weight;
        auto pl = fs.p.row(l);
        auto gpl = dp.row(l);
        for (std::size_t l2 = 0; l2 < c; ++l2) {
          gi[l2] += cl * pl[l2];
          gpl[l2] += cl * qi[l2];
        }
      }
    }
  }

  // Prototype-level alignment.
  double prototype = 0.0;
  if (c < 2) throw DataError("prototype alignment needs at least 2 clusters");
  {
    const double coef = w.lambda_a * w.lambda_pa / (static_cast<double>(c) * w.tau_pa);
    std::vector<double> r(c);
    for (std::size_t j = 0; j < c; ++j) {
      for (std::size_t l = 0; l < c; ++l) r[l] = dot(fs.rho_img.row(j), fs.rho_txt.row(l));
      double mx = -std::numeric_limits<double>::max();
      for (std::size_t l = 0; l < c; ++l)
        if (l != j) mx = std::max(mx, r[l] / w.tau_pa);
      double denom = 0.0;
      for (std::size_t l = 0; l < c; ++l)
        if (l != j) denom += std::exp(r[l] / w.tau_pa - mx);
      prototype -= (r[j] / w.tau_pa - (mx + std::log(denom))) / static_cast<double>(c);

      auto gj = drho_img.row(j);
      auto rj = fs.rho_img.row(j);
      {  // positive pair
        auto sj = fs.rho_txt.row(j);
        auto gsj = drho_txt.row(j);
        for (std::size_t l2 = 0; l2 < c; ++l2) {
          gj[l2] -= coef * sj[l2];
          gsj[l2] -= coef * rj[l2];
        }
      }
      for (std::size_t l = 0; l < c; ++l) {
        if (l == j) continue;
        const double weight = std::exp(r[l] / w.tau_pa - mx) / denom;
        const double cl = coef * weight;
        auto sl = fs.rho_txt.row(l);
        auto gsl = drho_txt.row(l);
        for (std::size_t l2 = 0; l2 < c; ++l2) {
          gj[l2] += cl * sl[l2];
          gsl[l2] += cl * rj[l2];
        }
      }
    }
  }

  // Semantic block: pseudo-label cross entropy into the image head.
  double semantic_ce = 0.0;
  {
    const double coef = w.lambda_a * w.lambda_sa * inv_b;
    for (std::size_t i = 0; i < b; ++i) {
      const double qt = fs.q(i, fs.pseudo[i]);
      semantic_ce -= std::log(std::max(qt, kLogClamp)) * inv_b;
      if (qt > kLogClamp) dq(i, fs.pseudo[i]) -= coef / qt;
    }
  }

  // Semantic block: attention-training cross entropy into p', then through the
  // attention softmax into both attention matrices and the text head.
  double semantic_attn = 0.0;
  {
    const double coef = w.lambda_a * w.lambda_sa * inv_b;
    for (std::size_t i = 0; i < b; ++i) {
      auto target = fs.q.row(i);
      auto pred = fs.p_prime.row(i);
      auto gp = dp_prime.row(i);
      for (std::size_t l = 0; l < c; ++l) {
        semantic_attn -= target[l] * std::log(std::max(pred[l], kLogClamp)) * inv_b;
        if (pred[l] > kLogClamp) gp[l] -= coef * target[l] / pred[l];
      }
    }
  }

  GradientSet grads = GradientSet::zeros(params);
  const std::size_t k = in.txt_nbrs.empty() ? 0 : in.txt_nbrs.front().size();
  if (w.lambda_a * w.lambda_sa != 0.0) {
    std::vector<double> dweights(k), dscores(k), acc_v(params.d), acc_wv(params.d);
    for (std::size_t i = 0; i < b; ++i) {
      auto gp = dp_prime.row(i);
      auto weights = fs.attn_weights.row(i);
      // Through the vote into each neighbor's assignment row, and onto the
      // softmax weights.
      for (std::size_t jj = 0; jj < k; ++jj) {
        const int word = in.txt_nbrs[i][jj];
        auto p_row = fs.p.row(word);
        auto gpw = dp.row(word);
        double dw = 0.0;
        for (std::size_t l = 0; l < c; ++l) {
          gpw[l] += weights[jj] * gp[l];
          dw += gp[l] * p_row[l];
        }
        dweights[jj] = dw;
      }
      double inner = 0.0;
      for (std::size_t jj = 0; jj < k; ++jj) inner += dweights[jj] * weights[jj];
      for (std::size_t jj = 0; jj < k; ++jj)
        dscores[jj] = weights[jj] * (dweights[jj] - inner);

      // d e_ij / d attn_img = (attn_txt v_j) u_i^T,  d e_ij / d attn_txt =
      // (attn_img u_i) v_j^T; both folded over the neighborhood first.
      std::fill(acc_wv.begin(), acc_wv.end(), 0.0);
      std::fill(acc_v.begin(), acc_v.end(), 0.0);
      for (std::size_t jj = 0; jj < k; ++jj) {
        const int word = in.txt_nbrs[i][jj];
        auto wv_row = fs.wv.row(word);
        auto v_row = in.v.row(word);
        for (std::size_t a = 0; a < params.d; ++a) {
          acc_wv[a] += dscores[jj] * wv_row[a];
          acc_v[a] += dscores[jj] * v_row[a];
        }
      }
      auto u_row = in.u.row(i);
      auto wiu_row = fs.wi_u.row(i);
      for (std::size_t a = 0; a < params.d; ++a) {
        if (acc_wv[a] != 0.0) {
          auto dst = grads.d_attn_img.row(a);
          for (std::size_t bb = 0; bb < params.d; ++bb) dst[bb] += acc_wv[a] * u_row[bb];
        }
        if (wiu_row[a] != 0.0) {
          auto dst = grads.d_attn_txt.row(a);
          for (std::size_t bb = 0; bb < params.d; ++bb) dst[bb] += wiu_row[a] * acc_v[bb];
        }
      }
    }
  }

  // Softmax/affine backward for every head evaluation.
  for (std::size_t i = 0; i < b; ++i) {
    detail::softmax_affine_backward(fs.q.row(i), dq.row(i), in.u.row(i),
                                    grads.d_img_head_w, grads.d_img_head_b,
                                    params.use_bias);
    detail::softmax_affine_backward(fs.q_nbr.row(i), dq_nbr.row(i), in.u_nbr.row(i),
                                    grads.d_img_head_w, grads.d_img_head_b,
                                    params.use_bias);
  }
  for (std::size_t j = 0; j < m; ++j)
    detail::softmax_affine_backward(fs.p.row(j), dp.row(j), in.v.row(j),
                                    grads.d_txt_head_w, grads.d_txt_head_b,
                                    params.use_bias);
  for (std::size_t j = 0; j < c; ++j) {
    detail::softmax_affine_backward(fs.rho_img.row(j), drho_img.row(j), in.proto_img.row(j),
                                    grads.d_img_head_w, grads.d_img_head_b,
                                    params.use_bias);
    detail::softmax_affine_backward(fs.rho_txt.row(j), drho_txt.row(j), in.proto_txt.row(j),
                                    grads.d_txt_head_w, grads.d_txt_head_b,
                                    params.use_bias);
  }
  grads.check_finite();

  if (breakdown_out) {
    *breakdown_out = compose_breakdown(consistency, entropy_applied, instance, prototype,
                                       semantic_ce, semantic_attn, w);
  }
  return grads;
}

}  // namespace mca
