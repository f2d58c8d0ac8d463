#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "mca/common.hpp"
#include "mca/embedding.hpp"
#include "mca/knn.hpp"
#include "mca/losses.hpp"
#include "mca/matrix.hpp"
#include "mca/metrics.hpp"
#include "mca/model.hpp"
#include "mca/rng.hpp"
#include "mca/semantic_space.hpp"

namespace mca {

enum class Optimizer { kAdam, kSgd };

struct TrainConfig {
  double lr = 1e-3;
  int epochs = 100;
  int batch_size = 128;
  std::size_t c = 3;
  std::size_t k_img = 5;    // in-modal neighborhood size
  std::size_t k_txt = 5;    // cross-modal neighborhood size
  std::size_t k_proto = 3;  // words averaged into each text prototype
  double tau_ia = 0.05;
  double tau_pa = 0.6;
  double eta = 10.0;
  double lambda_a = 1.0;
  double lambda_pa = 1.0;
  double lambda_sa = 5.0;
  std::size_t gamma_r = 1000;
  std::uint32_t gamma_h = 0;
  double rho_u = 0.05;
  std::uint64_t seed = 1;
  Optimizer optimizer = Optimizer::kAdam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  bool use_bias = true;
  bool paper_literal_entropy = false;
  bool full_data_prototypes = false;
  int threads = 1;

  LossWeights loss_weights() const {
    return {eta, tau_ia, tau_pa, lambda_a, lambda_pa, lambda_sa, paper_literal_entropy};
  }

  void validate() const {
    if (lr < 0.0) throw UsageError("learning rate must be >= 0");
    if (epochs < 1 || batch_size < 1) throw UsageError("epochs and batch size must be >= 1");
    if (tau_ia <= 0.0 || tau_pa <= 0.0) throw UsageError("temperatures must be > 0");
    if (c < 1 || k_img < 1 || k_txt < 1 || k_proto < 1)
      throw UsageError("counts must be >= 1");
  }
};

struct TrainState {
  ModelParams params;
  GradientSet adam_m;
  GradientSet adam_v;
  long step = 0;
  int next_epoch = 0;
  std::vector<LossBreakdown> history;  // one entry per step
  bool aborted = false;
};

// Shuffled partition of [0, n): every index appears exactly once per epoch.
inline std::vector<std::vector<int>> epoch_batches(std::size_t n, std::size_t batch_size,
                                                   Rng& rng) {
  if (batch_size > n) throw DataError("batch size exceeds sample count");
  std::vector<int> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = static_cast<int>(i);
  rng.shuffle(perm);
  std::vector<std::vector<int>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    batches.emplace_back(perm.begin() + start, perm.begin() + end);
  }
  return batches;
}

// Stateful view of the same contract: one uniform-without-replacement batch
// per call, reshuffling at epoch boundaries.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::size_t batch_size, std::uint64_t seed)
      : n_(n), batch_size_(batch_size), seed_(seed) {}

  std::vector<int> next() {
    if (cursor_ >= pending_.size()) {
      Rng rng = Rng::derive(seed_, 0x626174636865735ULL + static_cast<std::uint64_t>(epoch_));
      pending_ = epoch_batches(n_, batch_size_, rng);
      cursor_ = 0;
      ++epoch_;
    }
    return pending_[cursor_++];
  }

 private:
  std::size_t n_, batch_size_;
  std::uint64_t seed_;
  std::uint64_t epoch_ = 0;
  std::vector<std::vector<int>> pending_;
  std::size_t cursor_ = 0;
};

namespace detail {

inline void apply_update(std::span<double> param, std::span<double> m, std::span<double> v,
                         std::span<const double> grad, const TrainConfig& cfg, long t) {
  if (cfg.optimizer == Optimizer::kSgd) {
    for (std::size_t i = 0; i < param.size(); ++i) param[i] -= cfg.lr * grad[i];
    return;
  }
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double corr1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double corr2 = 1.0 - std::pow(b2, static_cast<double>(t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
    v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
    const double mhat = m[i] / corr1;
    const double vhat = v[i] / corr2;
    param[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
  }
}

inline void optimizer_step(TrainState& st, const GradientSet& g, const TrainConfig& cfg) {
  const long t = st.step;
  auto upd = [&](Mat& p, Mat& m, Mat& v, const Mat& gr) {
    apply_update({p.data(), p.rows() * p.cols()}, {m.data(), m.rows() * m.cols()},
                 {v.data(), v.rows() * v.cols()}, {gr.data(), gr.rows() * gr.cols()}, cfg,
                 t);
  };
  upd(st.params.img_head_w, st.adam_m.d_img_head_w, st.adam_v.d_img_head_w, g.d_img_head_w);
  upd(st.params.txt_head_w, st.adam_m.d_txt_head_w, st.adam_v.d_txt_head_w, g.d_txt_head_w);
  upd(st.params.attn_img, st.adam_m.d_attn_img, st.adam_v.d_attn_img, g.d_attn_img);
  upd(st.params.attn_txt, st.adam_m.d_attn_txt, st.adam_v.d_attn_txt, g.d_attn_txt);
  if (st.params.use_bias) {
    apply_update(st.params.img_head_b, st.adam_m.d_img_head_b, st.adam_v.d_img_head_b,
                 g.d_img_head_b, cfg, t);
    apply_update(st.params.txt_head_b, st.adam_m.d_txt_head_b, st.adam_v.d_txt_head_b,
                 g.d_txt_head_b, cfg, t);
  }
}

}  // namespace detail

// Prototypes from an explicit double matrix of rows (batch view).
inline Mat image_prototypes(const SoftAssignment& q, const Mat& u) {
  if (q.rows() != u.rows()) throw DataError("assignment/embedding row mismatch");
  const std::size_t c = q.cols();
  Mat protos(c, u.cols());
  std::vector<double> mass(c, 0.0);
  for (std::size_t i = 0; i < u.rows(); ++i) {
    auto emb = u.row(i);
    for (std::size_t l = 0; l < c; ++l) {
      const double w = q(i, l);
      mass[l] += w;
      auto dst = protos.row(l);
      for (std::size_t j = 0; j < u.cols(); ++j) dst[j] += w * emb[j];
    }
  }
  for (std::size_t l = 0; l < c; ++l) {
    if (mass[l] <= 0.0)
      throw NumericError("cluster " + std::to_string(l) + " has zero assignment mass");
    for (double& v : protos.row(l)) v /= mass[l];
  }
  return protos;
}

using EpochCallback = std::function<void(int epoch, const TrainState&)>;

// Mini-batch descent on the full objective. Neighborhoods are prebuilt and
// frozen; prototypes come from the current batch unless full_data_prototypes
// is set. A non-finite step aborts, keeping the last good parameters.
inline TrainState train(const EmbeddingMatrix& images, const NeighborIndex& img_nbrs,
                        const NeighborIndex& txt_nbrs, const SemanticSpace& space,
                        const TrainConfig& cfg, std::ostream* log_csv = nullptr,
                        const EpochCallback& on_epoch = {},
                        const TrainState* resume_from = nullptr) {
  cfg.validate();
  if (space.size() == 0) throw DataError("semantic space is empty");
  if (img_nbrs.query_count != images.n || txt_nbrs.query_count != images.n)
    throw DataError("neighbor index does not cover the training rows");
  const std::size_t batch_size = std::min<std::size_t>(cfg.batch_size, images.n);

  TrainState st;
  if (resume_from) {
    st = *resume_from;
  } else {
    st.params = ModelParams::init(cfg.c, images.d, cfg.seed, cfg.use_bias);
    st.adam_m = GradientSet::zeros(st.params);
    st.adam_v = GradientSet::zeros(st.params);
  }

  const Mat v_mat = to_mat(space.kept_embeddings);
  const Mat u_all = to_mat(images);
  const LossWeights weights = cfg.loss_weights();

  if (log_csv && st.step == 0) *log_csv << "step,l_I,l_ia,l_pa,l_sa,l_total\n";

  for (int epoch = st.next_epoch; epoch < cfg.epochs; ++epoch) {
    Rng epoch_rng =
        Rng::derive(cfg.seed, 0xe90c5ULL + static_cast<std::uint64_t>(epoch));
    const auto batches = epoch_batches(images.n, batch_size, epoch_rng);
    for (const auto& rows : batches) {
      const std::size_t b = rows.size();
      BatchInputs in;
      in.v = v_mat;
      in.u = Mat(b, images.d);
      in.u_nbr = Mat(b, images.d);
      in.txt_draw.resize(b);
      in.txt_nbrs.resize(b);
      for (std::size_t i = 0; i < b; ++i) {
        const int row = rows[i];
        auto src = u_all.row(row);
        std::copy(src.begin(), src.end(), in.u.row(i).begin());
        const auto img_cands = img_nbrs.neighbors(row);
        const int drawn = img_cands[epoch_rng.index(img_cands.size())];
        auto nsrc = u_all.row(drawn);
        std::copy(nsrc.begin(), nsrc.end(), in.u_nbr.row(i).begin());
        const auto txt_cands = txt_nbrs.neighbors(row);
        in.txt_nbrs[i].assign(txt_cands.begin(), txt_cands.end());
        in.txt_draw[i] = txt_cands[epoch_rng.index(txt_cands.size())];
      }

      ModelParams before = st.params;
      try {
        SoftAssignment q_proto =
            cfg.full_data_prototypes
                ? head_forward(st.params.img_head_w, st.params.img_head_b,
                               st.params.use_bias, u_all)
                : head_forward(st.params.img_head_w, st.params.img_head_b,
                               st.params.use_bias, in.u);
        const Mat proto_img = cfg.full_data_prototypes
                                  ? image_prototypes(q_proto, u_all)
                                  : image_prototypes(q_proto, in.u);
        const PrototypePair protos = text_prototypes(proto_img, space, cfg.k_proto);
        in.proto_img = protos.image;
        in.proto_txt = protos.text;

        LossBreakdown breakdown;
        const GradientSet grads = grad_total(in, st.params, weights, &breakdown);
        if (!std::isfinite(breakdown.total)) throw NumericError("non-finite total loss");

        ++st.step;
        detail::optimizer_step(st, grads, cfg);
        if (!st.params.all_finite()) throw NumericError("non-finite parameters");
        st.history.push_back(breakdown);
        if (log_csv) {
          *log_csv << st.step << ',' << (breakdown.consistency + breakdown.entropy_term)
                   << ',' << breakdown.instance << ',' << breakdown.prototype << ','
                   << breakdown.semantic << ',' << breakdown.total << '\n';
        }
      } catch (const NumericError&) {
        st.params = std::move(before);
        st.aborted = true;
        st.next_epoch = epoch;
        return st;
      }
    }
    st.next_epoch = epoch + 1;
    if (on_epoch) on_epoch(epoch, st);
  }
  return st;
}

// Hungarian-matched metrics of argmax assignments against ground truth.
inline MetricReport evaluate(const ModelParams& params, const EmbeddingMatrix& images,
                             const std::vector<int>& labels) {
  if (labels.size() != images.n) throw DataError("labels missing or wrong length");
  const SoftAssignment q = image_head_forward(params, images);
  return evaluate_clustering(hard_labels(q), labels);
}

}  // namespace mca
