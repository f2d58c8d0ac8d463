#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "mca/common.hpp"
#include "mca/embedding.hpp"
#include "mca/knn.hpp"
#include "mca/losses.hpp"
#include "mca/matrix.hpp"
#include "mca/metrics.hpp"
#include "mca/model.hpp"
#include "mca/semantic_space.hpp"
#include "mca/trainer.hpp"

namespace mca {

enum class LabelMethod { kSmp, kPmcp, kMca };

inline const char* label_method_name(LabelMethod m) {
  switch (m) {
    case LabelMethod::kSmp: return "SMP";
    case LabelMethod::kPmcp: return "PMCP";
    default: return "MCA";
  }
}

// Single-modal pseudo-labels: argmax of the image assignments.
inline std::vector<int> label_smp(const SoftAssignment& q) { return hard_labels(q); }

// Prototype-mapping pseudo-labels: each image takes the cluster of its nearest
// text prototype.
inline std::vector<int> label_pmcp(const EmbeddingMatrix& u, const PrototypePair& protos) {
  if (protos.text.rows() == 0) throw DataError("empty prototypes");
  std::vector<int> labels(u.n);
  for (std::size_t i = 0; i < u.n; ++i) {
    int best = 0;
    double best_sim = -std::numeric_limits<double>::max();
    for (std::size_t l = 0; l < protos.text.rows(); ++l) {
      const double s = dot(std::span<const double>(protos.text.row(l)),
                           std::span<const float>(u.row(i)));
      if (s > best_sim) {
        best_sim = s;
        best = static_cast<int>(l);
      }
    }
    labels[i] = best;
  }
  return labels;
}

// Attention-voted pseudo-labels: the trained bilinear attention weights each
// image's neighboring texts, the vote is argmaxed.
inline std::vector<int> label_mca(const EmbeddingMatrix& images, const Mat& words,
                                  const NeighborIndex& txt_nbrs,
                                  const ModelParams& params) {
  const SoftAssignment p =
      head_forward(params.txt_head_w, params.txt_head_b, params.use_bias, words);
  Mat wv(words.rows(), params.d);
  for (std::size_t j = 0; j < words.rows(); ++j)
    mat_vec(params.attn_txt, words.row(j), wv.row(j));

  std::vector<int> labels(images.n);
  std::vector<double> u(params.d), wu(params.d);
  for (std::size_t i = 0; i < images.n; ++i) {
    auto src = images.row(i);
    for (std::size_t j = 0; j < params.d; ++j) u[j] = static_cast<double>(src[j]);
    mat_vec(params.attn_img, u, wu);
    const auto nbrs = txt_nbrs.neighbors(i);
    std::vector<double> scores(nbrs.size());
    for (std::size_t jj = 0; jj < nbrs.size(); ++jj)
      scores[jj] = dot(std::span<const double>(wu), std::span<const double>(wv.row(nbrs[jj])));
    softmax_inplace(scores);
    std::vector<double> vote(params.c, 0.0);
    for (std::size_t jj = 0; jj < nbrs.size(); ++jj) {
      auto p_row = p.row(nbrs[jj]);
      for (std::size_t l = 0; l < params.c; ++l) vote[l] += scores[jj] * p_row[l];
    }
    labels[i] = argmax_label(vote);
  }
  return labels;
}

struct LabelerRun {
  LabelMethod method;
  std::uint64_t seed = 0;
  std::vector<double> acc_per_epoch;
};

struct BenchResult {
  std::vector<LabelerRun> runs;

  double mean_final(LabelMethod m) const {
    double sum = 0.0;
    int count = 0;
    for (const auto& r : runs) {
      if (r.method != m || r.acc_per_epoch.empty()) continue;
      sum += r.acc_per_epoch.back();
      ++count;
    }
    return count == 0 ? 0.0 : sum / count;
  }

  void write_csv(std::ostream& os) const {
    os << "method,seed,epoch,acc\n";
    for (const auto& r : runs)
      for (std::size_t e = 0; e < r.acc_per_epoch.size(); ++e)
        os << label_method_name(r.method) << ',' << r.seed << ',' << e << ','
           << r.acc_per_epoch[e] << '\n';
  }
};

// Trains MCA `repeats` times on the given data, snapshotting all three
// labelers' Hungarian-matched accuracy after every epoch.
inline BenchResult run_bench(const EmbeddingMatrix& images, const std::vector<int>& truth,
                             const SemanticSpace& space, const NeighborIndex& img_nbrs,
                             const NeighborIndex& txt_nbrs, const TrainConfig& base_cfg,
                             int repeats) {
  if (truth.size() != images.n) throw DataError("bench needs ground-truth labels");
  BenchResult result;
  const Mat words = to_mat(space.kept_embeddings);
  for (int rep = 0; rep < repeats; ++rep) {
    TrainConfig cfg = base_cfg;
    cfg.seed = base_cfg.seed + static_cast<std::uint64_t>(rep);
    LabelerRun smp{LabelMethod::kSmp, cfg.seed, {}};
    LabelerRun pmcp{LabelMethod::kPmcp, cfg.seed, {}};
    LabelerRun mca_run{LabelMethod::kMca, cfg.seed, {}};
    auto snapshot = [&](int, const TrainState& st) {
      const SoftAssignment q = image_head_forward(st.params, images);
      smp.acc_per_epoch.push_back(accuracy_hungarian(label_smp(q), truth));
      const PrototypePair protos = build_prototypes(q, images, space, cfg.k_proto);
      pmcp.acc_per_epoch.push_back(accuracy_hungarian(label_pmcp(images, protos), truth));
      mca_run.acc_per_epoch.push_back(
          accuracy_hungarian(label_mca(images, words, txt_nbrs, st.params), truth));
    };
    train(images, img_nbrs, txt_nbrs, space, cfg, nullptr, snapshot);
    result.runs.push_back(std::move(smp));
    result.runs.push_back(std::move(pmcp));
    result.runs.push_back(std::move(mca_run));
  }
  return result;
}

}  // namespace mca
