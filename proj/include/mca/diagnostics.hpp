#pragma once

#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "mca/common.hpp"
#include "mca/embedding.hpp"
#include "mca/knn.hpp"
#include "mca/matrix.hpp"
#include "mca/model.hpp"

namespace mca {

// Empirical versions of the four neighborhood/confidence assumptions.
struct AssumptionAudit {
  double min_image_neighbor_dot = 0.0;   // worst q_i . q_j over image neighborhoods
  double min_cross_neighbor_dot = 0.0;   // worst q_i . p_j over text neighborhoods
  double max_prediction_confidence = 0.0;  // largest single assignment entry
  std::size_t max_reverse_neighbors = 0;   // most lists any one image appears in
};

inline AssumptionAudit audit_assumptions(const SoftAssignment& q, const SoftAssignment& p,
                                         const NeighborIndex& img_nbrs,
                                         const NeighborIndex& txt_nbrs) {
  if (img_nbrs.query_count == 0 || img_nbrs.k == 0 || txt_nbrs.k == 0)
    throw DataError("audit requires non-empty neighborhoods");
  if (img_nbrs.query_count != q.rows() || txt_nbrs.query_count != q.rows())
    throw DataError("neighborhoods do not cover the assignment rows");

  AssumptionAudit a;
  a.min_image_neighbor_dot = 2.0;
  a.min_cross_neighbor_dot = 2.0;
  std::vector<std::size_t> reverse_count(q.rows(), 0);
  for (std::size_t i = 0; i < q.rows(); ++i) {
    for (int j : img_nbrs.neighbors(i)) {
      a.min_image_neighbor_dot =
          std::min(a.min_image_neighbor_dot, dot(q.row(i), q.row(j)));
      ++reverse_count[j];
    }
    for (int j : txt_nbrs.neighbors(i)) {
      a.min_cross_neighbor_dot =
          std::min(a.min_cross_neighbor_dot, dot(q.row(i), p.row(j)));
    }
    for (double v : q.row(i))
      a.max_prediction_confidence = std::max(a.max_prediction_confidence, v);
  }
  for (std::size_t v : reverse_count)
    a.max_reverse_neighbors = std::max(a.max_reverse_neighbors, v);
  return a;
}

// User-supplied constants the bound depends on; the Lipschitz constants are
// not estimated from data.
struct BoundInputs {
  std::size_t n = 0;  // sample count
  std::size_t m = 0;  // word count
  std::size_t d = 0;
  std::size_t c = 0;
  double tau_ia = 1.0;
  double tau_pa = 1.0;
  double eta = 0.0;
  double lambda_a = 0.0;
  double lambda_pa = 0.0;
  double lambda_sa = 0.0;
  double lips_align = 1.0;      // Lipschitz constant of the prototype pairing
  double lips_head = 1.0;       // Lipschitz constant of the image head
  double max_embed_abs = 1.0;   // bound on |u| entries; measurable
  double lagrange_const = 1.0;  // unidentified constant from the mean value argument
  double delta = 0.05;
};

struct BoundReport {
  double coef_root_n = 0.0;    // multiplies 1/sqrt(n)
  double coef_tail = 0.0;      // multiplies sqrt(log(1/delta) / (2n))
  double term_root_n = 0.0;
  double term_tail = 0.0;
  double term_proto = 0.0;     // 2 d L_IS M_u / (n tau_pa)
  double margin = 0.0;
  AssumptionAudit audit;
  BoundInputs inputs;

  void print(std::ostream& os) const {
    os << "quantity                 value\n";
    os << "mu_image                 " << audit.min_image_neighbor_dot << "\n";
    os << "mu_cross                 " << audit.min_cross_neighbor_dot << "\n";
    os << "mu_confidence            " << audit.max_prediction_confidence << "\n";
    os << "max_reverse_neighbors    " << audit.max_reverse_neighbors << "\n";
    os << "c1 (per sqrt(n))         " << coef_root_n << "\n";
    os << "c2 (per deviation)       " << coef_tail << "\n";
    os << "term_root_n              " << term_root_n << "\n";
    os << "term_tail                " << term_tail << "\n";
    os << "term_proto               " << term_proto << "\n";
    os << "margin                   " << margin << "\n";
    os << "lagrange_const           " << inputs.lagrange_const
       << "  (unidentified constant from Lagrange mean value argument)\n";
  }

  void write_csv(std::ostream& os) const {
    os << "quantity,value\n";
    os << "mu_image," << audit.min_image_neighbor_dot << "\n";
    os << "mu_cross," << audit.min_cross_neighbor_dot << "\n";
    os << "mu_confidence," << audit.max_prediction_confidence << "\n";
    os << "max_reverse_neighbors," << audit.max_reverse_neighbors << "\n";
    os << "c1," << coef_root_n << "\n";
    os << "c2," << coef_tail << "\n";
    os << "term_root_n," << term_root_n << "\n";
    os << "term_tail," << term_tail << "\n";
    os << "term_proto," << term_proto << "\n";
    os << "margin," << margin << "\n";
  }
};

// Literal evaluation of the generalization-bound constants and the excess-risk
// margin they imply.
inline BoundReport bound_constants(const AssumptionAudit& audit, const BoundInputs& in) {
  if (audit.min_image_neighbor_dot <= 0.0)
    throw NumericError(
        "image neighborhood consistency bound violated: min q_i.q_j is not positive");
  if (audit.max_prediction_confidence <= 0.0)
    throw NumericError("prediction confidence bound violated: max |q_i| is not positive");
  if (in.delta <= 0.0 || in.delta >= 1.0)
    throw UsageError("delta must be in (0, 1)");
  if (in.n == 0) throw UsageError("sample count must be positive");

  const double mu_i = audit.min_image_neighbor_dot;
  const double mu_c = audit.min_cross_neighbor_dot;
  const double mu_p = audit.max_prediction_confidence;
  const double k_rev = static_cast<double>(audit.max_reverse_neighbors);
  const double dn = static_cast<double>(in.n);
  const double dm = static_cast<double>(in.m);
  const double dd = static_cast<double>(in.d);
  const double dc = static_cast<double>(in.c);
  const double conf_term = dc * std::log(1.0 / mu_p);

  BoundReport r;
  r.audit = audit;
  r.inputs = in;
  r.coef_root_n = 2.0 / mu_i + 2.0 * in.eta * in.lagrange_const +
                  2.0 * in.lambda_a * dm / in.tau_ia +
                  2.0 * in.lambda_a * in.lambda_pa * dd * in.lips_align *
                      in.max_embed_abs / in.tau_pa +
                  2.0 * in.lambda_a * in.lambda_sa * conf_term;
  r.coef_tail = (2.0 + 2.0 * k_rev) * std::log(1.0 / mu_i) +
                in.eta * in.lagrange_const +
                2.0 * in.lambda_a * (1.0 - mu_c) / in.tau_ia +
                in.lambda_a * in.lambda_pa * dd * dc * in.lips_head *
                    in.max_embed_abs * in.max_embed_abs / in.tau_pa +
                2.0 * in.lambda_a * in.lambda_sa * conf_term;
  r.term_root_n = r.coef_root_n / std::sqrt(dn);
  r.term_tail = r.coef_tail * std::sqrt(std::log(1.0 / in.delta) / (2.0 * dn));
  r.term_proto = 2.0 * dd * in.lips_align * in.max_embed_abs / (dn * in.tau_pa);
  r.margin = r.term_root_n + r.term_tail + r.term_proto;
  return r;
}

inline double measure_max_abs(const EmbeddingMatrix& m) {
  double mx = 0.0;
  for (float v : m.data) mx = std::max(mx, std::abs(static_cast<double>(v)));
  return mx;
}

}  // namespace mca
