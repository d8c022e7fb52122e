#pragma once

#include <optional>
#include <vector>

#include "hicl/graph.hpp"
#include "hicl/hierarchy.hpp"
#include "hicl/tensor.hpp"

namespace hicl::loss {

/// How segments sharing the anchor's parent sequence enter the local
/// contrastive denominator.
enum class Relationship { kPositive, kNegative, kNeither };

enum class Variant { kHicl, kHiclV2, kGlobalOnly, kLocalOnly };

struct LossConfig {
  double tau = 0.05;
  double alpha = 0.05;  // local weight
  double beta = 0.0;    // entailment weight, kHiclV2 only
  Relationship relationship = Relationship::kNeither;
  Variant variant = Variant::kHicl;

  /// Throws ConfigError on tau <= 0, alpha outside [0,1], beta < 0,
  /// or alpha + beta > 1.
  void validate() const;
};

struct LossResult {
  Var value;       // scalar mean over anchors
  Var per_anchor;  // (n, 1)
  /// Set when some anchor saw an empty negative set (its term is 0).
  bool empty_negatives = false;
};

/// InfoNCE over explicit rows. anchors/positives are aligned (n, d);
/// candidates is (m, d); include(i, j) selects which candidates enter
/// anchor i's denominator. The per-anchor loss is
///   log1p(sum_included exp((sim(a_i, c_j) - sim(a_i, p_i)) / tau)),
/// i.e. the similarities are shifted by the positive logit before
/// exponentiation. The shift keeps every exponent bounded by 2/tau and
/// the log1p keeps near-zero losses at full precision. Excluded
/// candidates receive exactly zero gradient.
LossResult info_nce(Graph& g, Var anchors, Var positives, Var candidates,
                    const Tensor& include, double tau);

/// Eq-1-style sequence-level loss: anchors are the pooled rows of the
/// first branch, the positive is the aligned row of the second branch,
/// negatives are the other in-batch rows of the second branch plus any
/// queue rows (gradient-isolated constants).
LossResult global_loss(Graph& g, const hier::HierarchicalBatch& branch_p,
                       const hier::HierarchicalBatch& branch_p_plus,
                       const LossConfig& cfg,
                       const Tensor* queue_rows = nullptr);

/// Segment-level loss with the configurable same-sequence treatment:
/// kNeither drops sibling segments from the denominator, kNegative keeps
/// them as negatives, kPositive additionally treats each sibling (from
/// the second branch) as a positive, averaging the per-positive terms.
/// Cross-sequence segments are always negatives.
LossResult local_loss(Graph& g, const hier::HierarchicalBatch& branch_p,
                      const hier::HierarchicalBatch& branch_p_plus,
                      const LossConfig& cfg);

/// Segment-to-parent loss: each segment row (first branch) is pulled
/// toward its own pooled sequence row (second branch) and away from the
/// other sequences' pooled rows.
LossResult entailment_loss(Graph& g, const hier::HierarchicalBatch& branch_p,
                           const hier::HierarchicalBatch& branch_p_plus,
                           const LossConfig& cfg);

struct LossBreakdown {
  Var total;  // scalar node; only the variant's terms are wired into it
  double total_value = 0.0;
  double global_term = 0.0;
  double local_term = 0.0;
  std::optional<double> entailment_term;  // kHiclV2 only
  bool empty_negatives = false;
};

/// Variant objective. kHicl: alpha*L_l + (1-alpha)*L_g. kHiclV2:
/// alpha*L_l + beta*L_e + (1-alpha-beta)*L_g. Zero-coefficient terms are
/// omitted from the total expression entirely (their values are still
/// reported), so degenerate weights collapse bitwise onto the simpler
/// objectives.
LossBreakdown total_loss(Graph& g, const hier::HierarchicalBatch& branch_p,
                         const hier::HierarchicalBatch& branch_p_plus,
                         const LossConfig& cfg,
                         const Tensor* queue_rows = nullptr);

}  // namespace hicl::loss
