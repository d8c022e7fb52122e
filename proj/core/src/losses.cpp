#include "hicl/losses.hpp"

#include <string>

#include "hicl/errors.hpp"

namespace hicl::loss {
namespace {

void check_same_batch(const hier::HierarchicalBatch& a,
                      const hier::HierarchicalBatch& b) {
  if (a.sequence_count() != b.sequence_count()) {
    throw NumericsError("loss: branches cover different batches (" +
                        std::to_string(a.sequence_count()) + " vs " +
                        std::to_string(b.sequence_count()) + " sequences)");
  }
}

/// Per-pair InfoNCE terms. anchors_n/positives_n/candidates_n must be
/// row-normalized. Returns (pairs, 1) of log1p-form terms; sets
/// *any_empty when some pair had no included candidates.
Var pair_terms(Graph& g, Var anchors_n, Var positives_n, Var candidates_n,
               const Tensor& include, double tau, bool* any_empty) {
  const std::size_t n = g.value(anchors_n).rows();
  const std::size_t m = g.value(candidates_n).rows();
  if (include.rows() != n || include.cols() != m) {
    throw NumericsError("info_nce: mask shape " + include.shape_str() +
                        " does not match " + std::to_string(n) + " anchors x " +
                        std::to_string(m) + " candidates");
  }
  if (any_empty) {
    for (std::size_t i = 0; i < n; ++i) {
      bool has = false;
      for (std::size_t j = 0; j < m && !has; ++j) has = include.at(i, j) != 0.0;
      if (!has) {
        *any_empty = true;
        break;
      }
    }
  }

  Var pos_logits = g.scale(g.rowwise_dot(anchors_n, positives_n), 1.0 / tau);
  if (m == 0) {
    // no candidates at all: every term is -log(1) = 0
    return g.scale(pos_logits, 0.0);
  }
  Var neg_logits =
      g.scale(g.matmul(anchors_n, g.transpose(candidates_n)), 1.0 / tau);
  Var shifted = g.sub(neg_logits, g.broadcast_to(pos_logits, n, m));
  Var masked = g.mul(g.exp(shifted), g.constant(include.clone()));
  return g.log1p(g.sum_cols(masked));
}

LossResult mean_of_terms(Graph& g, Var per_anchor, bool any_empty) {
  const std::size_t n = g.value(per_anchor).rows();
  LossResult result;
  result.per_anchor = per_anchor;
  result.value = g.scale(g.sum_all(per_anchor), 1.0 / static_cast<double>(n));
  result.empty_negatives = any_empty;
  return result;
}

}  // namespace

void LossConfig::validate() const {
  if (!(tau > 0.0)) throw ConfigError("loss config: tau must be > 0");
  if (alpha < 0.0 || alpha > 1.0) {
    throw ConfigError("loss config: alpha must be in [0, 1]");
  }
  if (beta < 0.0) throw ConfigError("loss config: beta must be >= 0");
  if (alpha + beta > 1.0) {
    throw ConfigError("loss config: alpha + beta must be <= 1");
  }
}

LossResult info_nce(Graph& g, Var anchors, Var positives, Var candidates,
                    const Tensor& include, double tau) {
  if (!(tau > 0.0)) throw ConfigError("info_nce: tau must be > 0");
  const std::size_t n = g.value(anchors).rows();
  if (g.value(positives).rows() != n) {
    throw NumericsError("info_nce: anchor/positive count mismatch");
  }
  Var anchors_n = g.row_normalize(anchors);
  Var positives_n = g.row_normalize(positives);
  const std::size_t m = g.value(candidates).rows();
  Var candidates_n = m > 0 ? g.row_normalize(candidates) : candidates;
  bool any_empty = false;
  Var terms =
      pair_terms(g, anchors_n, positives_n, candidates_n, include, tau,
                 &any_empty);
  return mean_of_terms(g, terms, any_empty);
}

LossResult global_loss(Graph& g, const hier::HierarchicalBatch& branch_p,
                       const hier::HierarchicalBatch& branch_p_plus,
                       const LossConfig& cfg, const Tensor* queue_rows) {
  check_same_batch(branch_p, branch_p_plus);
  const std::size_t n = branch_p.sequence_count();

  Var candidates = branch_p_plus.sequences.rows;
  std::size_t m = n;
  if (queue_rows != nullptr && queue_rows->rows() > 0) {
    Var queue = g.constant(queue_rows->clone());
    std::vector<Var> parts{candidates, queue};
    candidates = g.concat_rows(parts);
    m += queue_rows->rows();
  }

  Tensor include = Tensor::full({n, m}, 1.0);
  for (std::size_t i = 0; i < n; ++i) include.data()[i * m + i] = 0.0;

  return info_nce(g, branch_p.sequences.rows, branch_p_plus.sequences.rows,
                  candidates, include, cfg.tau);
}

LossResult local_loss(Graph& g, const hier::HierarchicalBatch& branch_p,
                      const hier::HierarchicalBatch& branch_p_plus,
                      const LossConfig& cfg) {
  check_same_batch(branch_p, branch_p_plus);

  // Word repetition can change segment counts between branches; local
  // terms cover pairs aligned by (sequence, segment index). Everything in
  // the second branch still serves as candidate rows.
  const auto& prov_a = branch_p.segments.provenance;
  const auto& prov_b = branch_p_plus.segments.provenance;
  std::vector<std::pair<std::size_t, std::size_t>> aligned;  // (row_a, row_b)
  for (std::size_t ia = 0; ia < prov_a.size(); ++ia) {
    for (std::size_t ib = 0; ib < prov_b.size(); ++ib) {
      if (prov_a[ia].sequence == prov_b[ib].sequence &&
          prov_a[ia].segment == prov_b[ib].segment) {
        aligned.emplace_back(ia, ib);
        break;
      }
    }
  }
  if (aligned.empty()) {
    throw NumericsError("local_loss: no aligned segment pairs");
  }

  const std::size_t m = prov_b.size();
  Var candidates_n = g.row_normalize(branch_p_plus.segments.rows);
  Var anchors_all_n = g.row_normalize(branch_p.segments.rows);

  // One (anchor, positive) pair per aligned dropout pair, plus one extra
  // pair per sibling when siblings are treated as positives.
  std::vector<std::size_t> pair_anchor_rows;   // rows into branch_p segments
  std::vector<std::size_t> pair_positive_rows; // rows into branch_p_plus
  std::vector<std::size_t> pair_owner;         // aligned-pair index
  std::vector<std::vector<double>> mask_rows;
  for (std::size_t p = 0; p < aligned.size(); ++p) {
    const auto [row_a, row_b] = aligned[p];
    const std::size_t seq = prov_a[row_a].sequence;

    std::vector<double> base_mask(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
      const bool same_sequence = prov_b[j].sequence == seq;
      const bool own_aligned = j == row_b;
      bool included;
      if (own_aligned) {
        included = false;  // the positive enters once, never as a candidate
      } else if (same_sequence) {
        included = cfg.relationship == Relationship::kNegative;
      } else {
        included = true;
      }
      base_mask[j] = included ? 1.0 : 0.0;
    }

    pair_anchor_rows.push_back(row_a);
    pair_positive_rows.push_back(row_b);
    pair_owner.push_back(p);
    mask_rows.push_back(base_mask);

    if (cfg.relationship == Relationship::kPositive) {
      for (std::size_t j = 0; j < m; ++j) {
        if (prov_b[j].sequence == seq && j != row_b) {
          pair_anchor_rows.push_back(row_a);
          pair_positive_rows.push_back(j);
          pair_owner.push_back(p);
          mask_rows.push_back(base_mask);
        }
      }
    }
  }

  const std::size_t pairs = pair_anchor_rows.size();
  Tensor include({pairs, m});
  for (std::size_t p = 0; p < pairs; ++p) {
    for (std::size_t j = 0; j < m; ++j) {
      include.data()[p * m + j] = mask_rows[p][j];
    }
  }

  Var anchors_n = g.gather_rows(anchors_all_n, pair_anchor_rows);
  Var positives_n = g.gather_rows(candidates_n, pair_positive_rows);

  bool any_empty = false;
  Var terms = pair_terms(g, anchors_n, positives_n, candidates_n, include,
                         cfg.tau, &any_empty);

  // Average multi-positive terms back onto their anchor.
  Var per_anchor = terms;
  if (pairs != aligned.size()) {
    Tensor avg = Tensor::zeros({aligned.size(), pairs});
    std::vector<std::size_t> counts(aligned.size(), 0);
    for (std::size_t p = 0; p < pairs; ++p) ++counts[pair_owner[p]];
    for (std::size_t p = 0; p < pairs; ++p) {
      avg.data()[pair_owner[p] * pairs + p] =
          1.0 / static_cast<double>(counts[pair_owner[p]]);
    }
    per_anchor = g.matmul(g.constant(std::move(avg)), terms);
  }
  return mean_of_terms(g, per_anchor, any_empty);
}

LossResult entailment_loss(Graph& g, const hier::HierarchicalBatch& branch_p,
                           const hier::HierarchicalBatch& branch_p_plus,
                           const LossConfig& cfg) {
  check_same_batch(branch_p, branch_p_plus);
  const std::size_t k = branch_p.segment_count();
  const std::size_t n = branch_p_plus.sequence_count();

  std::vector<std::size_t> parent_rows(k);
  Tensor include = Tensor::full({k, n}, 1.0);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t seq = branch_p.segments.provenance[i].sequence;
    parent_rows[i] = seq;
    include.data()[i * n + seq] = 0.0;
  }

  Var positives =
      g.gather_rows(branch_p_plus.sequences.rows, parent_rows);
  return info_nce(g, branch_p.segments.rows, positives,
                  branch_p_plus.sequences.rows, include, cfg.tau);
}

LossBreakdown total_loss(Graph& g, const hier::HierarchicalBatch& branch_p,
                         const hier::HierarchicalBatch& branch_p_plus,
                         const LossConfig& cfg, const Tensor* queue_rows) {
  cfg.validate();

  LossResult lg = global_loss(g, branch_p, branch_p_plus, cfg, queue_rows);
  LossResult ll = local_loss(g, branch_p, branch_p_plus, cfg);

  LossBreakdown out;
  out.global_term = g.value(lg.value).at(0);
  out.local_term = g.value(ll.value).at(0);
  out.empty_negatives = lg.empty_negatives || ll.empty_negatives;

  std::optional<LossResult> le;
  if (cfg.variant == Variant::kHiclV2) {
    le = entailment_loss(g, branch_p, branch_p_plus, cfg);
    out.entailment_term = g.value(le->value).at(0);
    out.empty_negatives = out.empty_negatives || le->empty_negatives;
  }

  // Zero-coefficient terms are left out of the expression so degenerate
  // configurations match the corresponding simpler variant bitwise.
  std::vector<std::pair<double, Var>> terms;
  switch (cfg.variant) {
    case Variant::kGlobalOnly:
      terms.emplace_back(1.0, lg.value);
      break;
    case Variant::kLocalOnly:
      terms.emplace_back(1.0, ll.value);
      break;
    case Variant::kHicl:
      if (cfg.alpha > 0.0) terms.emplace_back(cfg.alpha, ll.value);
      if (cfg.alpha < 1.0) terms.emplace_back(1.0 - cfg.alpha, lg.value);
      break;
    case Variant::kHiclV2: {
      const double gamma = 1.0 - cfg.alpha - cfg.beta;
      if (cfg.alpha > 0.0) terms.emplace_back(cfg.alpha, ll.value);
      if (cfg.beta > 0.0) terms.emplace_back(cfg.beta, le->value);
      if (gamma > 0.0) terms.emplace_back(gamma, lg.value);
      break;
    }
  }

  Var total;
  for (auto& [coef, var] : terms) {
    Var scaled = coef == 1.0 ? var : g.scale(var, coef);
    total = total.valid() ? g.add(total, scaled) : scaled;
  }
  if (!total.valid()) total = g.constant(0.0);  // all coefficients zero

  out.total = total;
  out.total_value = g.value(total).at(0);
  return out;
}

}  // namespace hicl::loss
