#include "hicl/hierarchy.hpp"

#include <string>

#include "hicl/errors.hpp"

namespace hicl::hier {

PoolResult pool(const enc::EmbeddingBatch& segments,
                const std::vector<std::size_t>& lengths, PoolingMode mode) {
  const std::size_t k = segments.size();
  if (k == 0) throw NumericsError("pool: no segment rows");
  if (lengths.size() != k) {
    throw NumericsError("pool: " + std::to_string(lengths.size()) +
                        " lengths for " + std::to_string(k) + " rows");
  }

  std::size_t n_sequences = 0;
  for (const enc::ProvenanceRow& row : segments.provenance) {
    if (row.segment == enc::ProvenanceRow::kWholeSequence) {
      throw NumericsError("pool: row without a segment id (orphan)");
    }
    n_sequences = std::max(n_sequences, row.sequence + 1);
  }

  std::vector<std::size_t> totals(n_sequences, 0);
  std::vector<std::size_t> counts(n_sequences, 0);
  for (std::size_t i = 0; i < k; ++i) {
    if (lengths[i] == 0) {
      throw NumericsError("pool: zero-length segment at row " +
                          std::to_string(i));
    }
    totals[segments.provenance[i].sequence] += lengths[i];
    counts[segments.provenance[i].sequence] += 1;
  }
  for (std::size_t s = 0; s < n_sequences; ++s) {
    if (counts[s] == 0) {
      throw NumericsError("pool: sequence " + std::to_string(s) +
                          " has no segments (orphan mapping)");
    }
  }

  PoolResult result;
  result.weights.resize(k);
  Tensor weight_matrix = Tensor::zeros({n_sequences, k});
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t s = segments.provenance[i].sequence;
    const double w =
        mode == PoolingMode::kWeighted
            ? static_cast<double>(lengths[i]) / static_cast<double>(totals[s])
            : 1.0 / static_cast<double>(counts[s]);
    result.weights[i] = w;
    weight_matrix.data()[s * k + i] = w;
  }

  Graph& g = *segments.rows.graph;
  result.sequences.rows =
      g.matmul(g.constant(std::move(weight_matrix)), segments.rows);
  const enc::BranchLabel label = segments.provenance.empty()
                                     ? enc::BranchLabel::kOff
                                     : segments.provenance.front().branch;
  for (std::size_t s = 0; s < n_sequences; ++s) {
    result.sequences.provenance.push_back(
        enc::ProvenanceRow{s, enc::ProvenanceRow::kWholeSequence, label});
  }
  return result;
}

HierarchicalBatch hierarchical_encode(enc::BoundEncoder& bound,
                                      const std::vector<text::TokenSeq>& batch,
                                      std::size_t slice_len, PoolingMode mode,
                                      enc::DropoutBranch branch) {
  if (batch.empty()) throw NumericsError("hierarchical_encode: empty batch");

  HierarchicalBatch hb;
  std::vector<std::vector<text::TokenId>> inputs;
  std::vector<enc::ProvenanceRow> provenance;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (text::SegmentView& seg : text::slice(batch[i], slice_len, i)) {
      hb.segment_lengths.push_back(seg.length());
      hb.parent.push_back(i);
      provenance.push_back(enc::ProvenanceRow{i, seg.index, branch.label});
      inputs.push_back(std::move(seg.ids));
    }
  }

  hb.segments = enc::encode(bound, inputs, branch);
  hb.segments.provenance = std::move(provenance);

  PoolResult pooled = pool(hb.segments, hb.segment_lengths, mode);
  hb.sequences = std::move(pooled.sequences);
  hb.weights = std::move(pooled.weights);
  return hb;
}

HierarchicalBatch hierarchical_encode(Graph& graph,
                                      const enc::EncoderParams& params,
                                      const std::vector<text::TokenSeq>& batch,
                                      std::size_t slice_len, PoolingMode mode,
                                      enc::DropoutBranch branch,
                                      bool trainable) {
  enc::BoundEncoder bound = enc::bind(graph, params, trainable);
  return hierarchical_encode(bound, batch, slice_len, mode, branch);
}

}  // namespace hicl::hier
