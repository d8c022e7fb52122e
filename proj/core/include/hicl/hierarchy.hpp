#pragma once

#include <vector>

#include "hicl/encoder.hpp"
#include "hicl/graph.hpp"
#include "hicl/textproc.hpp"

namespace hicl::hier {

enum class PoolingMode { kWeighted, kUnweighted };

/// Segment and sequence representations of one batch, plus the pooling
/// weights and the segment-row -> sequence-row mapping.
struct HierarchicalBatch {
  enc::EmbeddingBatch segments;   // (k, d)
  enc::EmbeddingBatch sequences;  // (n, d)
  std::vector<double> weights;            // per segment row, sums to 1/parent
  std::vector<std::size_t> parent;        // segment row -> sequence row
  std::vector<std::size_t> segment_lengths;  // token counts before CLS attach

  std::size_t segment_count() const { return parent.size(); }
  std::size_t sequence_count() const { return sequences.size(); }
};

struct PoolResult {
  enc::EmbeddingBatch sequences;
  std::vector<double> weights;
};

/// Average segment rows into one row per parent sequence. Weighted mode
/// weighs each segment by its share of the parent's tokens; unweighted
/// gives siblings equal weight. Parents are read from the segment
/// provenance and must form a contiguous 0..n-1 range.
PoolResult pool(const enc::EmbeddingBatch& segments,
                const std::vector<std::size_t>& lengths, PoolingMode mode);

/// slice -> encode -> pool over a batch of sequences, one encode call for
/// all segments.
HierarchicalBatch hierarchical_encode(enc::BoundEncoder& bound,
                                      const std::vector<text::TokenSeq>& batch,
                                      std::size_t slice_len, PoolingMode mode,
                                      enc::DropoutBranch branch);

HierarchicalBatch hierarchical_encode(Graph& graph,
                                      const enc::EncoderParams& params,
                                      const std::vector<text::TokenSeq>& batch,
                                      std::size_t slice_len, PoolingMode mode,
                                      enc::DropoutBranch branch,
                                      bool trainable = false);

}  // namespace hicl::hier
