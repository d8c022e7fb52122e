#pragma once

#include <string>
#include <vector>

#include "hicl/encoder.hpp"
#include "hicl/hierarchy.hpp"
#include "hicl/textproc.hpp"

namespace hicl::bench {

/// Attention token-pair counts for encoding one sequence whole versus
/// sliced. Feed-forward work is linear in tokens and identical across
/// the two modes, so it is not counted.
struct CostModel {
  double full_units = 0.0;   // |seq|^2
  double hicl_units = 0.0;   // L^2 (l-1) + r^2
  double ratio = 0.0;        // full / hicl
  std::size_t segments = 0;  // l
  std::size_t remainder = 0; // r, the final segment's length
};

CostModel cost_model(std::size_t seq_len, std::size_t slice_len);

struct CostReport {
  std::size_t slice_len = 0;
  std::size_t repetitions = 0;
  std::size_t corpus_size = 0;
  bool parallel_segments = false;

  double predicted_full_units = 0.0;  // summed over the corpus
  double predicted_hicl_units = 0.0;
  double predicted_ratio = 0.0;

  double full_seconds = 0.0;  // median over repetitions
  double hicl_seconds = 0.0;
  double measured_ratio = 0.0;

  std::string to_tsv() const;
  std::string to_kv() const;  // machine-readable key=value block
};

/// Time whole-sequence encoding against slice-encode-pool over the same
/// corpus, dropout off, medians over `repetitions` passes after one
/// warm-up pass per mode. `parallel_segments` fans segment encodes out
/// across threads (each on its own graph) and is reported separately.
CostReport wallclock_bench(const enc::EncoderParams& params,
                           const std::vector<text::TokenSeq>& corpus,
                           std::size_t slice_len, std::size_t repetitions,
                           bool parallel_segments = false);

}  // namespace hicl::bench
