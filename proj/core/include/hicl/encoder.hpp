#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "hicl/graph.hpp"
#include "hicl/rng.hpp"
#include "hicl/tensor.hpp"
#include "hicl/textproc.hpp"

namespace hicl::enc {

/// Weights of one pre-layer-norm transformer block.
struct LayerParams {
  Tensor ln1_gamma, ln1_beta;
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
  Tensor ln2_gamma, ln2_beta;
  Tensor w1, b1, w2, b2;  // GELU feed-forward of width 4d
};

struct EncoderParams {
  std::size_t d = 0;
  std::size_t n_heads = 0;
  std::size_t n_layers = 0;
  std::size_t vocab_size = 0;
  std::size_t max_positions = 512;

  Tensor token_embedding;     // vocab_size x d
  Tensor position_embedding;  // max_positions x d (restart at 0 per input)
  std::vector<LayerParams> layers;
  Tensor final_ln_gamma, final_ln_beta;

  /// All parameter tensors in the fixed serialization order:
  /// token_embedding, position_embedding, then per layer
  /// (ln1_gamma, ln1_beta, wq, bq, wk, bk, wv, bv, wo, bo,
  ///  ln2_gamma, ln2_beta, w1, b1, w2, b2), then final_ln_gamma,
  /// final_ln_beta.
  std::vector<Tensor*> tensors();
  std::vector<const Tensor*> tensors() const;
  std::size_t parameter_count() const;

  /// Deep copy with fresh storage for every tensor.
  EncoderParams clone() const;
};

/// Deterministic scaled-uniform initialization.
EncoderParams init_params(std::uint64_t seed, std::size_t d,
                          std::size_t n_heads, std::size_t n_layers,
                          std::size_t vocab_size,
                          std::size_t max_positions = 512);

enum class BranchLabel { kP, kPPlus, kOff };

/// One of the two dropout masks of a positive pair, or no dropout at all.
/// Masks are keyed by (seed, branch purpose, input content), so encoding
/// is reproducible and permutation-equivariant over the input list.
struct DropoutBranch {
  double rate = 0.0;
  BranchLabel label = BranchLabel::kOff;
  RngStream stream{0, RngPurpose::kDropoutA};

  static DropoutBranch off();
  static DropoutBranch p(double rate, std::uint64_t seed,
                         std::uint64_t salt = 0);
  static DropoutBranch p_plus(double rate, std::uint64_t seed,
                              std::uint64_t salt = 0);
  bool active() const { return label != BranchLabel::kOff && rate > 0.0; }
};

struct ProvenanceRow {
  static constexpr std::size_t kWholeSequence = static_cast<std::size_t>(-1);
  std::size_t sequence = 0;
  std::size_t segment = kWholeSequence;
  BranchLabel branch = BranchLabel::kOff;
};

/// A matrix of representation vectors plus where each row came from.
struct EmbeddingBatch {
  Var rows;  // (n, d)
  std::vector<ProvenanceRow> provenance;

  std::size_t size() const { return provenance.size(); }
  const Tensor& values() const { return rows.graph->value(rows); }
};

/// Encoder parameters materialized as leaves on a recording graph.
/// Binding once per graph lets both dropout branches of a step share the
/// same leaves, so their gradients accumulate together.
struct BoundEncoder {
  Graph* graph = nullptr;
  const EncoderParams* dims = nullptr;
  std::vector<Var> leaves;  // aligned with EncoderParams::tensors()

  Var leaf(std::size_t i) const { return leaves[i]; }
};

BoundEncoder bind(Graph& graph, const EncoderParams& params, bool trainable);

/// Encode each token-id slice independently; the representation is the
/// hidden state at the leading CLS position. Slices that do not already
/// begin with CLS get one prepended (interior segments); slicing-length
/// accounting is unaffected.
EmbeddingBatch encode(BoundEncoder& bound,
                      std::span<const std::vector<text::TokenId>> inputs,
                      DropoutBranch branch);

/// Convenience overload that binds on the spot.
EmbeddingBatch encode(Graph& graph, const EncoderParams& params,
                      std::span<const std::vector<text::TokenId>> inputs,
                      DropoutBranch branch, bool trainable = false);

/// Two encodes of the same inputs under the p and p-plus masks; row i of
/// the results forms the positive pair.
std::pair<EmbeddingBatch, EmbeddingBatch> encode_pair(
    BoundEncoder& bound, std::span<const std::vector<text::TokenId>> inputs,
    double dropout_rate, std::uint64_t seed, std::uint64_t salt = 0);

}  // namespace hicl::enc
