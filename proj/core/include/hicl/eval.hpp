#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hicl/encoder.hpp"
#include "hicl/hierarchy.hpp"
#include "hicl/textproc.hpp"

namespace hicl::eval {

/// Average fractional ranks (ties share the mean of the ranks they span).
std::vector<double> fractional_ranks(std::span<const double> values);

/// Spearman's rho: Pearson correlation of the tie-averaged ranks.
/// Requires equal lengths >= 2 and non-constant inputs.
double spearman(std::span<const double> x, std::span<const double> y);

/// Cosine similarity of the two pooled sentence representations,
/// hierarchical encoding with dropout off.
double predict_similarity(const enc::EncoderParams& params,
                          const text::TokenSeq& first,
                          const text::TokenSeq& second, std::size_t slice_len,
                          hier::PoolingMode mode);

struct EvalReport {
  std::vector<double> predicted;
  double rho = 0.0;
  std::size_t pair_count = 0;

  std::string to_tsv() const;
};

EvalReport evaluate(const enc::EncoderParams& params,
                    const std::vector<text::StsRecord>& dataset,
                    std::size_t slice_len, hier::PoolingMode mode);

/// Desk-scale similarity task with known structure: each pair shares a
/// fraction p in {0, .2, .4, .6, .8, 1} of token positions and is scored
/// gold = 5p, so a lexical-overlap-sensitive encoder can reach a high
/// Spearman without any external data.
struct SyntheticPair {
  std::string first;
  std::string second;
  double gold = 0.0;
};

struct SyntheticData {
  std::vector<std::string> corpus_lines;  // both sentences of every pair
  std::vector<SyntheticPair> pairs;
};

SyntheticData generate_synthetic(std::uint64_t seed, std::size_t n_pairs,
                                 std::size_t vocab_size,
                                 std::size_t body_length);

}  // namespace hicl::eval
