#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace hicl::text {

using TokenId = std::uint32_t;

/// Token table with five reserved specials at fixed ids 0..4.
class Vocab {
 public:
  static constexpr TokenId kCls = 0;
  static constexpr TokenId kSep = 1;
  static constexpr TokenId kPad = 2;
  static constexpr TokenId kUnk = 3;
  static constexpr TokenId kMask = 4;
  static constexpr std::size_t kNumSpecials = 5;

  Vocab();

  /// Frequency-ranked vocabulary from raw text lines; ties broken
  /// lexicographically so builds are deterministic.
  static Vocab build(const std::vector<std::string>& lines,
                     std::size_t max_tokens = 30000);

  /// One body token per line; line number = id - 5.
  static Vocab load(const std::string& path);
  void save(const std::string& path) const;

  TokenId id_of(std::string_view token) const;  // kUnk fallback
  std::size_t size() const { return tokens_.size(); }
  const std::string& token(TokenId id) const { return tokens_[id]; }

  void add(const std::string& token);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

/// A tokenized sequence; always starts with CLS and ends with SEP, so
/// length >= 2 with specials counted.
struct TokenSeq {
  std::vector<TokenId> ids;
  std::size_t source_line = 0;

  std::size_t length() const { return ids.size(); }
};

/// One slice of a parent sequence.
struct SegmentView {
  std::size_t parent = 0;       // sequence index within its batch
  std::size_t index = 0;        // 0-based position among siblings
  std::vector<TokenId> ids;

  std::size_t length() const { return ids.size(); }
};

/// Whitespace-split, ASCII-lowercased, UNK-mapped; CLS/SEP attached.
/// An empty line yields [CLS, SEP]. Bodies longer than 510 tokens are
/// truncated so the full sequence never exceeds 512.
TokenSeq tokenize(std::string_view line, const Vocab& vocab,
                  std::size_t max_len = 512);

/// Number of segments produced by slicing a length-n sequence at L.
std::size_t segment_count(std::size_t seq_len, std::size_t slice_len);

/// Greedy non-overlapping runs of exactly L tokens; the remainder forms
/// the final segment of length in [1, L]. Concatenating the segments in
/// order reproduces the parent.
std::vector<SegmentView> slice(const TokenSeq& seq, std::size_t slice_len,
                               std::size_t parent_index = 0);

struct CorpusStats {
  /// Upper bounds of the token-length buckets:
  /// [0,32], (32,64], (64,96], (96,128], (128,256], (256,512], overflow.
  std::vector<std::size_t> bucket_upper;
  std::vector<std::size_t> bucket_counts;
  std::vector<double> proportions_percent;  // sums to 100
  /// histogram[k] = number of sequences slicing into exactly k segments.
  std::unordered_map<std::size_t, std::size_t> segment_histogram;
  double fraction_at_most_3_segments = 0.0;
  std::size_t sequence_count = 0;
  std::size_t slice_len = 0;

  std::string to_tsv() const;
};

CorpusStats corpus_stats(const std::vector<TokenSeq>& corpus,
                         std::size_t slice_len);

/// One sequence per line, order preserved.
std::vector<TokenSeq> load_corpus(const std::string& path, const Vocab& vocab);
std::vector<std::string> load_lines(const std::string& path);

struct StsRecord {
  TokenSeq first;
  TokenSeq second;
  double gold = 0.0;  // [0, 5]
};

/// Tab-separated sentence1, sentence2, score. Malformed lines raise an
/// IoError naming the line number.
std::vector<StsRecord> load_sts(const std::string& path, const Vocab& vocab);

}  // namespace hicl::text
