#include "hicl/textproc.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "hicl/errors.hpp"

namespace hicl::text {
namespace {

const char* kSpecialNames[] = {"[CLS]", "[SEP]", "[PAD]", "[UNK]", "[MASK]"};

std::string lowercase_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

std::vector<std::string> split_whitespace(std::string_view line) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    std::size_t start = i;
    while (i < line.size() && !is_space(line[i])) ++i;
    if (i > start) words.emplace_back(line.substr(start, i - start));
  }
  return words;
}

}  // namespace

Vocab::Vocab() {
  for (const char* s : kSpecialNames) add(s);
}

void Vocab::add(const std::string& token) {
  if (index_.contains(token)) return;
  index_.emplace(token, static_cast<TokenId>(tokens_.size()));
  tokens_.push_back(token);
}

TokenId Vocab::id_of(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

Vocab Vocab::build(const std::vector<std::string>& lines,
                   std::size_t max_tokens) {
  std::unordered_map<std::string, std::size_t> freq;
  for (const std::string& line : lines) {
    for (const std::string& w : split_whitespace(line)) {
      ++freq[lowercase_ascii(w)];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(),
                                                          freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocab v;
  for (const auto& [token, count] : ranked) {
    if (v.size() >= kNumSpecials + max_tokens) break;
    v.add(token);
  }
  return v;
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocab file: " + path);
  Vocab v;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) v.add(line);
  }
  return v;
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write vocab file: " + path);
  for (std::size_t i = kNumSpecials; i < tokens_.size(); ++i) {
    out << tokens_[i] << '\n';
  }
}

TokenSeq tokenize(std::string_view line, const Vocab& vocab,
                  std::size_t max_len) {
  TokenSeq seq;
  seq.ids.push_back(Vocab::kCls);
  const std::size_t max_body = max_len >= 2 ? max_len - 2 : 0;
  for (const std::string& w : split_whitespace(line)) {
    if (seq.ids.size() - 1 >= max_body) break;
    seq.ids.push_back(vocab.id_of(lowercase_ascii(w)));
  }
  seq.ids.push_back(Vocab::kSep);
  return seq;
}

std::size_t segment_count(std::size_t seq_len, std::size_t slice_len) {
  if (slice_len == 0) throw NumericsError("segment_count: L must be >= 1");
  if (seq_len == 0) return 0;
  return 1 + (seq_len - 1) / slice_len;
}

std::vector<SegmentView> slice(const TokenSeq& seq, std::size_t slice_len,
                               std::size_t parent_index) {
  if (slice_len == 0) throw NumericsError("slice: L must be >= 1");
  std::vector<SegmentView> segments;
  const std::size_t n = seq.ids.size();
  const std::size_t count = segment_count(n, slice_len);
  segments.reserve(count);
  for (std::size_t j = 0; j < count; ++j) {
    SegmentView s;
    s.parent = parent_index;
    s.index = j;
    const std::size_t begin = j * slice_len;
    const std::size_t end = std::min(begin + slice_len, n);
    s.ids.assign(seq.ids.begin() + static_cast<std::ptrdiff_t>(begin),
                 seq.ids.begin() + static_cast<std::ptrdiff_t>(end));
    segments.push_back(std::move(s));
  }
  return segments;
}

CorpusStats corpus_stats(const std::vector<TokenSeq>& corpus,
                         std::size_t slice_len) {
  if (corpus.empty()) throw NumericsError("corpus_stats: empty corpus");
  CorpusStats stats;
  stats.slice_len = slice_len;
  stats.sequence_count = corpus.size();
  stats.bucket_upper = {32, 64, 96, 128, 256, 512};
  stats.bucket_counts.assign(stats.bucket_upper.size() + 1, 0);

  std::size_t short_count = 0;
  for (const TokenSeq& seq : corpus) {
    const std::size_t len = seq.length();
    std::size_t b = 0;
    while (b < stats.bucket_upper.size() && len > stats.bucket_upper[b]) ++b;
    ++stats.bucket_counts[b];
    const std::size_t segs = segment_count(len, slice_len);
    ++stats.segment_histogram[segs];
    if (segs <= 3) ++short_count;
  }

  const double total = static_cast<double>(corpus.size());
  stats.proportions_percent.resize(stats.bucket_counts.size());
  for (std::size_t i = 0; i < stats.bucket_counts.size(); ++i) {
    stats.proportions_percent[i] =
        100.0 * static_cast<double>(stats.bucket_counts[i]) / total;
  }
  stats.fraction_at_most_3_segments = static_cast<double>(short_count) / total;
  return stats;
}

std::string CorpusStats::to_tsv() const {
  std::ostringstream os;
  os << "bucket\tcount\tproportion\n";
  std::size_t lower = 0;
  for (std::size_t i = 0; i < bucket_upper.size(); ++i) {
    os << (i == 0 ? "[" : "(") << lower << ", " << bucket_upper[i] << "]\t"
       << bucket_counts[i] << '\t' << proportions_percent[i] << "%\n";
    lower = bucket_upper[i];
  }
  os << "(" << lower << ", inf)\t" << bucket_counts.back() << '\t'
     << proportions_percent.back() << "%\n";
  os << "sequences\t" << sequence_count << "\n";
  os << "slice_len\t" << slice_len << "\n";
  os << "fraction_le_3_segments\t" << fraction_at_most_3_segments << "\n";
  std::vector<std::pair<std::size_t, std::size_t>> hist(
      segment_histogram.begin(), segment_histogram.end());
  std::sort(hist.begin(), hist.end());
  for (const auto& [segs, count] : hist) {
    os << "segments=" << segs << "\t" << count << "\n";
  }
  return os.str();
}

std::vector<std::string> load_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::vector<TokenSeq> load_corpus(const std::string& path,
                                  const Vocab& vocab) {
  std::vector<TokenSeq> corpus;
  std::size_t line_no = 0;
  for (const std::string& line : load_lines(path)) {
    ++line_no;
    TokenSeq seq = tokenize(line, vocab);
    seq.source_line = line_no;
    corpus.push_back(std::move(seq));
  }
  return corpus;
}

std::vector<StsRecord> load_sts(const std::string& path, const Vocab& vocab) {
  std::vector<StsRecord> records;
  std::size_t line_no = 0;
  for (const std::string& line : load_lines(path)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      std::size_t tab = line.find('\t', start);
      if (tab == std::string::npos) {
        fields.push_back(line.substr(start));
        break;
      }
      fields.push_back(line.substr(start, tab - start));
      start = tab + 1;
    }
    if (fields.size() != 3) {
      throw IoError(path + ":" + std::to_string(line_no) +
                    ": expected 3 tab-separated fields, got " +
                    std::to_string(fields.size()));
    }
    StsRecord rec;
    rec.first = tokenize(fields[0], vocab);
    rec.first.source_line = line_no;
    rec.second = tokenize(fields[1], vocab);
    rec.second.source_line = line_no;
    try {
      std::size_t consumed = 0;
      rec.gold = std::stod(fields[2], &consumed);
      while (consumed < fields[2].size() && is_space(fields[2][consumed]))
        ++consumed;
      if (consumed != fields[2].size()) throw std::invalid_argument("junk");
    } catch (const std::exception&) {
      throw IoError(path + ":" + std::to_string(line_no) +
                    ": unparsable score '" + fields[2] + "'");
    }
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace hicl::text
