#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "hicl/errors.hpp"
#include "hicl/rng.hpp"
#include "hicl/textproc.hpp"

using namespace hicl;
using namespace hicl::text;

namespace {

std::filesystem::path write_temp(const std::string& name,
                                 const std::string& body) {
  auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream out(path, std::ios::binary);
  out << body;
  return path;
}

TokenSeq sequence_of_length(std::size_t n) {
  TokenSeq seq;
  seq.ids.assign(n, Vocab::kUnk);
  if (n >= 1) seq.ids.front() = Vocab::kCls;
  if (n >= 2) seq.ids.back() = Vocab::kSep;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    seq.ids[i] = static_cast<TokenId>(5 + (i % 11));
  }
  return seq;
}

}  // namespace

TEST_CASE("tokenize attaches specials and lowercases") {
  std::vector<std::string> lines{"hello world", "hello there"};
  Vocab v = Vocab::build(lines);

  TokenSeq seq = tokenize("Hello world", v);
  CHECK(seq.length() == 4);
  CHECK(seq.ids.front() == Vocab::kCls);
  CHECK(seq.ids.back() == Vocab::kSep);
  CHECK(seq.ids[1] != Vocab::kUnk);

  TokenSeq empty = tokenize("", v);
  CHECK(empty.ids == std::vector<TokenId>{Vocab::kCls, Vocab::kSep});

  Vocab bare;
  TokenSeq unk = tokenize("zzz-unknown-token", bare);
  CHECK(unk.ids == std::vector<TokenId>{Vocab::kCls, Vocab::kUnk, Vocab::kSep});
}

TEST_CASE("tokenize truncates overlong bodies at 512 total") {
  std::string line;
  for (int i = 0; i < 600; ++i) line += "tok" + std::to_string(i) + " ";
  Vocab v = Vocab::build({line});
  TokenSeq seq = tokenize(line, v);
  CHECK(seq.length() == 512);
  CHECK(seq.ids.front() == Vocab::kCls);
  CHECK(seq.ids.back() == Vocab::kSep);
}

TEST_CASE("slicing follows the queue rule") {
  SUBCASE("70 at L=32") {
    auto segs = slice(sequence_of_length(70), 32);
    REQUIRE(segs.size() == 3);
    CHECK(segs[0].length() == 32);
    CHECK(segs[1].length() == 32);
    CHECK(segs[2].length() == 6);
  }
  SUBCASE("boundary 32 at L=32") {
    auto segs = slice(sequence_of_length(32), 32);
    REQUIRE(segs.size() == 1);
    CHECK(segs[0].length() == 32);
  }
  SUBCASE("33 at L=32") {
    auto segs = slice(sequence_of_length(33), 32);
    REQUIRE(segs.size() == 2);
    CHECK(segs[0].length() == 32);
    CHECK(segs[1].length() == 1);
  }
}

TEST_CASE("slicing round-trip over 10k random cases") {
  RngStream rng(2024, RngPurpose::kData);
  std::uint64_t cur = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t len = 2 + rng.below_at(cur++, 511);   // [2, 512]
    const std::size_t L = 1 + rng.below_at(cur++, 64);      // [1, 64]
    TokenSeq seq = sequence_of_length(len);
    auto segs = slice(seq, L);

    REQUIRE(segs.size() == 1 + (len - 1) / L);
    std::vector<TokenId> rebuilt;
    for (std::size_t j = 0; j < segs.size(); ++j) {
      CHECK(segs[j].index == j);
      if (j + 1 < segs.size()) {
        REQUIRE(segs[j].length() == L);
      } else {
        REQUIRE(segs[j].length() >= 1);
        REQUIRE(segs[j].length() <= L);
      }
      rebuilt.insert(rebuilt.end(), segs[j].ids.begin(), segs[j].ids.end());
    }
    REQUIRE(rebuilt == seq.ids);
  }
}

TEST_CASE("corpus stats use the standard length buckets") {
  std::vector<TokenSeq> corpus{sequence_of_length(10), sequence_of_length(40),
                               sequence_of_length(100)};
  CorpusStats stats = corpus_stats(corpus, 32);

  CHECK(stats.proportions_percent[0] == doctest::Approx(100.0 / 3));
  CHECK(stats.proportions_percent[1] == doctest::Approx(100.0 / 3));
  CHECK(stats.proportions_percent[2] == 0.0);
  CHECK(stats.proportions_percent[3] == doctest::Approx(100.0 / 3));
  CHECK(stats.segment_histogram.at(1) == 1);  // len 10
  CHECK(stats.segment_histogram.at(2) == 1);  // len 40
  CHECK(stats.segment_histogram.at(4) == 1);  // len 100
  CHECK(stats.fraction_at_most_3_segments == doctest::Approx(2.0 / 3));

  SUBCASE("single sequence lands fully in one bucket") {
    CorpusStats one = corpus_stats({sequence_of_length(32)}, 32);
    CHECK(one.proportions_percent[0] == 100.0);
  }

  SUBCASE("proportions always sum to 100") {
    RngStream rng(7, RngPurpose::kData);
    std::uint64_t cur = 0;
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<TokenSeq> random_corpus;
      const std::size_t n = 1 + rng.below_at(cur++, 40);
      for (std::size_t i = 0; i < n; ++i) {
        random_corpus.push_back(
            sequence_of_length(2 + rng.below_at(cur++, 700)));
      }
      CorpusStats s = corpus_stats(random_corpus, 1 + rng.below_at(cur++, 64));
      double total = 0.0;
      for (double p : s.proportions_percent) total += p;
      CHECK(std::fabs(total - 100.0) < 1e-9);
    }
  }

  CHECK_THROWS_AS(corpus_stats({}, 32), NumericsError);
}

TEST_CASE("corpus and sts loaders") {
  Vocab v = Vocab::build({"a dog .", "a cat ."});

  auto corpus_path = write_temp("hicl_test_corpus.txt", "a dog .\na cat .\nbird\n");
  auto corpus = load_corpus(corpus_path.string(), v);
  REQUIRE(corpus.size() == 3);
  CHECK(corpus[0].source_line == 1);
  CHECK(corpus[2].source_line == 3);
  CHECK(corpus[0].length() == 5);

  auto sts_path = write_temp("hicl_test_sts.tsv", "a dog.\ta cat.\t2.6\n");
  auto sts = load_sts(sts_path.string(), v);
  REQUIRE(sts.size() == 1);
  CHECK(sts[0].gold == doctest::Approx(2.6));

  auto bad_score = write_temp("hicl_test_sts_bad.tsv",
                              "a dog.\ta cat.\t2.6\nx\ty\tabc\n");
  CHECK_THROWS_WITH_AS(load_sts(bad_score.string(), v),
                       doctest::Contains(":2"), IoError);

  auto bad_fields = write_temp("hicl_test_sts_fields.tsv", "only two\tfields\n");
  CHECK_THROWS_WITH_AS(load_sts(bad_fields.string(), v),
                       doctest::Contains("3 tab-separated"), IoError);

  CHECK_THROWS_AS(load_corpus("/nonexistent/path.txt", v), IoError);

  std::filesystem::remove(corpus_path);
  std::filesystem::remove(sts_path);
  std::filesystem::remove(bad_score);
  std::filesystem::remove(bad_fields);
}

TEST_CASE("vocab build ranking and round trip") {
  std::vector<std::string> lines{"b b b a a c", "a"};
  Vocab v = Vocab::build(lines, 2);
  // a (3 uses) and b (3 uses) tie broken lexicographically, c dropped by cap
  CHECK(v.size() == Vocab::kNumSpecials + 2);
  CHECK(v.id_of("a") == 5);
  CHECK(v.id_of("b") == 6);
  CHECK(v.id_of("c") == Vocab::kUnk);

  auto path = write_temp("hicl_test_vocab.txt", "");
  v.save(path.string());
  Vocab loaded = Vocab::load(path.string());
  CHECK(loaded.size() == v.size());
  CHECK(loaded.id_of("a") == 5);
  CHECK(loaded.id_of("b") == 6);
  std::filesystem::remove(path);
}
