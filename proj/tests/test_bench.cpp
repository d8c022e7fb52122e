#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hicl/bench.hpp"
#include "hicl/errors.hpp"
#include "hicl/rng.hpp"
#include "hicl/textproc.hpp"

using namespace hicl;
using namespace hicl::bench;

namespace {

text::TokenSeq sequence_of_length(std::size_t n) {
  text::TokenSeq seq;
  seq.ids.assign(n, 7);
  seq.ids.front() = text::Vocab::kCls;
  seq.ids.back() = text::Vocab::kSep;
  return seq;
}

}  // namespace

TEST_CASE("cost model worked examples") {
  CostModel a = cost_model(96, 32);
  CHECK(a.full_units == 9216.0);
  CHECK(a.hicl_units == 3072.0);
  CHECK(a.ratio == 3.0);

  CostModel b = cost_model(32, 32);
  CHECK(b.ratio == 1.0);
  CHECK(b.segments == 1);

  CostModel c = cost_model(70, 32);
  CHECK(c.full_units == 4900.0);
  CHECK(c.hicl_units == 2084.0);
  CHECK(c.ratio == 4900.0 / 2084.0);
  CHECK(c.remainder == 6);

  CHECK_THROWS_AS(cost_model(0, 32), NumericsError);
  CHECK_THROWS_AS(cost_model(32, 0), NumericsError);
}

TEST_CASE("sliced encoding is strictly cheaper whenever len > L") {
  RngStream rng(5, RngPurpose::kData);
  std::uint64_t cur = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t L = 1 + rng.below_at(cur++, 64);
    const std::size_t len = L + 1 + rng.below_at(cur++, 512);
    CostModel m = cost_model(len, L);
    REQUIRE(m.hicl_units < m.full_units);
  }
}

TEST_CASE("predicted ratio is non-decreasing over multiples of L") {
  for (std::size_t L : {8ul, 32ul, 50ul}) {
    double previous = 0.0;
    for (std::size_t k = 1; k <= 12; ++k) {
      CostModel m = cost_model(k * L, L);
      CHECK(m.ratio >= previous);
      previous = m.ratio;
    }
  }
}

TEST_CASE("cost model segment accounting matches the slicer") {
  RngStream rng(6, RngPurpose::kData);
  std::uint64_t cur = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t len = 2 + rng.below_at(cur++, 511);
    const std::size_t L = 1 + rng.below_at(cur++, 64);
    CostModel m = cost_model(len, L);
    auto segs = text::slice(sequence_of_length(len), L);
    REQUIRE(m.segments == segs.size());
    REQUIRE(m.remainder == segs.back().length());
  }
}

TEST_CASE("wall-clock smoke on single-segment corpora") {
  enc::EncoderParams params = enc::init_params(3, 16, 2, 1, 30, 64);
  std::vector<text::TokenSeq> corpus;
  for (int i = 0; i < 4; ++i) corpus.push_back(sequence_of_length(32));

  CostReport r = wallclock_bench(params, corpus, 32, 3);
  CHECK(r.predicted_ratio == 1.0);
  // identical work, so the measurement sits inside an overhead band
  CHECK(r.measured_ratio > 0.5);
  CHECK(r.measured_ratio < 2.0);
  CHECK(r.full_seconds > 0.0);

  // report stays consistent with the analytic model
  double full_sum = 0.0, hicl_sum = 0.0;
  for (const auto& seq : corpus) {
    CostModel m = cost_model(seq.length(), 32);
    full_sum += m.full_units;
    hicl_sum += m.hicl_units;
  }
  CHECK(r.predicted_full_units == full_sum);
  CHECK(r.predicted_hicl_units == hicl_sum);

  CHECK_THROWS_AS(wallclock_bench(params, corpus, 32, 2), NumericsError);
  CHECK_THROWS_AS(wallclock_bench(params, {}, 32, 3), NumericsError);

  SUBCASE("parallel mode reports the flag") {
    CostReport p = wallclock_bench(params, corpus, 32, 3, true);
    CHECK(p.parallel_segments);
    CHECK(p.measured_ratio > 0.0);
  }

  SUBCASE("key-value block carries every field") {
    std::string kv = r.to_kv();
    CHECK(kv.find("measured_ratio=") != std::string::npos);
    CHECK(kv.find("predicted_ratio=") != std::string::npos);
    CHECK(kv.find("slice_len=32") != std::string::npos);
  }
}
