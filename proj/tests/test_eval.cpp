#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "hicl/errors.hpp"
#include "hicl/eval.hpp"
#include "hicl/rng.hpp"
#include "hicl/training.hpp"

using namespace hicl;
using namespace hicl::eval;

namespace {

// Brute-force rank oracle: rank by pairwise counting rather than sorting.
// rank_i = 1 + #{x_j < x_i} + #{j != i : x_j == x_i} / 2.
std::vector<double> counting_ranks(std::span<const double> x) {
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::size_t below = 0, tied = 0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (x[j] < x[i]) ++below;
      if (j != i && x[j] == x[i]) ++tied;
    }
    ranks[i] = 1.0 + static_cast<double>(below) +
               static_cast<double>(tied) / 2.0;
  }
  return ranks;
}

double spearman_oracle(std::span<const double> x, std::span<const double> y) {
  const std::vector<double> rx = counting_ranks(x);
  const std::vector<double> ry = counting_ranks(y);
  const std::size_t n = rx.size();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

std::vector<double> random_vector(std::uint64_t seed, std::size_t n) {
  RngStream s(seed, RngPurpose::kData);
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = s.uniform_at(i, -5.0, 5.0);
  return v;
}

}  // namespace

TEST_CASE("spearman worked examples") {
  CHECK(spearman(std::vector<double>{1, 2, 3},
                 std::vector<double>{10, 20, 30}) == 1.0);
  CHECK(spearman(std::vector<double>{1, 2, 3},
                 std::vector<double>{3, 2, 1}) == -1.0);

  const double tied = spearman(std::vector<double>{1, 2, 2, 4},
                               std::vector<double>{1, 3, 2, 4});
  CHECK(tied == doctest::Approx(4.5 / std::sqrt(22.5)).epsilon(1e-12));
  CHECK(tied == doctest::Approx(0.9487).epsilon(1e-4));
}

TEST_CASE("spearman error paths") {
  CHECK_THROWS_AS(spearman(std::vector<double>{1, 2},
                           std::vector<double>{1, 2, 3}),
                  NumericsError);
  CHECK_THROWS_AS(spearman(std::vector<double>{1}, std::vector<double>{1}),
                  NumericsError);
  CHECK_THROWS_WITH_AS(spearman(std::vector<double>{2, 2, 2},
                                std::vector<double>{1, 2, 3}),
                       doctest::Contains("constant"), NumericsError);
}

TEST_CASE("spearman agrees exactly with the counting oracle") {
  std::size_t cases = 0;
  for (std::size_t n = 2; n <= 6; ++n) {
    std::vector<std::vector<double>> bases;
    std::vector<double> untied(n);
    std::iota(untied.begin(), untied.end(), 1.0);
    bases.push_back(untied);
    if (n >= 3) {
      std::vector<double> one_tie = untied;
      one_tie[1] = one_tie[0];  // e.g. {1, 1, 3, 4, ...}
      bases.push_back(one_tie);
    }
    if (n >= 4) {
      std::vector<double> two_ties = untied;
      two_ties[1] = two_ties[0];
      two_ties[3] = two_ties[2];
      bases.push_back(two_ties);
    }

    std::vector<double> y(n);
    std::iota(y.begin(), y.end(), 1.0);
    if (n >= 4) y[2] = y[1];  // ties on the y side as well

    for (auto& base : bases) {
      std::sort(base.begin(), base.end());
      std::vector<double> x = base;
      do {
        const double got = spearman(x, y);
        const double expected = spearman_oracle(x, y);
        REQUIRE(got == expected);  // bitwise agreement
        ++cases;
      } while (std::next_permutation(x.begin(), x.end()));
    }
  }
  CHECK(cases > 1500);
}

TEST_CASE("spearman is invariant under strictly increasing transforms") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::vector<double> x = random_vector(seed * 3 + 1, 12);
    std::vector<double> y = random_vector(seed * 3 + 2, 12);
    const double base = spearman(x, y);

    auto apply = [&](auto fn) {
      std::vector<double> tx = x;
      for (double& v : tx) v = fn(v);
      return spearman(tx, y);
    };
    CHECK(std::fabs(apply([](double v) { return std::exp(v); }) - base) <
          1e-12);
    CHECK(std::fabs(apply([](double v) { return 2.0 * v + 3.0; }) - base) <
          1e-12);
    CHECK(std::fabs(apply([](double v) { return v * v * v; }) - base) < 1e-12);

    std::vector<double> x2 = x;
    CHECK(spearman(x, x2) == 1.0);
  }
}

TEST_CASE("predict_similarity is symmetric and self-consistent") {
  enc::EncoderParams params = enc::init_params(4, 16, 2, 1, 60, 64);
  text::Vocab vocab;
  for (int i = 0; i < 40; ++i) vocab.add("tok" + std::to_string(i));

  text::TokenSeq s1 = text::tokenize("tok1 tok2 tok3 tok4 tok5", vocab);
  text::TokenSeq s2 = text::tokenize("tok9 tok8 tok7", vocab);

  const double ab =
      predict_similarity(params, s1, s2, 4, hier::PoolingMode::kWeighted);
  const double ba =
      predict_similarity(params, s2, s1, 4, hier::PoolingMode::kWeighted);
  CHECK(std::fabs(ab - ba) < 1e-12);
  CHECK(ab >= -1.0);
  CHECK(ab <= 1.0);

  const double self =
      predict_similarity(params, s1, s1, 4, hier::PoolingMode::kWeighted);
  CHECK(std::fabs(self - 1.0) < 1e-10);
}

TEST_CASE("evaluate reaches +-1 on rank-identical golds") {
  enc::EncoderParams params = enc::init_params(9, 16, 2, 1, 60, 64);
  text::Vocab vocab;
  for (int i = 0; i < 40; ++i) vocab.add("tok" + std::to_string(i));

  std::vector<text::StsRecord> dataset;
  RngStream rng(12, RngPurpose::kData);
  std::uint64_t cur = 0;
  for (int i = 0; i < 8; ++i) {
    std::string a, b;
    for (int t = 0; t < 6; ++t) {
      a += "tok" + std::to_string(rng.below_at(cur++, 40)) + " ";
      b += "tok" + std::to_string(rng.below_at(cur++, 40)) + " ";
    }
    text::StsRecord rec;
    rec.first = text::tokenize(a, vocab);
    rec.second = text::tokenize(b, vocab);
    rec.gold = 0.0;
    dataset.push_back(rec);
  }

  std::vector<double> base_predictions;
  for (const text::StsRecord& rec : dataset) {
    base_predictions.push_back(predict_similarity(
        params, rec.first, rec.second, 4, hier::PoolingMode::kWeighted));
  }
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    dataset[i].gold = base_predictions[i];
  }
  EvalReport identity =
      evaluate(params, dataset, 4, hier::PoolingMode::kWeighted);
  CHECK(identity.rho == doctest::Approx(1.0).epsilon(1e-12));

  for (std::size_t i = 0; i < dataset.size(); ++i) {
    dataset[i].gold = -base_predictions[i];
  }
  EvalReport antitone =
      evaluate(params, dataset, 4, hier::PoolingMode::kWeighted);
  CHECK(antitone.rho == doctest::Approx(-1.0).epsilon(1e-12));

  CHECK_THROWS_AS(evaluate(params, {}, 4, hier::PoolingMode::kWeighted),
                  NumericsError);
}

TEST_CASE("similarity orders by overlap on a trained model") {
  eval::SyntheticData synth = generate_synthetic(19, 60, 80, 12);
  text::Vocab vocab = text::Vocab::build(synth.corpus_lines);
  std::vector<text::TokenSeq> corpus;
  for (const auto& line : synth.corpus_lines) {
    corpus.push_back(text::tokenize(line, vocab));
  }

  train::TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.steps = 150;
  cfg.eval_every = 1000;
  cfg.slice_len = 8;
  cfg.d = 16;
  cfg.n_heads = 2;
  cfg.n_layers = 1;
  cfg.max_positions = 32;
  cfg.seed = 6;
  train::TrainOutcome out = hicl::train::train(cfg, corpus, {}, vocab.size());

  // s2 is s1 plus one appended token; s3 is unrelated
  const std::string s1_text = synth.pairs[0].first;
  text::TokenSeq s1 = text::tokenize(s1_text, vocab);
  text::TokenSeq s2 = text::tokenize(s1_text + " w0", vocab);
  text::TokenSeq s3 = text::tokenize(synth.pairs[7].second, vocab);

  const std::size_t L = 32;  // >= both lengths: single-segment encoding
  const double near = predict_similarity(out.best.params, s1, s2, L,
                                         hier::PoolingMode::kWeighted);
  const double far = predict_similarity(out.best.params, s1, s3, L,
                                        hier::PoolingMode::kWeighted);
  CHECK(near < 1.0);
  CHECK(near > far);
}

TEST_CASE("untrained model correlation is reported, not asserted") {
  // sanity log only: an untrained encoder has no calibrated relation to
  // the synthetic golds
  eval::SyntheticData synth = generate_synthetic(23, 50, 80, 10);
  text::Vocab vocab = text::Vocab::build(synth.corpus_lines);
  std::vector<text::StsRecord> dataset;
  for (const auto& p : synth.pairs) {
    text::StsRecord rec;
    rec.first = text::tokenize(p.first, vocab);
    rec.second = text::tokenize(p.second, vocab);
    rec.gold = p.gold;
    dataset.push_back(rec);
  }
  enc::EncoderParams params = enc::init_params(2, 16, 2, 1, vocab.size(), 32);
  EvalReport report =
      evaluate(params, dataset, 8, hier::PoolingMode::kWeighted);
  CHECK(std::isfinite(report.rho));
  MESSAGE("untrained |rho| on 50 synthetic pairs: ", std::fabs(report.rho));
}

TEST_CASE("synthetic generator structure") {
  SyntheticData data = generate_synthetic(7, 200, 100, 16);
  CHECK(data.pairs.size() == 200);
  CHECK(data.corpus_lines.size() == 400);

  bool saw_full_overlap = false;
  for (const SyntheticPair& p : data.pairs) {
    CHECK(p.gold >= 0.0);
    CHECK(p.gold <= 5.0);
    if (p.gold == 5.0) {
      saw_full_overlap = true;
      CHECK(p.first == p.second);
    }
  }
  CHECK(saw_full_overlap);

  SUBCASE("deterministic in the seed") {
    SyntheticData again = generate_synthetic(7, 200, 100, 16);
    CHECK(again.corpus_lines == data.corpus_lines);
    SyntheticData other = generate_synthetic(8, 200, 100, 16);
    CHECK(other.corpus_lines != data.corpus_lines);
  }
  SUBCASE("parameter validation") {
    CHECK_THROWS_AS(generate_synthetic(1, 10, 10, 16), ConfigError);
    CHECK_THROWS_AS(generate_synthetic(1, 10, 100, 4), ConfigError);
  }
}
