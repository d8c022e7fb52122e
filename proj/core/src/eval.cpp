#include "hicl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "hicl/errors.hpp"
#include "hicl/graph.hpp"
#include "hicl/rng.hpp"

namespace hicl::eval {

std::vector<double> fractional_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] < values[b];
  });

  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    // positions i..j (0-based) share the average of ranks i+1..j+1
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw NumericsError("spearman: length mismatch " +
                        std::to_string(x.size()) + " vs " +
                        std::to_string(y.size()));
  }
  if (x.size() < 2) throw NumericsError("spearman: need at least 2 points");

  auto constant = [](std::span<const double> v) {
    for (double d : v) {
      if (d != v[0]) return false;
    }
    return true;
  };
  if (constant(x) || constant(y)) {
    throw NumericsError("spearman: correlation undefined for constant input");
  }

  const std::vector<double> rx = fractional_ranks(x);
  const std::vector<double> ry = fractional_ranks(y);
  const std::size_t n = rx.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);

  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = rx[i] - mx;
    const double dy = ry[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  return sxy / std::sqrt(sxx * syy);
}

double predict_similarity(const enc::EncoderParams& params,
                          const text::TokenSeq& first,
                          const text::TokenSeq& second, std::size_t slice_len,
                          hier::PoolingMode mode) {
  Graph g;
  std::vector<text::TokenSeq> batch{first, second};
  hier::HierarchicalBatch hb = hier::hierarchical_encode(
      g, params, batch, slice_len, mode, enc::DropoutBranch::off(), false);
  Var s1 = g.gather_rows(hb.sequences.rows, {0});
  Var s2 = g.gather_rows(hb.sequences.rows, {1});
  return g.value(g.cosine_sim(s1, s2)).at(0);
}

EvalReport evaluate(const enc::EncoderParams& params,
                    const std::vector<text::StsRecord>& dataset,
                    std::size_t slice_len, hier::PoolingMode mode) {
  if (dataset.size() < 2) {
    throw NumericsError("evaluate: need at least 2 pairs");
  }
  EvalReport report;
  report.pair_count = dataset.size();
  std::vector<double> golds;
  for (const text::StsRecord& rec : dataset) {
    report.predicted.push_back(
        predict_similarity(params, rec.first, rec.second, slice_len, mode));
    golds.push_back(rec.gold);
  }
  report.rho = spearman(report.predicted, golds);
  return report;
}

std::string EvalReport::to_tsv() const {
  std::ostringstream os;
  char buf[64];
  os << "pairs\t" << pair_count << "\n";
  std::snprintf(buf, sizeof(buf), "%.6f", rho);
  os << "spearman\t" << buf << "\n";
  return os.str();
}

SyntheticData generate_synthetic(std::uint64_t seed, std::size_t n_pairs,
                                 std::size_t vocab_size,
                                 std::size_t body_length) {
  if (vocab_size < 50) {
    throw ConfigError("generate_synthetic: vocab_size must be >= 50");
  }
  if (body_length < 8) {
    throw ConfigError("generate_synthetic: body_length must be >= 8");
  }

  RngCursor rng((RngStream(seed, RngPurpose::kData)));
  auto word = [](std::size_t i) { return "w" + std::to_string(i); };

  SyntheticData data;
  static const double kFractions[] = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
  for (std::size_t p = 0; p < n_pairs; ++p) {
    const double frac = kFractions[rng.next_below(6)];
    std::vector<std::size_t> first(body_length);
    for (std::size_t i = 0; i < body_length; ++i) {
      first[i] = rng.next_below(vocab_size);
    }

    // keep floor(frac * len) positions, resample the rest in place
    const std::size_t keep =
        static_cast<std::size_t>(frac * static_cast<double>(body_length));
    std::vector<std::size_t> positions(body_length);
    std::iota(positions.begin(), positions.end(), 0);
    for (std::size_t i = 0; i < keep; ++i) {
      const std::size_t j = i + rng.next_below(body_length - i);
      std::swap(positions[i], positions[j]);
    }
    std::vector<bool> kept(body_length, false);
    for (std::size_t i = 0; i < keep; ++i) kept[positions[i]] = true;

    std::vector<std::size_t> second(body_length);
    for (std::size_t i = 0; i < body_length; ++i) {
      second[i] = kept[i] ? first[i] : rng.next_below(vocab_size);
    }

    auto join = [&](const std::vector<std::size_t>& ids) {
      std::string s;
      for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) s += ' ';
        s += word(ids[i]);
      }
      return s;
    };

    SyntheticPair pair;
    pair.first = join(first);
    pair.second = join(second);
    pair.gold = 5.0 * frac;
    data.corpus_lines.push_back(pair.first);
    data.corpus_lines.push_back(pair.second);
    data.pairs.push_back(std::move(pair));
  }
  return data;
}

}  // namespace hicl::eval
