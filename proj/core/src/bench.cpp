#include "hicl/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <sstream>
#include <thread>

#include "hicl/errors.hpp"
#include "hicl/graph.hpp"

namespace hicl::bench {

CostModel cost_model(std::size_t seq_len, std::size_t slice_len) {
  if (seq_len < 1 || slice_len < 1) {
    throw NumericsError("cost_model: seq_len and L must be >= 1");
  }
  CostModel m;
  m.segments = text::segment_count(seq_len, slice_len);
  m.remainder = seq_len - slice_len * (m.segments - 1);
  const double L = static_cast<double>(slice_len);
  const double r = static_cast<double>(m.remainder);
  const double n = static_cast<double>(seq_len);
  m.full_units = n * n;
  m.hicl_units = L * L * static_cast<double>(m.segments - 1) + r * r;
  m.ratio = m.full_units / m.hicl_units;
  return m;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

void encode_full_pass(const enc::EncoderParams& params,
                      const std::vector<text::TokenSeq>& corpus) {
  for (const text::TokenSeq& seq : corpus) {
    Graph g;
    std::vector<std::vector<text::TokenId>> inputs{seq.ids};
    enc::encode(g, params, inputs, enc::DropoutBranch::off());
  }
}

void encode_hicl_pass(const enc::EncoderParams& params,
                      const std::vector<text::TokenSeq>& corpus,
                      std::size_t slice_len) {
  for (const text::TokenSeq& seq : corpus) {
    Graph g;
    std::vector<text::TokenSeq> batch{seq};
    hier::hierarchical_encode(g, params, batch, slice_len,
                              hier::PoolingMode::kWeighted,
                              enc::DropoutBranch::off(), false);
  }
}

// Parallel variant: each segment encodes on its own graph and thread;
// pooling runs host-side on the collected values in segment order.
void encode_hicl_parallel_pass(const enc::EncoderParams& params,
                               const std::vector<text::TokenSeq>& corpus,
                               std::size_t slice_len) {
  for (const text::TokenSeq& seq : corpus) {
    std::vector<text::SegmentView> segments = text::slice(seq, slice_len);
    std::vector<Tensor> rows(segments.size());
    std::vector<std::thread> workers;
    workers.reserve(segments.size());
    for (std::size_t i = 0; i < segments.size(); ++i) {
      workers.emplace_back([&, i]() {
        Graph g;
        std::vector<std::vector<text::TokenId>> inputs{segments[i].ids};
        enc::EmbeddingBatch out =
            enc::encode(g, params, inputs, enc::DropoutBranch::off());
        rows[i] = out.values().clone();
      });
    }
    for (std::thread& w : workers) w.join();

    std::size_t total = 0;
    for (const text::SegmentView& s : segments) total += s.length();
    std::vector<double> pooled(params.d, 0.0);
    for (std::size_t i = 0; i < segments.size(); ++i) {
      const double w = static_cast<double>(segments[i].length()) /
                       static_cast<double>(total);
      for (std::size_t j = 0; j < params.d; ++j) {
        pooled[j] += w * rows[i].at(0, j);
      }
    }
  }
}

}  // namespace

CostReport wallclock_bench(const enc::EncoderParams& params,
                           const std::vector<text::TokenSeq>& corpus,
                           std::size_t slice_len, std::size_t repetitions,
                           bool parallel_segments) {
  if (corpus.empty()) throw NumericsError("wallclock_bench: empty corpus");
  if (repetitions < 3) {
    throw NumericsError("wallclock_bench: need at least 3 repetitions");
  }

  CostReport report;
  report.slice_len = slice_len;
  report.repetitions = repetitions;
  report.corpus_size = corpus.size();
  report.parallel_segments = parallel_segments;
  for (const text::TokenSeq& seq : corpus) {
    const CostModel m = cost_model(seq.length(), slice_len);
    report.predicted_full_units += m.full_units;
    report.predicted_hicl_units += m.hicl_units;
  }
  report.predicted_ratio =
      report.predicted_full_units / report.predicted_hicl_units;

  auto hicl_pass = [&]() {
    if (parallel_segments) {
      encode_hicl_parallel_pass(params, corpus, slice_len);
    } else {
      encode_hicl_pass(params, corpus, slice_len);
    }
  };

  // warm-up passes are excluded from the timings
  encode_full_pass(params, corpus);
  hicl_pass();

  std::vector<double> full_times, hicl_times;
  for (std::size_t rep = 0; rep < repetitions; ++rep) {
    auto t0 = Clock::now();
    encode_full_pass(params, corpus);
    full_times.push_back(seconds_since(t0));

    auto t1 = Clock::now();
    hicl_pass();
    hicl_times.push_back(seconds_since(t1));
  }

  report.full_seconds = median(full_times);
  report.hicl_seconds = median(hicl_times);
  report.measured_ratio = report.full_seconds / report.hicl_seconds;
  return report;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

std::string CostReport::to_tsv() const {
  std::ostringstream os;
  os << "mode\tmodel_units\tseconds\n";
  os << "full\t" << fmt(predicted_full_units) << '\t' << fmt(full_seconds)
     << '\n';
  os << "hicl\t" << fmt(predicted_hicl_units) << '\t' << fmt(hicl_seconds)
     << '\n';
  os << "ratio\t" << fmt(predicted_ratio) << '\t' << fmt(measured_ratio)
     << '\n';
  return os.str();
}

std::string CostReport::to_kv() const {
  std::ostringstream os;
  os << "slice_len=" << slice_len << '\n'
     << "repetitions=" << repetitions << '\n'
     << "corpus_size=" << corpus_size << '\n'
     << "parallel_segments=" << (parallel_segments ? 1 : 0) << '\n'
     << "predicted_full_units=" << fmt(predicted_full_units) << '\n'
     << "predicted_hicl_units=" << fmt(predicted_hicl_units) << '\n'
     << "predicted_ratio=" << fmt(predicted_ratio) << '\n'
     << "full_seconds=" << fmt(full_seconds) << '\n'
     << "hicl_seconds=" << fmt(hicl_seconds) << '\n'
     << "measured_ratio=" << fmt(measured_ratio) << '\n';
  return os.str();
}

}  // namespace hicl::bench
