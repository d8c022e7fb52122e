#include "hicl/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "hicl/errors.hpp"
#include "hicl/eval.hpp"

namespace hicl::train {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train config: batch size must be >= 1");
  if (steps < 1) throw ConfigError("train config: steps must be >= 1");
  if (eval_every < 1) throw ConfigError("train config: eval-every must be >= 1");
  if (!(learning_rate > 0.0)) {
    throw ConfigError("train config: learning rate must be > 0");
  }
  if (repetition_rate < 0.0 || repetition_rate > 0.5) {
    throw ConfigError("train config: repetition rate must be in [0, 0.5]");
  }
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
    throw ConfigError("train config: dropout rate must be in [0, 1)");
  }
  if (slice_len < 1 || slice_len > 512) {
    throw ConfigError("train config: slice length must be in [1, 512]");
  }
  if (d == 0 || n_heads == 0 || d % n_heads != 0) {
    throw ConfigError("train config: d must be a positive multiple of n_heads");
  }
  loss.validate();
}

MomentumQueue::MomentumQueue(std::size_t capacity_rows)
    : capacity_(capacity_rows) {}

void MomentumQueue::push(const Tensor& rows) {
  if (capacity_ == 0) return;
  if (width_ == 0) width_ = rows.cols();
  if (rows.cols() != width_) {
    throw NumericsError("momentum queue: row width changed");
  }
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    std::vector<double> row(width_);
    std::memcpy(row.data(), rows.data() + i * width_, width_ * sizeof(double));
    rows_.push_back(std::move(row));
    while (rows_.size() > capacity_) rows_.pop_front();
  }
}

Tensor MomentumQueue::snapshot() const {
  if (rows_.empty()) return Tensor();
  Tensor out({rows_.size(), width_});
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    std::memcpy(out.data() + i * width_, rows_[i].data(),
                width_ * sizeof(double));
  }
  return out;
}

Optimizer::Optimizer(OptimizerKind kind, double learning_rate)
    : kind_(kind), lr_(learning_rate) {}

void Optimizer::step(std::vector<Tensor*>& params,
                     const std::vector<const Tensor*>& grads) {
  if (params.size() != grads.size()) {
    throw NumericsError("optimizer: param/grad count mismatch");
  }
  if (kind_ == OptimizerKind::kSgd) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (grads[i] == nullptr) continue;
      double* p = params[i]->data();
      const double* g = grads[i]->data();
      for (std::size_t k = 0; k < params[i]->size(); ++k) p[k] -= lr_ * g[k];
    }
    return;
  }

  if (m_.empty()) {
    for (const Tensor* p : params) {
      m_.push_back(Tensor::zeros(p->shape()));
      v_.push_back(Tensor::zeros(p->shape()));
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    double* p = params[i]->data();
    double* m = m_[i].data();
    double* v = v_[i].data();
    for (std::size_t k = 0; k < params[i]->size(); ++k) {
      const double g = grads[i] == nullptr ? 0.0 : grads[i]->at(k);
      m[k] = beta1_ * m[k] + (1.0 - beta1_) * g;
      v[k] = beta2_ * v[k] + (1.0 - beta2_) * g * g;
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      p[k] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

std::pair<std::vector<text::TokenSeq>, std::vector<text::TokenSeq>>
make_positive_inputs(const std::vector<text::TokenSeq>& batch,
                     PositiveStrategy strategy, double rate, RngCursor& rng) {
  if (rate < 0.0 || rate > 0.5) {
    throw ConfigError("make_positive_inputs: rate must be in [0, 0.5]");
  }
  if (strategy == PositiveStrategy::kDropout || rate == 0.0) {
    return {batch, batch};
  }

  std::vector<text::TokenSeq> duplicated;
  duplicated.reserve(batch.size());
  for (const text::TokenSeq& seq : batch) {
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < seq.ids.size(); ++i) {
      if (seq.ids[i] >= text::Vocab::kNumSpecials) eligible.push_back(i);
    }
    const std::size_t dup_count = static_cast<std::size_t>(
        std::ceil(rate * static_cast<double>(eligible.size())));
    // partial Fisher-Yates picks dup_count distinct positions
    for (std::size_t i = 0; i < dup_count; ++i) {
      const std::size_t j = i + rng.next_below(eligible.size() - i);
      std::swap(eligible[i], eligible[j]);
    }
    std::vector<bool> duplicate(seq.ids.size(), false);
    for (std::size_t i = 0; i < dup_count; ++i) duplicate[eligible[i]] = true;

    text::TokenSeq copy;
    copy.source_line = seq.source_line;
    copy.ids.reserve(seq.ids.size() + dup_count);
    for (std::size_t i = 0; i < seq.ids.size(); ++i) {
      copy.ids.push_back(seq.ids[i]);
      if (duplicate[i]) copy.ids.push_back(seq.ids[i]);
    }
    duplicated.push_back(std::move(copy));
  }
  return {batch, std::move(duplicated)};
}

StepResult train_step(enc::EncoderParams& params,
                      const std::vector<text::TokenSeq>& batch,
                      const TrainConfig& cfg, Optimizer& optimizer,
                      MomentumQueue* queue, std::size_t step_index) {
  if (batch.empty()) throw NumericsError("train_step: empty batch");

  RngCursor rep_rng(
      RngStream(cfg.seed, RngPurpose::kRepetition).derived(step_index));
  auto [inputs_a, inputs_b] =
      make_positive_inputs(batch, cfg.strategy, cfg.repetition_rate, rep_rng);

  StepResult result;
  try {
    Graph g;
    enc::BoundEncoder bound = enc::bind(g, params, true);
    hier::HierarchicalBatch hb_a = hier::hierarchical_encode(
        bound, inputs_a, cfg.slice_len, cfg.pooling,
        enc::DropoutBranch::p(cfg.dropout_rate, cfg.seed, step_index));
    hier::HierarchicalBatch hb_b = hier::hierarchical_encode(
        bound, inputs_b, cfg.slice_len, cfg.pooling,
        enc::DropoutBranch::p_plus(cfg.dropout_rate, cfg.seed, step_index));

    Tensor queue_snapshot;
    const Tensor* queue_ptr = nullptr;
    if (queue != nullptr && queue->size() > 0) {
      queue_snapshot = queue->snapshot();
      queue_ptr = &queue_snapshot;
      result.queue_rows_used = queue_snapshot.rows();
    }

    result.losses = loss::total_loss(g, hb_a, hb_b, cfg.loss, queue_ptr);
    g.backward(result.losses.total);

    std::vector<Tensor*> param_ptrs = params.tensors();
    std::vector<const Tensor*> grads;
    grads.reserve(bound.leaves.size());
    for (Var leaf : bound.leaves) grads.push_back(g.grad(leaf));
    optimizer.step(param_ptrs, grads);

    if (queue != nullptr) {
      queue->push(hb_b.sequences.values());
    }
  } catch (const NumericsError& e) {
    throw NumericsError("train step " + std::to_string(step_index) + ": " +
                        e.what());
  }
  return result;
}

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string TrainingLog::to_tsv() const {
  std::ostringstream os;
  os << "step\ttotal\tglobal\tlocal\tentailment\tdev\n";
  for (const LogRow& row : rows) {
    os << row.step << '\t' << format_double(row.total) << '\t'
       << format_double(row.global_term) << '\t'
       << format_double(row.local_term) << '\t'
       << (row.entailment_term ? format_double(*row.entailment_term) : "-")
       << '\t' << (row.dev_metric ? format_double(*row.dev_metric) : "-")
       << '\n';
  }
  return os.str();
}

TrainOutcome train(const TrainConfig& cfg,
                   const std::vector<text::TokenSeq>& corpus,
                   const std::vector<text::StsRecord>& dev_set,
                   std::size_t vocab_size) {
  cfg.validate();
  if (corpus.empty()) throw ConfigError("train: empty corpus");

  enc::EncoderParams params =
      enc::init_params(cfg.seed, cfg.d, cfg.n_heads, cfg.n_layers, vocab_size,
                       cfg.max_positions);
  Optimizer optimizer(cfg.optimizer, cfg.learning_rate);
  MomentumQueue queue(cfg.queue_capacity);
  MomentumQueue* queue_ptr = cfg.queue_capacity > 0 ? &queue : nullptr;
  RngStream shuffle_stream(cfg.seed, RngPurpose::kData);

  TrainOutcome outcome;
  enc::EncoderParams best_params;
  bool have_best = false;

  std::size_t step = 0;
  std::size_t epoch = 0;
  while (step < cfg.steps) {
    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), 0);
    RngCursor shuffle_rng(shuffle_stream.derived(epoch));
    for (std::size_t i = corpus.size(); i > 1; --i) {
      const std::size_t j = shuffle_rng.next_below(i);
      std::swap(order[i - 1], order[j]);
    }

    for (std::size_t start = 0; start < corpus.size() && step < cfg.steps;
         start += cfg.batch_size) {
      const std::size_t end =
          std::min(start + cfg.batch_size, corpus.size());
      std::vector<text::TokenSeq> batch;
      batch.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(corpus[order[i]]);
      }

      ++step;
      StepResult sr =
          train_step(params, batch, cfg, optimizer, queue_ptr, step);

      LogRow row;
      row.step = step;
      row.total = sr.losses.total_value;
      row.global_term = sr.losses.global_term;
      row.local_term = sr.losses.local_term;
      row.entailment_term = sr.losses.entailment_term;

      if (step % cfg.eval_every == 0 && !dev_set.empty()) {
        const double rho =
            eval::evaluate(params, dev_set, cfg.slice_len, cfg.pooling).rho;
        row.dev_metric = rho;
        if (!have_best || rho > outcome.best_metric) {
          outcome.best_metric = rho;
          outcome.best_step = step;
          best_params = params.clone();
          have_best = true;
        }
      }
      outcome.log.rows.push_back(row);
    }
    ++epoch;
  }

  if (!have_best) {
    best_params = params.clone();
    outcome.best_step = step;
    outcome.best_metric = -2.0;
  }
  outcome.best.params = std::move(best_params);
  outcome.best.step = outcome.best_step;
  outcome.best.dev_metric = outcome.best_metric;
  return outcome;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);

  nlohmann::json header;
  header["d"] = ckpt.params.d;
  header["n_heads"] = ckpt.params.n_heads;
  header["n_layers"] = ckpt.params.n_layers;
  header["vocab_size"] = ckpt.params.vocab_size;
  header["max_positions"] = ckpt.params.max_positions;
  header["step"] = ckpt.step;
  header["dev_metric"] = ckpt.dev_metric;
  header["param_count"] = ckpt.params.parameter_count();
  const std::string header_text = header.dump();

  out.write(Checkpoint::kMagic, sizeof(Checkpoint::kMagic));
  const std::uint32_t len = static_cast<std::uint32_t>(header_text.size());
  unsigned char len_bytes[4] = {
      static_cast<unsigned char>(len & 0xff),
      static_cast<unsigned char>((len >> 8) & 0xff),
      static_cast<unsigned char>((len >> 16) & 0xff),
      static_cast<unsigned char>((len >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(len_bytes), 4);
  out.write(header_text.data(),
            static_cast<std::streamsize>(header_text.size()));
  for (const Tensor* t : ckpt.params.tensors()) {
    out.write(reinterpret_cast<const char*>(t->data()),
              static_cast<std::streamsize>(t->size() * sizeof(double)));
  }
  if (!out) throw IoError("short write to checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);

  char magic[sizeof(Checkpoint::kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, Checkpoint::kMagic, sizeof(magic)) != 0) {
    throw IoError("bad magic in checkpoint: " + path);
  }

  unsigned char len_bytes[4];
  in.read(reinterpret_cast<char*>(len_bytes), 4);
  if (!in) throw IoError("truncated checkpoint header: " + path);
  const std::uint32_t len = static_cast<std::uint32_t>(len_bytes[0]) |
                            (static_cast<std::uint32_t>(len_bytes[1]) << 8) |
                            (static_cast<std::uint32_t>(len_bytes[2]) << 16) |
                            (static_cast<std::uint32_t>(len_bytes[3]) << 24);
  std::string header_text(len, '\0');
  in.read(header_text.data(), static_cast<std::streamsize>(len));
  if (!in) throw IoError("truncated checkpoint header: " + path);

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_text);
  } catch (const std::exception& e) {
    throw IoError("malformed checkpoint header: " + std::string(e.what()));
  }

  Checkpoint ckpt;
  ckpt.step = header.at("step").get<std::size_t>();
  ckpt.dev_metric = header.at("dev_metric").get<double>();
  ckpt.params = enc::init_params(
      0, header.at("d").get<std::size_t>(),
      header.at("n_heads").get<std::size_t>(),
      header.at("n_layers").get<std::size_t>(),
      header.at("vocab_size").get<std::size_t>(),
      header.at("max_positions").get<std::size_t>());

  const std::size_t expected = header.at("param_count").get<std::size_t>();
  if (expected != ckpt.params.parameter_count()) {
    throw IoError("checkpoint dims disagree with payload: header says " +
                  std::to_string(expected) + " parameters, dims imply " +
                  std::to_string(ckpt.params.parameter_count()));
  }

  std::size_t read_bytes = 0;
  for (Tensor* t : ckpt.params.tensors()) {
    in.read(reinterpret_cast<char*>(t->data()),
            static_cast<std::streamsize>(t->size() * sizeof(double)));
    read_bytes += static_cast<std::size_t>(in.gcount());
    if (!in) {
      throw IoError("truncated checkpoint payload: expected " +
                    std::to_string(expected * sizeof(double)) +
                    " bytes, got " + std::to_string(read_bytes));
    }
  }
  char extra;
  if (in.read(&extra, 1)) {
    throw IoError("checkpoint has trailing bytes beyond the declared payload");
  }
  return ckpt;
}

}  // namespace hicl::train
