#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hicl/encoder.hpp"
#include "hicl/hierarchy.hpp"
#include "hicl/losses.hpp"
#include "hicl/rng.hpp"
#include "hicl/tensor.hpp"
#include "hicl/textproc.hpp"

namespace hicl::train {

enum class OptimizerKind { kSgd, kAdam };
enum class PositiveStrategy { kDropout, kRepetition };

struct TrainConfig {
  std::size_t batch_size = 16;
  std::size_t steps = 800;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  std::size_t eval_every = 125;
  std::size_t slice_len = 32;
  loss::LossConfig loss;
  hier::PoolingMode pooling = hier::PoolingMode::kWeighted;
  PositiveStrategy strategy = PositiveStrategy::kDropout;
  double repetition_rate = 0.25;
  std::size_t queue_capacity = 0;  // negative-queue capacity in rows; 0 = off
  double dropout_rate = 0.1;
  std::uint64_t seed = 0;

  // encoder dims
  std::size_t d = 64;
  std::size_t n_heads = 4;
  std::size_t n_layers = 2;
  std::size_t max_positions = 512;

  void validate() const;
};

/// FIFO buffer of recent sequence embeddings, stored as detached values
/// so nothing in it ever receives a gradient.
class MomentumQueue {
 public:
  explicit MomentumQueue(std::size_t capacity_rows);

  /// Copy each row of `rows` into the queue, evicting oldest rows first.
  void push(const Tensor& rows);
  /// Current contents as an (size, d) tensor, oldest row first.
  Tensor snapshot() const;
  std::size_t size() const { return rows_.size(); }
  std::size_t capacity() const { return capacity_; }

 private:
  std::size_t capacity_;
  std::size_t width_ = 0;
  std::deque<std::vector<double>> rows_;
};

/// Adam/SGD state over a fixed-order parameter list.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate);

  /// grads is aligned with params; a null entry means zero gradient.
  void step(std::vector<Tensor*>& params,
            const std::vector<const Tensor*>& grads);

  OptimizerKind kind() const { return kind_; }

 private:
  OptimizerKind kind_;
  double lr_;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  std::size_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

/// Build the two encoder input lists of a positive pair. The dropout
/// strategy returns the batch twice (divergence comes from the dropout
/// branches); repetition duplicates ceil(rate * body) non-special token
/// positions of each sequence in the second copy.
std::pair<std::vector<text::TokenSeq>, std::vector<text::TokenSeq>>
make_positive_inputs(const std::vector<text::TokenSeq>& batch,
                     PositiveStrategy strategy, double rate, RngCursor& rng);

struct StepResult {
  loss::LossBreakdown losses;
  std::size_t queue_rows_used = 0;
};

/// One optimization step: encode both branches hierarchically, evaluate
/// the configured objective (queue rows join the global negatives),
/// backpropagate, update parameters, then push this step's sequence rows
/// into the queue.
StepResult train_step(enc::EncoderParams& params,
                      const std::vector<text::TokenSeq>& batch,
                      const TrainConfig& cfg, Optimizer& optimizer,
                      MomentumQueue* queue, std::size_t step_index);

struct Checkpoint {
  static constexpr char kMagic[5] = {'H', 'I', 'C', 'L', '1'};
  /// dev_metric is -2 when the model was never evaluated.
  enc::EncoderParams params;
  std::size_t step = 0;
  double dev_metric = -2.0;
};

/// Binary layout: 5-byte magic "HICL1", little-endian u32 header length,
/// JSON header (dims, step, metric, parameter count), then the raw
/// little-endian f64 payload in EncoderParams::tensors() order.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

struct LogRow {
  std::size_t step = 0;
  double total = 0.0;
  double global_term = 0.0;
  double local_term = 0.0;
  std::optional<double> entailment_term;
  std::optional<double> dev_metric;
};

struct TrainingLog {
  std::vector<LogRow> rows;
  std::string to_tsv() const;
};

struct TrainOutcome {
  Checkpoint best;
  TrainingLog log;
  std::size_t best_step = 0;
  double best_metric = -2.0;
};

/// Full loop: shuffled batches, a dev evaluation every cfg.eval_every
/// steps, best checkpoint retained (ties keep the earliest step).
TrainOutcome train(const TrainConfig& cfg,
                   const std::vector<text::TokenSeq>& corpus,
                   const std::vector<text::StsRecord>& dev_set,
                   std::size_t vocab_size);

}  // namespace hicl::train
