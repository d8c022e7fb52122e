#include "hicl/encoder.hpp"

#include <cmath>
#include <string>

#include "hicl/errors.hpp"

namespace hicl::enc {
namespace {

std::uint64_t content_key(const std::vector<text::TokenId>& ids) {
  // FNV-1a over the id stream
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (text::TokenId id : ids) {
    h ^= id;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Tensor uniform_tensor(RngCursor& rng, std::vector<std::size_t> shape,
                      double limit) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) {
    t.data()[i] = rng.next_uniform(-limit, limit);
  }
  return t;
}

double xavier_limit(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

}  // namespace

std::vector<Tensor*> EncoderParams::tensors() {
  std::vector<Tensor*> out;
  out.push_back(&token_embedding);
  out.push_back(&position_embedding);
  for (LayerParams& l : layers) {
    for (Tensor* t : {&l.ln1_gamma, &l.ln1_beta, &l.wq, &l.bq, &l.wk, &l.bk,
                      &l.wv, &l.bv, &l.wo, &l.bo, &l.ln2_gamma, &l.ln2_beta,
                      &l.w1, &l.b1, &l.w2, &l.b2}) {
      out.push_back(t);
    }
  }
  out.push_back(&final_ln_gamma);
  out.push_back(&final_ln_beta);
  return out;
}

std::vector<const Tensor*> EncoderParams::tensors() const {
  auto mutable_list = const_cast<EncoderParams*>(this)->tensors();
  return {mutable_list.begin(), mutable_list.end()};
}

std::size_t EncoderParams::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor* t : tensors()) n += t->size();
  return n;
}

EncoderParams EncoderParams::clone() const {
  EncoderParams out = *this;  // copies share buffers until the loop below
  for (Tensor* t : out.tensors()) *t = t->clone();
  return out;
}

EncoderParams init_params(std::uint64_t seed, std::size_t d,
                          std::size_t n_heads, std::size_t n_layers,
                          std::size_t vocab_size, std::size_t max_positions) {
  if (d == 0 || n_heads == 0 || d % n_heads != 0) {
    throw NumericsError("init_params: d (" + std::to_string(d) +
                        ") must be a positive multiple of n_heads (" +
                        std::to_string(n_heads) + ")");
  }
  if (n_layers == 0 || vocab_size == 0 || max_positions == 0) {
    throw NumericsError("init_params: invalid dims");
  }

  RngCursor rng(RngStream(seed, RngPurpose::kInit));
  EncoderParams p;
  p.d = d;
  p.n_heads = n_heads;
  p.n_layers = n_layers;
  p.vocab_size = vocab_size;
  p.max_positions = max_positions;

  const double emb_limit = std::sqrt(3.0 / static_cast<double>(d));
  p.token_embedding = uniform_tensor(rng, {vocab_size, d}, emb_limit);
  p.position_embedding = uniform_tensor(rng, {max_positions, d}, emb_limit);

  const std::size_t ff = 4 * d;
  for (std::size_t l = 0; l < n_layers; ++l) {
    LayerParams layer;
    layer.ln1_gamma = Tensor::full({d}, 1.0);
    layer.ln1_beta = Tensor::zeros({d});
    const double attn_limit = xavier_limit(d, d);
    layer.wq = uniform_tensor(rng, {d, d}, attn_limit);
    layer.bq = Tensor::zeros({d});
    layer.wk = uniform_tensor(rng, {d, d}, attn_limit);
    layer.bk = Tensor::zeros({d});
    layer.wv = uniform_tensor(rng, {d, d}, attn_limit);
    layer.bv = Tensor::zeros({d});
    layer.wo = uniform_tensor(rng, {d, d}, attn_limit);
    layer.bo = Tensor::zeros({d});
    layer.ln2_gamma = Tensor::full({d}, 1.0);
    layer.ln2_beta = Tensor::zeros({d});
    layer.w1 = uniform_tensor(rng, {d, ff}, xavier_limit(d, ff));
    layer.b1 = Tensor::zeros({ff});
    layer.w2 = uniform_tensor(rng, {ff, d}, xavier_limit(ff, d));
    layer.b2 = Tensor::zeros({d});
    p.layers.push_back(std::move(layer));
  }
  p.final_ln_gamma = Tensor::full({d}, 1.0);
  p.final_ln_beta = Tensor::zeros({d});
  return p;
}

DropoutBranch DropoutBranch::off() { return DropoutBranch{}; }

DropoutBranch DropoutBranch::p(double rate, std::uint64_t seed,
                               std::uint64_t salt) {
  DropoutBranch b;
  b.rate = rate;
  b.label = BranchLabel::kP;
  b.stream = RngStream(seed, RngPurpose::kDropoutA).derived(salt);
  return b;
}

DropoutBranch DropoutBranch::p_plus(double rate, std::uint64_t seed,
                                    std::uint64_t salt) {
  DropoutBranch b;
  b.rate = rate;
  b.label = BranchLabel::kPPlus;
  b.stream = RngStream(seed, RngPurpose::kDropoutB).derived(salt);
  return b;
}

BoundEncoder bind(Graph& graph, const EncoderParams& params, bool trainable) {
  BoundEncoder bound;
  bound.graph = &graph;
  bound.dims = &params;
  for (const Tensor* t : params.tensors()) {
    bound.leaves.push_back(graph.leaf(*t, trainable));
  }
  return bound;
}

namespace {

// Leaf order within one layer, offset from the layer base index.
enum LayerSlot {
  kLn1Gamma, kLn1Beta, kWq, kBq, kWk, kBk, kWv, kBv, kWo, kBo,
  kLn2Gamma, kLn2Beta, kW1, kB1, kW2, kB2, kSlotsPerLayer
};

struct DropoutState {
  bool active = false;
  double rate = 0.0;
  RngStream stream{0, RngPurpose::kDropoutA};
  std::uint64_t cursor = 0;
};

Var apply_dropout(Graph& g, Var x, DropoutState& state) {
  if (!state.active) return x;
  const Tensor& xv = g.value(x);
  const double keep = 1.0 - state.rate;
  Tensor mask(xv.shape());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const double u = state.stream.uniform_at(state.cursor++);
    mask.data()[i] = u < state.rate ? 0.0 : 1.0 / keep;
  }
  return g.mul(x, g.constant(std::move(mask)));
}

Var encode_one(BoundEncoder& bound, const std::vector<text::TokenId>& raw_ids,
               const DropoutBranch& branch) {
  Graph& g = *bound.graph;
  const EncoderParams& dims = *bound.dims;

  std::vector<std::size_t> ids;
  ids.reserve(raw_ids.size() + 1);
  if (raw_ids.empty() || raw_ids.front() != text::Vocab::kCls) {
    ids.push_back(text::Vocab::kCls);
  }
  for (text::TokenId t : raw_ids) {
    if (t >= dims.vocab_size) {
      throw NumericsError("encode: token id " + std::to_string(t) +
                          " out of range for vocab of " +
                          std::to_string(dims.vocab_size));
    }
    ids.push_back(t);
  }
  const std::size_t T = ids.size();
  if (T > dims.max_positions) {
    throw NumericsError("encode: input of length " + std::to_string(T) +
                        " exceeds the position table (" +
                        std::to_string(dims.max_positions) + ")");
  }

  DropoutState drop;
  drop.active = branch.active();
  drop.rate = branch.rate;
  if (drop.active) {
    drop.stream = branch.stream.derived(content_key(raw_ids));
  }

  std::vector<std::size_t> positions(T);
  for (std::size_t i = 0; i < T; ++i) positions[i] = i;

  Var x = g.add(g.gather_rows(bound.leaf(0), ids),
                g.gather_rows(bound.leaf(1), positions));
  x = apply_dropout(g, x, drop);

  const std::size_t d = dims.d;
  const std::size_t head_dim = d / dims.n_heads;
  const double attn_scale = 1.0 / std::sqrt(static_cast<double>(head_dim));

  for (std::size_t l = 0; l < dims.n_layers; ++l) {
    const std::size_t base = 2 + l * kSlotsPerLayer;
    auto slot = [&](LayerSlot s) { return bound.leaf(base + s); };

    Var h = g.layer_norm(x, slot(kLn1Gamma), slot(kLn1Beta));
    Var q = g.add(g.matmul(h, slot(kWq)), g.broadcast_to(slot(kBq), T, d));
    Var k = g.add(g.matmul(h, slot(kWk)), g.broadcast_to(slot(kBk), T, d));
    Var v = g.add(g.matmul(h, slot(kWv)), g.broadcast_to(slot(kBv), T, d));

    Var attn_out;
    for (std::size_t head = 0; head < dims.n_heads; ++head) {
      const std::size_t c0 = head * head_dim, c1 = c0 + head_dim;
      Var qh = g.slice_cols(q, c0, c1);
      Var kh = g.slice_cols(k, c0, c1);
      Var vh = g.slice_cols(v, c0, c1);
      Var scores = g.scale(g.matmul(qh, g.transpose(kh)), attn_scale);
      Var probs = g.softmax_cols(scores);
      Var context = g.matmul(probs, vh);
      // stitching heads back together via the matching rows of wo
      std::vector<std::size_t> wo_rows(head_dim);
      for (std::size_t i = 0; i < head_dim; ++i) wo_rows[i] = c0 + i;
      Var projected = g.matmul(context, g.gather_rows(slot(kWo), wo_rows));
      attn_out = head == 0 ? projected : g.add(attn_out, projected);
    }
    attn_out = g.add(attn_out, g.broadcast_to(slot(kBo), T, d));
    attn_out = apply_dropout(g, attn_out, drop);
    x = g.add(x, attn_out);

    Var h2 = g.layer_norm(x, slot(kLn2Gamma), slot(kLn2Beta));
    Var ff = g.gelu(
        g.add(g.matmul(h2, slot(kW1)), g.broadcast_to(slot(kB1), T, 4 * d)));
    ff = g.add(g.matmul(ff, slot(kW2)), g.broadcast_to(slot(kB2), T, d));
    ff = apply_dropout(g, ff, drop);
    x = g.add(x, ff);
  }

  const std::size_t n_leaves = bound.leaves.size();
  x = g.layer_norm(x, bound.leaf(n_leaves - 2), bound.leaf(n_leaves - 1));
  return g.gather_rows(x, {0});  // CLS position
}

}  // namespace

EmbeddingBatch encode(BoundEncoder& bound,
                      std::span<const std::vector<text::TokenId>> inputs,
                      DropoutBranch branch) {
  if (inputs.empty()) throw NumericsError("encode: empty input list");
  Graph& g = *bound.graph;

  std::vector<Var> cls_rows;
  cls_rows.reserve(inputs.size());
  for (const auto& ids : inputs) {
    cls_rows.push_back(encode_one(bound, ids, branch));
  }

  EmbeddingBatch batch;
  batch.rows = g.concat_rows(cls_rows);
  const Tensor& values = g.value(batch.rows);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    double norm2 = 0.0;
    for (std::size_t j = 0; j < values.cols(); ++j) {
      norm2 += values.at(i, j) * values.at(i, j);
    }
    if (norm2 == 0.0) {
      throw NumericsError("encode: zero-norm representation at row " +
                          std::to_string(i));
    }
    batch.provenance.push_back(
        ProvenanceRow{i, ProvenanceRow::kWholeSequence, branch.label});
  }
  return batch;
}

EmbeddingBatch encode(Graph& graph, const EncoderParams& params,
                      std::span<const std::vector<text::TokenId>> inputs,
                      DropoutBranch branch, bool trainable) {
  BoundEncoder bound = bind(graph, params, trainable);
  return encode(bound, inputs, branch);
}

std::pair<EmbeddingBatch, EmbeddingBatch> encode_pair(
    BoundEncoder& bound, std::span<const std::vector<text::TokenId>> inputs,
    double dropout_rate, std::uint64_t seed, std::uint64_t salt) {
  EmbeddingBatch a =
      encode(bound, inputs, DropoutBranch::p(dropout_rate, seed, salt));
  EmbeddingBatch b =
      encode(bound, inputs, DropoutBranch::p_plus(dropout_rate, seed, salt));
  return {std::move(a), std::move(b)};
}

}  // namespace hicl::enc
