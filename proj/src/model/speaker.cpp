#include "relcap/model/speaker.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "relcap/numerics/ops.hpp"
#include "relcap/numerics/tape.hpp"

namespace relcap::model {

namespace ops = numerics;

namespace {

Tensor drop(const Tensor& x, const ModelConfig& config, const ForwardMode& mode) {
  if (!mode.training || config.dropout_rate == 0.0) return x;
  if (mode.rng == nullptr) throw std::invalid_argument("training forward pass needs an rng for dropout");
  return ops::dropout(x, 1.0 - config.dropout_rate, *mode.rng, true);
}

void check_grid(const ModelConfig& config, const Tensor& f, const char* which) {
  if (!f.defined() || f.rank() != 3 || f.dim(1) != config.positions() || f.dim(2) != config.feature_dim) {
    throw std::invalid_argument(std::string(which) + " grid shape " +
                                (f.defined() ? numerics::to_string(f.shape()) : std::string("<undefined>")) +
                                " does not match config [B, " + std::to_string(config.positions()) + ", " +
                                std::to_string(config.feature_dim) + "]");
  }
}

void check_grids(const ModelConfig& config, const Tensor& f_src, const Tensor& f_trg) {
  check_grid(config, f_src, "source");
  check_grid(config, f_trg, "target");
  if (f_src.dim(0) != f_trg.dim(0)) {
    throw std::invalid_argument("source/target batch mismatch " + numerics::to_string(f_src.shape()) + " vs " +
                                numerics::to_string(f_trg.shape()));
  }
}

// Context vector from position weights: sum_i weights[b, i] * features[b, i, :].
Tensor weighted_sum(const Tensor& weights, const Tensor& features) {
  const std::size_t batch = features.dim(0), len = features.dim(1), width = features.dim(2);
  return ops::reshape(ops::bmm(ops::reshape(weights, {batch, 1, len}), features), {batch, width});
}

// Batch rows of a [B, ...] tensor in the given order.
Tensor take_rows(const Tensor& x, std::span<const std::size_t> order) {
  numerics::Shape shape = x.shape();
  const std::size_t width = x.size() / shape[0];
  return ops::reshape(ops::gather_rows(ops::reshape(x, {shape[0], width}), order), shape);
}

// The first `rows` examples of an encoded batch.
EncodedPair first_rows(const EncodedPair& enc, std::size_t rows) {
  auto head = [&](const Tensor& x) { return x.defined() ? ops::slice(x, 0, 0, rows) : x; };
  EncodedPair out{head(enc.src), head(enc.trg), head(enc.joint), head(enc.src_keys), head(enc.trg_keys), {}};
  for (const auto& a : enc.attention) out.attention.push_back({a.name, head(a.tensor)});
  return out;
}

// Embedding lookup and LSTM advance shared by every variant.
DecoderState advance(const ModelConfig& config, const ModelParams& params, std::span<const TokenId> tokens,
                     const DecoderState& state, const ForwardMode& mode) {
  if (tokens.size() != state.h.dim(0)) {
    throw std::invalid_argument("step: " + std::to_string(tokens.size()) + " tokens for batch of " +
                                std::to_string(state.h.dim(0)));
  }
  for (TokenId t : tokens) {
    if (t >= config.vocab_size) {
      throw std::invalid_argument("step: token " + std::to_string(t) + " outside vocabulary of " +
                                  std::to_string(config.vocab_size));
    }
  }
  const Tensor embedded = drop(ops::gather_rows(params.at("embedding"), tokens), config, mode);
  return lstm_cell(embedded, state, params);
}

StepOutput predict(const ModelConfig& config, const ModelParams& params, const Tensor& merged,
                   DecoderState state, std::vector<numerics::NamedTensor> attention, const ForwardMode& mode) {
  const Tensor logits = ops::linear(drop(merged, config, mode), params.at("out.w"), params.at("out.b"));
  return {ops::log_softmax(logits, 1), std::move(state), std::move(attention)};
}

// Source head queried by h, then target head queried by the source head's output.
StepOutput sequential_heads(const ModelConfig& config, const ModelParams& params, const Tensor& src,
                            const Tensor& trg, std::span<const TokenId> tokens, const DecoderState& state,
                            const ForwardMode& mode) {
  DecoderState next = advance(config, params, tokens, state, mode);
  const Tensor h = drop(next.h, config, mode);
  const Attention src_head = attend(h, src, params.at("mh.w_src"));
  const Tensor h_src =
      ops::tanh(ops::linear(ops::concat({src_head.context, h}, 1), params.at("mh.w_2"), params.at("mh.b_2")));
  const Attention trg_head = attend(h_src, trg, params.at("mh.w_trg"));
  const Tensor h_trg =
      ops::tanh(ops::linear(ops::concat({trg_head.context, h_src}, 1), params.at("mh.w_3"), params.at("mh.b_3")));
  return predict(config, params, h_trg, std::move(next),
                 {{"alpha_src", src_head.weights}, {"alpha_trg", trg_head.weights}}, mode);
}

// One direction of the static cross-attention: each query-side position
// attends over the other grid, and the pair is merged by tanh(W_4[f; f_hat] + b_4).
std::pair<Tensor, Tensor> cross_attend(const Tensor& query_side, const Tensor& key_side, const Tensor& w_query,
                                       const Tensor& w_key, const Tensor& w_merge, const Tensor& b_merge) {
  const Tensor scores = ops::bmm(ops::linear(query_side, w_query), ops::linear(key_side, w_key), true);
  const Tensor alpha = ops::softmax(scores, 2);
  const Tensor attended = ops::bmm(alpha, key_side);
  const Tensor merged = ops::tanh(ops::linear(ops::concat({query_side, attended}, 2), w_merge, b_merge));
  return {merged, alpha};
}

}  // namespace

DecoderState DecoderState::zeros(std::size_t batch, std::size_t hidden) {
  return {Tensor::zeros({batch, hidden}), Tensor::zeros({batch, hidden})};
}

DecoderState lstm_cell(const Tensor& input, const DecoderState& state, const ModelParams& params) {
  const Tensor& w_x = params.at("lstm.w_x");
  const Tensor& w_h = params.at("lstm.w_h");
  const std::size_t hidden = w_h.dim(1);
  if (input.rank() != 2 || input.dim(1) != w_x.dim(1)) {
    throw std::invalid_argument("lstm_cell: input shape " + numerics::to_string(input.shape()) +
                                " does not match embedding width " + std::to_string(w_x.dim(1)));
  }
  if (state.h.shape() != numerics::Shape{input.dim(0), hidden} || state.c.shape() != state.h.shape()) {
    throw std::invalid_argument("lstm_cell: state shape " + numerics::to_string(state.h.shape()) + " / " +
                                numerics::to_string(state.c.shape()) + " does not match [" +
                                std::to_string(input.dim(0)) + "," + std::to_string(hidden) + "]");
  }
  const Tensor gates = ops::add_bias(ops::add(ops::linear(input, w_x), ops::linear(state.h, w_h)), params.at("lstm.b"));
  const Tensor in_gate = ops::sigmoid(ops::slice(gates, 1, 0, hidden));
  const Tensor forget_gate = ops::sigmoid(ops::slice(gates, 1, hidden, hidden));
  const Tensor candidate = ops::tanh(ops::slice(gates, 1, 2 * hidden, hidden));
  const Tensor out_gate = ops::sigmoid(ops::slice(gates, 1, 3 * hidden, hidden));
  const Tensor c = ops::add(ops::mul(forget_gate, state.c), ops::mul(in_gate, candidate));
  const Tensor h = ops::mul(out_gate, ops::tanh(c));
  return {h, c};
}

Attention attend(const Tensor& query, const Tensor& features, const Tensor& weight) {
  if (features.rank() != 3) {
    throw std::invalid_argument("attend: features must be [B, L, D], got " + numerics::to_string(features.shape()));
  }
  if (query.rank() != 2 || query.dim(0) != features.dim(0)) {
    throw std::invalid_argument("attend: query shape " + numerics::to_string(query.shape()) +
                                " does not match features " + numerics::to_string(features.shape()));
  }
  const std::size_t batch = features.dim(0), len = features.dim(1), width = features.dim(2);
  const Tensor projected = ops::matmul(query, weight);  // [B, D]
  if (projected.dim(1) != width) {
    throw std::invalid_argument("attend: weight shape " + numerics::to_string(weight.shape()) +
                                " does not match features " + numerics::to_string(features.shape()));
  }
  const Tensor scores = ops::bmm(features, ops::reshape(projected, {batch, width, 1}));
  const Tensor weights = ops::softmax(ops::reshape(scores, {batch, len}), 1);
  return {weights, weighted_sum(weights, features)};
}

StaticPrecompute static_relational_precompute(const Tensor& f_src, const Tensor& f_trg, const ModelParams& params) {
  if (f_src.rank() != 3 || f_src.shape() != f_trg.shape()) {
    throw std::invalid_argument("static_relational_precompute: grid shapes " + numerics::to_string(f_src.shape()) +
                                " vs " + numerics::to_string(f_trg.shape()));
  }
  auto [src, alpha_s2t] = cross_attend(f_src, f_trg, params.at("static.s2t.w_s"), params.at("static.s2t.w_t"),
                                       params.at("static.s2t.w_4"), params.at("static.s2t.b_4"));
  auto [trg, alpha_t2s] = cross_attend(f_trg, f_src, params.at("static.t2s.w_t"), params.at("static.t2s.w_s"),
                                       params.at("static.t2s.w_4"), params.at("static.t2s.b_4"));
  return {src, trg, alpha_s2t, alpha_t2s};
}

EncodedPair encode(const ModelConfig& config, const ModelParams& params, const Tensor& f_src, const Tensor& f_trg) {
  check_grids(config, f_src, f_trg);
  EncodedPair enc;
  switch (config.variant) {
    case Variant::basic:
      enc.src = f_src;
      enc.trg = f_trg;
      enc.joint = ops::concat({f_src, f_trg}, 1);
      break;
    case Variant::multihead:
      enc.src = f_src;
      enc.trg = f_trg;
      break;
    case Variant::static_relational: {
      auto pre = static_relational_precompute(f_src, f_trg, params);
      enc.src = pre.src;
      enc.trg = pre.trg;
      enc.attention = {{"alpha_s2t", pre.alpha_s2t}, {"alpha_t2s", pre.alpha_t2s}};
      break;
    }
    case Variant::dynamic_relational:
      enc.src = f_src;
      enc.trg = f_trg;
      enc.src_keys = ops::linear(f_src, params.at("dyn.w_sk"));
      enc.trg_keys = ops::linear(f_trg, params.at("dyn.w_tk"));
      break;
  }
  return enc;
}

StepOutput basic_step(const ModelConfig& config, const ModelParams& params, const EncodedPair& encoded,
                      std::span<const TokenId> tokens, const DecoderState& state, const ForwardMode& mode) {
  DecoderState next = advance(config, params, tokens, state, mode);
  const Tensor h = drop(next.h, config, mode);
  const Attention att = attend(h, encoded.joint, params.at("basic.w_img"));
  const Tensor merged =
      ops::tanh(ops::linear(ops::concat({att.context, h}, 1), params.at("basic.w_1"), params.at("basic.b_1")));
  return predict(config, params, merged, std::move(next), {{"alpha", att.weights}}, mode);
}

StepOutput multihead_step(const ModelConfig& config, const ModelParams& params, const EncodedPair& encoded,
                          std::span<const TokenId> tokens, const DecoderState& state, const ForwardMode& mode) {
  return sequential_heads(config, params, encoded.src, encoded.trg, tokens, state, mode);
}

StepOutput static_step(const ModelConfig& config, const ModelParams& params, const EncodedPair& encoded,
                       std::span<const TokenId> tokens, const DecoderState& state, const ForwardMode& mode) {
  return sequential_heads(config, params, encoded.src, encoded.trg, tokens, state, mode);
}

StepOutput dynamic_step(const ModelConfig& config, const ModelParams& params, const EncodedPair& encoded,
                        std::span<const TokenId> tokens, const DecoderState& state, const ForwardMode& mode) {
  DecoderState next = advance(config, params, tokens, state, mode);
  const Tensor& h = next.h;
  const std::size_t batch = encoded.src.dim(0), len = encoded.src.dim(1);

  // a[b, i, j] = (W_sk f_i * W_tk f_j) . (W_hk h), evaluated as ((W_sk f_i) * q) . (W_tk f_j)
  const Tensor query = ops::linear(h, params.at("dyn.w_hk"));
  const Tensor scores = ops::bmm(ops::hadamard_rows(encoded.src_keys, query), encoded.trg_keys, true);
  const Tensor alpha =
      ops::reshape(ops::softmax(ops::reshape(scores, {batch, len * len}), 1), {batch, len, len});

  // sum_{i,j} alpha_ij f_i = sum_i (sum_j alpha_ij) f_i, and likewise for f_j.
  const Tensor src_context = weighted_sum(ops::sum_axis(alpha, 2), encoded.src);
  const Tensor trg_context = weighted_sum(ops::sum_axis(alpha, 1), encoded.trg);
  const Tensor merged = ops::tanh(
      ops::linear(ops::concat({src_context, trg_context, h}, 1), params.at("dyn.w_5"), params.at("dyn.b_5")));
  return predict(config, params, merged, std::move(next), {{"alpha_pairs", alpha}}, mode);
}

StepOutput step(const ModelConfig& config, const ModelParams& params, const EncodedPair& encoded,
                std::span<const TokenId> tokens, const DecoderState& state, const ForwardMode& mode) {
  switch (config.variant) {
    case Variant::basic: return basic_step(config, params, encoded, tokens, state, mode);
    case Variant::multihead: return multihead_step(config, params, encoded, tokens, state, mode);
    case Variant::static_relational: return static_step(config, params, encoded, tokens, state, mode);
    case Variant::dynamic_relational: return dynamic_step(config, params, encoded, tokens, state, mode);
  }
  throw std::logic_error("step: unknown variant");
}

StepOutput dynamic_step_oracle(const ModelConfig& config, const ModelParams& params, const Tensor& f_src,
                               const Tensor& f_trg, std::span<const TokenId> tokens, const DecoderState& state) {
  check_grids(config, f_src, f_trg);
  DecoderState next = advance(config, params, tokens, state, {});
  const Tensor& h = next.h;
  const std::size_t batch = f_src.dim(0), len = f_src.dim(1), d = config.feature_dim, hid = config.hidden_dim;
  const std::size_t pairs = len * len;

  std::vector<std::size_t> src_rows, trg_rows;
  src_rows.reserve(batch * pairs);
  trg_rows.reserve(batch * pairs);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < len; ++i) {
      for (std::size_t j = 0; j < len; ++j) {
        src_rows.push_back(b * len + i);
        trg_rows.push_back(b * len + j);
      }
    }
  }
  auto pair_rows = [&](const Tensor& per_position, const std::vector<std::size_t>& rows) {
    const std::size_t width = per_position.dim(2);
    return ops::gather_rows(ops::reshape(per_position, {batch * len, width}), rows);
  };

  const Tensor keys = ops::mul(pair_rows(ops::linear(f_src, params.at("dyn.w_sk")), src_rows),
                               pair_rows(ops::linear(f_trg, params.at("dyn.w_tk")), trg_rows));
  const Tensor query = ops::linear(h, params.at("dyn.w_hk"));
  const Tensor scores =
      ops::bmm(ops::reshape(keys, {batch, pairs, hid}), ops::reshape(query, {batch, hid, 1}));
  const Tensor alpha = ops::softmax(ops::reshape(scores, {batch, pairs}), 1);

  const Tensor& w_5 = params.at("dyn.w_5");
  const Tensor w_5s = ops::slice(w_5, 1, 0, d);
  const Tensor w_5t = ops::slice(w_5, 1, d, d);
  const Tensor w_5h = ops::slice(w_5, 1, 2 * d, hid);
  const Tensor values = ops::add(pair_rows(ops::linear(f_src, w_5s), src_rows),
                                 pair_rows(ops::linear(f_trg, w_5t), trg_rows));
  const Tensor attended = weighted_sum(alpha, ops::reshape(values, {batch, pairs, hid}));
  const Tensor merged = ops::tanh(ops::add_bias(ops::add(attended, ops::linear(h, w_5h)), params.at("dyn.b_5")));

  return predict(config, params, merged, std::move(next),
                 {{"alpha_pairs", ops::reshape(alpha, {batch, len, len})}}, {});
}

Tensor sequence_loss(const ModelConfig& config, const ModelParams& params, const Tensor& f_src, const Tensor& f_trg,
                     const std::vector<std::vector<TokenId>>& references, const ForwardMode& mode) {
  check_grids(config, f_src, f_trg);
  const std::size_t batch = f_src.dim(0);
  if (references.size() != batch) {
    throw std::invalid_argument("sequence_loss: " + std::to_string(references.size()) + " references for batch of " +
                                std::to_string(batch));
  }
  std::size_t steps = 0;
  for (const auto& ref : references) {
    if (ref.empty()) throw std::invalid_argument("sequence_loss: empty reference");
    steps = std::max(steps, ref.size() + 1);
  }

  // Rows sorted by decreasing length, so the rows still decoding at step t
  // form a prefix and finished rows can be dropped.
  std::vector<std::size_t> order(batch);
  for (std::size_t b = 0; b < batch; ++b) order[b] = b;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return references[a].size() > references[b].size(); });
  const bool sorted = std::is_sorted(order.begin(), order.end());
  EncodedPair encoded = sorted ? encode(config, params, f_src, f_trg)
                               : encode(config, params, take_rows(f_src, order), take_rows(f_trg, order));
  DecoderState state = DecoderState::zeros(batch, config.hidden_dim);
  std::size_t rows = batch;
  Tensor total;
  for (std::size_t t = 0; t < steps; ++t) {
    std::size_t active = 0;
    while (active < rows && references[order[active]].size() + 1 > t) ++active;
    if (active < rows) {
      encoded = first_rows(encoded, active);
      state = {ops::slice(state.h, 0, 0, active), ops::slice(state.c, 0, 0, active)};
      rows = active;
    }
    std::vector<TokenId> inputs(rows), targets(rows);
    std::vector<double> weights(rows);
    for (std::size_t b = 0; b < rows; ++b) {
      const auto& ref = references[order[b]];
      inputs[b] = t == 0 ? kBos : ref[t - 1];
      targets[b] = t < ref.size() ? ref[t] : kEos;
      weights[b] = 1.0 / (static_cast<double>(ref.size() + 1) * static_cast<double>(batch));
    }
    StepOutput out = step(config, params, encoded, inputs, state, mode);
    const Tensor loss_t = ops::weighted_nll(out.log_probs, targets, weights);
    total = total.defined() ? ops::add(total, loss_t) : loss_t;
    state = std::move(out.state);
  }
  return total;
}

TokenId argmax_token(std::span<const double> scores) {
  if (scores.empty()) throw std::invalid_argument("argmax_token: empty scores");
  TokenId best = 0;
  for (TokenId k = 1; k < scores.size(); ++k) {
    if (scores[k] > scores[best]) best = k;
  }
  return best;
}

std::vector<std::vector<TokenId>> greedy_decode(const ModelConfig& config, const ModelParams& params,
                                                const Tensor& f_src, const Tensor& f_trg) {
  numerics::NoGradScope no_grad;
  check_grids(config, f_src, f_trg);
  const std::size_t batch = f_src.dim(0), vocab = config.vocab_size;
  const EncodedPair encoded = encode(config, params, f_src, f_trg);
  DecoderState state = DecoderState::zeros(batch, config.hidden_dim);
  std::vector<std::vector<TokenId>> outputs(batch);
  std::vector<bool> done(batch, false);
  std::vector<TokenId> tokens(batch, kBos);
  std::size_t remaining = batch;
  for (std::size_t t = 0; t < config.max_decode_len && remaining > 0; ++t) {
    StepOutput out = step(config, params, encoded, tokens, state, {});
    const auto lp = out.log_probs.values();
    for (std::size_t b = 0; b < batch; ++b) {
      if (done[b]) {
        tokens[b] = kPad;
        continue;
      }
      const TokenId next = argmax_token(lp.subspan(b * vocab, vocab));
      if (next == kEos) {
        done[b] = true;
        --remaining;
        tokens[b] = kPad;
      } else {
        outputs[b].push_back(next);
        tokens[b] = next;
      }
    }
    state = std::move(out.state);
  }
  return outputs;
}

}  // namespace relcap::model
