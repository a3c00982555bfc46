#pragma once

#include <span>
#include <vector>

#include "relcap/model/config.hpp"
#include "relcap/model/params.hpp"
#include "relcap/numerics/gradcheck.hpp"
#include "relcap/numerics/rng.hpp"
#include "relcap/numerics/tensor.hpp"

// Relational speaker decoders. All functions are batched: feature grids are
// [B, N*N, D] tensors, decoder state and queries are [B, ·]. A single example
// is simply B = 1.
namespace relcap::model {

using numerics::Tensor;

struct DecoderState {
  Tensor h;  // [B, H]
  Tensor c;  // [B, H]

  static DecoderState zeros(std::size_t batch, std::size_t hidden);
};

// Dropout is applied only when `training` is set; it then draws from `rng`.
struct ForwardMode {
  bool training = false;
  numerics::Rng* rng = nullptr;
};

struct StepOutput {
  Tensor log_probs;  // [B, V]
  DecoderState state;
  std::vector<numerics::NamedTensor> attention;  // every alpha produced this step
};

struct Attention {
  Tensor weights;  // [B, L], softmax over positions
  Tensor context;  // [B, D]
};

// Per-example inputs prepared once before decoding. For the static variant
// `src`/`trg` hold the relationship-aware sequences; for the dynamic variant
// `src_keys`/`trg_keys` hold W_sk f_src and W_tk f_trg.
struct EncodedPair {
  Tensor src;
  Tensor trg;
  Tensor joint;  // basic: [B, 2L, D], source positions first
  Tensor src_keys;
  Tensor trg_keys;
  std::vector<numerics::NamedTensor> attention;  // static cross-attention maps
};

struct StaticPrecompute {
  Tensor src;        // f^s, [B, L, D]
  Tensor trg;        // f^t, [B, L, D]
  Tensor alpha_s2t;  // [B, L, L], rows sum to 1
  Tensor alpha_t2s;  // [B, L, L]
};

DecoderState lstm_cell(const Tensor& input, const DecoderState& state, const ModelParams& params);

// alpha_i = softmax_i(query^T W f_i), context = sum_i alpha_i f_i.
// query [B, Q], features [B, L, D], weight [Q, D].
Attention attend(const Tensor& query, const Tensor& features, const Tensor& weight);

StaticPrecompute static_relational_precompute(const Tensor& f_src, const Tensor& f_trg, const ModelParams& params);

EncodedPair encode(const ModelConfig& config, const ModelParams& params, const Tensor& f_src, const Tensor& f_trg);

// One decoding step of the configured variant.
StepOutput step(const ModelConfig& config, const ModelParams& params, const EncodedPair& encoded,
                std::span<const TokenId> tokens, const DecoderState& state, const ForwardMode& mode = {});

StepOutput basic_step(const ModelConfig& config, const ModelParams& params, const EncodedPair& encoded,
                      std::span<const TokenId> tokens, const DecoderState& state, const ForwardMode& mode = {});
StepOutput multihead_step(const ModelConfig& config, const ModelParams& params, const EncodedPair& encoded,
                          std::span<const TokenId> tokens, const DecoderState& state,
                          const ForwardMode& mode = {});
StepOutput static_step(const ModelConfig& config, const ModelParams& params, const EncodedPair& encoded,
                       std::span<const TokenId> tokens, const DecoderState& state, const ForwardMode& mode = {});
StepOutput dynamic_step(const ModelConfig& config, const ModelParams& params, const EncodedPair& encoded,
                        std::span<const TokenId> tokens, const DecoderState& state, const ForwardMode& mode = {});

// Brute-force dynamic step: materializes all N^4 (i, j) relationship pairs
// with key W_sk f_i * W_tk f_j and value W_5s f_i + W_5t f_j, then attends
// with query W_hk h. Evaluation mode only; meant for small N.
StepOutput dynamic_step_oracle(const ModelConfig& config, const ModelParams& params, const Tensor& f_src,
                               const Tensor& f_trg, std::span<const TokenId> tokens, const DecoderState& state);

// Teacher-forced loss: inputs [BOS, w1..wT], targets [w1..wT, EOS]. Each
// example contributes its mean token NLL; the batch loss is their mean.
// References exclude BOS/EOS and must be non-empty.
Tensor sequence_loss(const ModelConfig& config, const ModelParams& params, const Tensor& f_src,
                     const Tensor& f_trg, const std::vector<std::vector<TokenId>>& references,
                     const ForwardMode& mode = {});

// Maximum decoding from BOS; stops at EOS or max_decode_len. Output excludes
// BOS/EOS. Argmax ties go to the lowest token id.
std::vector<std::vector<TokenId>> greedy_decode(const ModelConfig& config, const ModelParams& params,
                                                const Tensor& f_src, const Tensor& f_trg);

TokenId argmax_token(std::span<const double> scores);

}  // namespace relcap::model
