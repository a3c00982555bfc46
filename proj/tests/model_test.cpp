#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "relcap/harness/verify.hpp"
#include "relcap/model/checkpoint.hpp"
#include "relcap/model/speaker.hpp"
#include "relcap/numerics/adam.hpp"
#include "relcap/numerics/ops.hpp"
#include "relcap/numerics/tape.hpp"

namespace {

using namespace relcap;
using model::DecoderState;
using model::ModelConfig;
using model::ModelParams;
using model::Variant;
using numerics::Rng;
using numerics::Tensor;

const Variant kVariants[] = {Variant::basic, Variant::multihead, Variant::static_relational,
                             Variant::dynamic_relational};

std::string name_of(Variant v) { return std::string(model::to_string(v)); }

Tensor random_tensor(numerics::Shape shape, Rng& rng, double scale = 1.0) {
  std::vector<double> v(numerics::numel(shape));
  for (double& x : v) x = rng.uniform(-scale, scale);
  return Tensor(std::move(shape), std::move(v));
}

Tensor constant_grid(std::size_t batch, std::size_t len, std::size_t d, double value) {
  return Tensor({batch, len, d}, std::vector<double>(batch * len * d, value));
}

std::vector<double> to_vector(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a.at(i) - b.at(i)));
  return worst;
}

ModelConfig small_config(Variant variant, std::size_t grid_side = 2) {
  return harness::verify_model_config(variant, grid_side);
}

model::StepOutput run_step(const ModelConfig& config, const ModelParams& params, const Tensor& f_src,
                           const Tensor& f_trg, const std::vector<model::TokenId>& tokens,
                           const DecoderState& state) {
  numerics::NoGradScope no_grad;
  const auto encoded = model::encode(config, params, f_src, f_trg);
  return model::step(config, params, encoded, tokens, state);
}

void expect_distribution_rows(const Tensor& t, std::size_t width, double tol) {
  for (std::size_t r = 0; r < t.size() / width; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < width; ++c) {
      EXPECT_GE(t.at(r * width + c), 0.0);
      total += t.at(r * width + c);
    }
    EXPECT_NEAR(total, 1.0, tol);
  }
}

TEST(LstmCell, ZeroWeightsHalveTheCell) {
  const ModelConfig config = small_config(Variant::basic);
  const ModelParams params = ModelParams::zeros(config);
  Rng rng(1);
  const Tensor input = random_tensor({2, config.embed_dim}, rng);
  const DecoderState state{random_tensor({2, config.hidden_dim}, rng), random_tensor({2, config.hidden_dim}, rng)};
  const DecoderState next = model::lstm_cell(input, state, params);
  for (std::size_t i = 0; i < state.c.size(); ++i) {
    EXPECT_DOUBLE_EQ(next.c.at(i), 0.5 * state.c.at(i));
    EXPECT_DOUBLE_EQ(next.h.at(i), 0.5 * std::tanh(0.5 * state.c.at(i)));
  }
}

TEST(LstmCell, AllZeroGivesZeroState) {
  const ModelConfig config = small_config(Variant::basic);
  const ModelParams params = ModelParams::zeros(config);
  const DecoderState next = model::lstm_cell(Tensor::zeros({1, config.embed_dim}),
                                             DecoderState::zeros(1, config.hidden_dim), params);
  for (double v : next.h.values()) EXPECT_EQ(v, 0.0);
}

TEST(LstmCell, RejectsMismatchedInput) {
  const ModelConfig config = small_config(Variant::basic);
  const ModelParams params = ModelParams::zeros(config);
  EXPECT_THROW(model::lstm_cell(Tensor::zeros({1, config.embed_dim + 1}), DecoderState::zeros(1, config.hidden_dim),
                                params),
               std::invalid_argument);
}

TEST(Attend, IdenticalFeaturesGiveThatFeature) {
  Rng rng(2);
  const std::size_t len = 5, d = 3, q = 4;
  const Tensor v = random_tensor({d}, rng);
  std::vector<double> features;
  for (std::size_t i = 0; i < len; ++i) features.insert(features.end(), v.values().begin(), v.values().end());
  const auto att = model::attend(random_tensor({1, q}, rng), Tensor({1, len, d}, features), random_tensor({q, d}, rng));
  for (std::size_t i = 0; i < len; ++i) EXPECT_DOUBLE_EQ(att.weights.at(i), 1.0 / len);
  for (std::size_t k = 0; k < d; ++k) EXPECT_DOUBLE_EQ(att.context.at(k), v.at(k));
}

TEST(Attend, SingleFeature) {
  Rng rng(3);
  const Tensor feature = random_tensor({1, 1, 3}, rng);
  const auto att = model::attend(random_tensor({1, 4}, rng), feature, random_tensor({4, 3}, rng));
  EXPECT_EQ(att.weights.at(0), 1.0);
  EXPECT_EQ(to_vector(att.context), to_vector(feature));
}

TEST(Step, OutputIsLogDistributionOverVocabulary) {
  Rng rng(4);
  for (Variant v : kVariants) {
    auto inst = harness::make_check_instance(v, 2, 3, rng);
    const auto out = run_step(inst.config, inst.params, inst.f_src, inst.f_trg, {1, 5, 7},
                              harness::random_check_state(3, inst.config, rng));
    ASSERT_EQ(out.log_probs.shape(), (numerics::Shape{3, inst.config.vocab_size})) << name_of(v);
    std::vector<double> p;
    for (double lp : out.log_probs.values()) p.push_back(std::exp(lp));
    expect_distribution_rows(Tensor({3, inst.config.vocab_size}, p), inst.config.vocab_size, 1e-12);
    for (const auto& a : out.attention) {
      expect_distribution_rows(a.tensor, a.tensor.size() / 3, 1e-10);
    }
  }
}

TEST(Step, ZeroOutputProjectionGivesUniform) {
  Rng rng(5);
  for (Variant v : kVariants) {
    auto inst = harness::make_check_instance(v, 2, 2, rng);
    for (double& x : inst.params.at("out.w").mutable_values()) x = 0.0;
    for (double& x : inst.params.at("out.b").mutable_values()) x = 0.0;
    const auto out = run_step(inst.config, inst.params, inst.f_src, inst.f_trg, {1, 4},
                              harness::random_check_state(2, inst.config, rng));
    for (double lp : out.log_probs.values()) {
      EXPECT_NEAR(-lp, std::log(static_cast<double>(inst.config.vocab_size)), 1e-14) << name_of(v);
    }
  }
}

TEST(Step, RejectsGridShapeMismatch) {
  Rng rng(6);
  for (Variant v : kVariants) {
    auto inst = harness::make_check_instance(v, 2, 1, rng);
    const Tensor wrong = random_tensor({1, 9, inst.config.feature_dim}, rng);
    EXPECT_THROW(model::encode(inst.config, inst.params, wrong, inst.f_trg), std::invalid_argument) << name_of(v);
  }
}

TEST(Step, BasicIgnoresImageOrder) {
  Rng rng(7);
  auto inst = harness::make_check_instance(Variant::basic, 2, 2, rng);
  const auto state = harness::random_check_state(2, inst.config, rng);
  const auto a = run_step(inst.config, inst.params, inst.f_src, inst.f_trg, {4, 9}, state);
  const auto b = run_step(inst.config, inst.params, inst.f_trg, inst.f_src, {4, 9}, state);
  EXPECT_LE(max_abs_diff(a.log_probs, b.log_probs), 1e-12);
}

TEST(Step, RelationalVariantsSeeImageOrder) {
  Rng rng(8);
  for (Variant v : {Variant::multihead, Variant::static_relational, Variant::dynamic_relational}) {
    auto inst = harness::make_check_instance(v, 2, 2, rng);
    const auto state = harness::random_check_state(2, inst.config, rng);
    const auto a = run_step(inst.config, inst.params, inst.f_src, inst.f_trg, {4, 9}, state);
    const auto b = run_step(inst.config, inst.params, inst.f_trg, inst.f_src, {4, 9}, state);
    double norm = 0.0;
    for (std::size_t i = 0; i < a.log_probs.size(); ++i) norm += std::pow(a.log_probs.at(i) - b.log_probs.at(i), 2);
    EXPECT_GT(std::sqrt(norm), 1e-6) << name_of(v);
  }
}

TEST(Step, ConstantGridsGiveUniformAttention) {
  Rng rng(9);
  for (Variant v : {Variant::multihead, Variant::dynamic_relational}) {
    auto inst = harness::make_check_instance(v, 3, 1, rng);
    const std::size_t len = 9, d = inst.config.feature_dim;
    const auto out = run_step(inst.config, inst.params, constant_grid(1, len, d, 0.7), constant_grid(1, len, d, -0.3),
                              {5}, harness::random_check_state(1, inst.config, rng));
    for (const auto& a : out.attention) {
      const double expected = 1.0 / static_cast<double>(a.tensor.size());
      for (double w : a.tensor.values()) EXPECT_NEAR(w, expected, 1e-15) << name_of(v) << " " << a.name;
    }
  }
}

TEST(Static, SinglePositionPrecompute) {
  Rng rng(10);
  auto inst = harness::make_check_instance(Variant::static_relational, 1, 1, rng);
  const auto pre = model::static_relational_precompute(inst.f_src, inst.f_trg, inst.params);
  EXPECT_EQ(pre.alpha_s2t.at(0), 1.0);
  EXPECT_EQ(pre.alpha_t2s.at(0), 1.0);
  const Tensor joined = numerics::concat({inst.f_src, inst.f_trg}, 2);
  const Tensor expected = numerics::tanh(
      numerics::linear(joined, inst.params.at("static.s2t.w_4"), inst.params.at("static.s2t.b_4")));
  EXPECT_LE(max_abs_diff(pre.src, expected), 1e-15);
}

TEST(Static, IdenticalTargetsAreWhatSourceSees) {
  Rng rng(11);
  auto inst = harness::make_check_instance(Variant::static_relational, 2, 1, rng);
  const std::size_t len = 4, d = inst.config.feature_dim;
  const Tensor v = random_tensor({d}, rng);
  std::vector<double> trg;
  for (std::size_t i = 0; i < len; ++i) trg.insert(trg.end(), v.values().begin(), v.values().end());
  const Tensor f_trg({1, len, d}, trg);
  const auto pre = model::static_relational_precompute(inst.f_src, f_trg, inst.params);
  // Attended target is v for every source position.
  std::vector<double> joined;
  for (std::size_t i = 0; i < len; ++i) {
    for (std::size_t k = 0; k < d; ++k) joined.push_back(inst.f_src.at(i * d + k));
    joined.insert(joined.end(), v.values().begin(), v.values().end());
  }
  const Tensor expected = numerics::tanh(numerics::linear(Tensor({1, len, 2 * d}, joined),
                                                          inst.params.at("static.s2t.w_4"),
                                                          inst.params.at("static.s2t.b_4")));
  EXPECT_LE(max_abs_diff(pre.src, expected), 1e-15);
  EXPECT_EQ(pre.src.shape(), (numerics::Shape{1, len, d}));
  EXPECT_EQ(pre.trg.shape(), (numerics::Shape{1, len, d}));
}

TEST(Static, ZeroMergeGivesZeroSequencesAndUniformAttention) {
  Rng rng(12);
  auto inst = harness::make_check_instance(Variant::static_relational, 2, 1, rng);
  for (const char* name : {"static.s2t.w_4", "static.s2t.b_4", "static.t2s.w_4", "static.t2s.b_4"}) {
    for (double& x : inst.params.at(name).mutable_values()) x = 0.0;
  }
  const auto pre = model::static_relational_precompute(inst.f_src, inst.f_trg, inst.params);
  for (double x : pre.src.values()) EXPECT_EQ(x, 0.0);
  for (double x : pre.trg.values()) EXPECT_EQ(x, 0.0);
  const auto out = run_step(inst.config, inst.params, inst.f_src, inst.f_trg, {5},
                            harness::random_check_state(1, inst.config, rng));
  for (const auto& a : out.attention) {
    if (a.name != "alpha_src" && a.name != "alpha_trg") continue;
    for (double w : a.tensor.values()) EXPECT_DOUBLE_EQ(w, 0.25);
  }
}

TEST(Dynamic, MatchesPairOracle) {
  Rng rng(13);
  for (std::size_t n = 1; n <= 4; ++n) {
    for (int trial = 0; trial < 5; ++trial) {
      auto inst = harness::make_check_instance(Variant::dynamic_relational, n, 2, rng);
      const auto state = harness::random_check_state(2, inst.config, rng);
      const std::vector<model::TokenId> tokens = {3, 11};
      const auto fast = run_step(inst.config, inst.params, inst.f_src, inst.f_trg, tokens, state);
      const auto slow = model::dynamic_step_oracle(inst.config, inst.params, inst.f_src, inst.f_trg, tokens, state);
      EXPECT_LE(max_abs_diff(fast.log_probs, slow.log_probs), 1e-10) << "N=" << n;
      EXPECT_LE(max_abs_diff(fast.attention[0].tensor, slow.attention[0].tensor), 1e-10) << "N=" << n;
      EXPECT_LE(max_abs_diff(fast.state.h, slow.state.h), 1e-10);
    }
  }
}

TEST(Dynamic, OracleSinglePair) {
  Rng rng(14);
  auto inst = harness::make_check_instance(Variant::dynamic_relational, 1, 1, rng);
  const auto out = model::dynamic_step_oracle(inst.config, inst.params, inst.f_src, inst.f_trg, std::vector<model::TokenId>{6},
                                              harness::random_check_state(1, inst.config, rng));
  EXPECT_EQ(out.attention[0].tensor.at(0), 1.0);
}

TEST(Dynamic, ZeroQueryGivesUniformPairs) {
  Rng rng(15);
  auto inst = harness::make_check_instance(Variant::dynamic_relational, 2, 1, rng);
  for (double& x : inst.params.at("dyn.w_hk").mutable_values()) x = 0.0;
  const auto state = harness::random_check_state(1, inst.config, rng);
  const auto slow = model::dynamic_step_oracle(inst.config, inst.params, inst.f_src, inst.f_trg,
                                               std::vector<model::TokenId>{6}, state);
  const auto fast = run_step(inst.config, inst.params, inst.f_src, inst.f_trg, {6}, state);
  for (double w : slow.attention[0].tensor.values()) EXPECT_DOUBLE_EQ(w, 1.0 / 16.0);
  for (double w : fast.attention[0].tensor.values()) EXPECT_DOUBLE_EQ(w, 1.0 / 16.0);
}

TEST(SequenceLoss, UniformOutputGivesLogVocab) {
  Rng rng(16);
  for (Variant v : kVariants) {
    auto inst = harness::make_check_instance(v, 2, 2, rng);
    for (double& x : inst.params.at("out.w").mutable_values()) x = 0.0;
    for (double& x : inst.params.at("out.b").mutable_values()) x = 0.0;
    numerics::NoGradScope no_grad;
    const Tensor loss = model::sequence_loss(inst.config, inst.params, inst.f_src, inst.f_trg, {{4, 5, 6}, {7}});
    EXPECT_NEAR(loss.item(), std::log(20.0), 1e-13) << name_of(v);
  }
}

TEST(SequenceLoss, NonNegativeAndRejectsEmptyReference) {
  Rng rng(17);
  auto inst = harness::make_check_instance(Variant::dynamic_relational, 2, 2, rng);
  numerics::NoGradScope no_grad;
  EXPECT_GE(model::sequence_loss(inst.config, inst.params, inst.f_src, inst.f_trg, {{4, 5}, {6}}).item(), 0.0);
  EXPECT_THROW(model::sequence_loss(inst.config, inst.params, inst.f_src, inst.f_trg, {{4, 5}, {}}),
               std::invalid_argument);
}

Tensor batch_row(const Tensor& x, std::size_t b) {
  const std::size_t width = x.size() / x.dim(0);
  const auto v = x.values();
  return Tensor({1, x.dim(1), x.dim(2)}, std::vector<double>(v.begin() + b * width, v.begin() + (b + 1) * width));
}

// A batch of mixed-length references gives the mean of the single-example
// losses, and the mean of their gradients.
TEST(SequenceLoss, BatchIsMeanOfSingleExamples) {
  const std::vector<std::vector<model::TokenId>> refs = {{4}, {5, 6, 7, 8}, {9, 10}, {11, 12, 13, 14}};
  for (Variant v : kVariants) {
    Rng rng(31);
    auto inst = harness::make_check_instance(v, 2, refs.size(), rng);
    auto grads = [&](const Tensor& f_src, const Tensor& f_trg, const std::vector<std::vector<model::TokenId>>& r) {
      inst.params.zero_grad();
      numerics::Tape tape;
      Tensor loss;
      {
        numerics::TapeScope scope(tape);
        loss = model::sequence_loss(inst.config, inst.params, f_src, f_trg, r);
      }
      tape.backward(loss);
      std::vector<double> g{loss.item()};
      for (const auto& e : inst.params.entries()) {
        const auto gv = e.tensor.grad();
        g.insert(g.end(), gv.begin(), gv.end());
      }
      return g;
    };
    inst.params.set_requires_grad(true);
    const auto batched = grads(inst.f_src, inst.f_trg, refs);
    std::vector<double> mean(batched.size(), 0.0);
    for (std::size_t b = 0; b < refs.size(); ++b) {
      const auto single = grads(batch_row(inst.f_src, b), batch_row(inst.f_trg, b), {refs[b]});
      for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += single[k] / static_cast<double>(refs.size());
    }
    double worst = 0.0;
    for (std::size_t k = 0; k < mean.size(); ++k) worst = std::max(worst, std::abs(mean[k] - batched[k]));
    EXPECT_LT(worst, 1e-12) << name_of(v);
  }
}

// Three-token teacher-forced loss against central differences, every
// parameter and both grids. Seed 0 passes outright; across seeds the
// absolute disagreement stays at the double-precision floor.
TEST(SequenceLoss, GradCheckAllVariants) {
  for (Variant v : kVariants) {
    double worst_abs = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      Rng rng(seed);
      auto inst = harness::make_check_instance(v, 2, 1, rng);
      std::vector<numerics::NamedTensor> leaves = inst.params.entries();
      inst.f_src.set_requires_grad(true);
      inst.f_trg.set_requires_grad(true);
      leaves.push_back({"f_src", inst.f_src});
      leaves.push_back({"f_trg", inst.f_trg});
      const auto report = numerics::grad_check(
          [&] { return model::sequence_loss(inst.config, inst.params, inst.f_src, inst.f_trg, {{7, 12, 5}}); },
          leaves, {1e-5, 1e-4});
      if (seed == 0) {
        EXPECT_TRUE(report.passed) << name_of(v) << " " << report.worst_tensor << "[" << report.worst_index
                                   << "] rel " << report.max_rel_error;
      }
      worst_abs = std::max(worst_abs, report.max_abs_error);
    }
    EXPECT_LT(worst_abs, 1e-9) << name_of(v);
  }
}

TEST(SequenceLoss, BackwardFaultIsDetected) {
  Rng rng(0);
  auto inst = harness::make_check_instance(Variant::dynamic_relational, 2, 1, rng);
  numerics::ScopedBackwardFault fault("hadamard_rows");
  const auto report = numerics::grad_check(
      [&] { return model::sequence_loss(inst.config, inst.params, inst.f_src, inst.f_trg, {{7, 12, 5}}); },
      inst.params.entries());
  EXPECT_FALSE(report.passed);
}

TEST(GreedyDecode, BoundedAndDeterministic) {
  Rng rng(18);
  for (Variant v : kVariants) {
    auto inst = harness::make_check_instance(v, 2, 3, rng);
    inst.config.max_decode_len = 6;
    // Bias toward a non-EOS word so decoding runs to the cap.
    inst.params.at("out.b").mutable_values()[9] = 50.0;
    const auto a = model::greedy_decode(inst.config, inst.params, inst.f_src, inst.f_trg);
    const auto b = model::greedy_decode(inst.config, inst.params, inst.f_src, inst.f_trg);
    EXPECT_EQ(a, b);
    for (const auto& seq : a) EXPECT_EQ(seq.size(), 6u) << name_of(v);
  }
}

TEST(GreedyDecode, StopsAtEos) {
  Rng rng(19);
  auto inst = harness::make_check_instance(Variant::basic, 2, 2, rng);
  for (double& x : inst.params.at("out.w").mutable_values()) x = 0.0;
  inst.params.at("out.b").mutable_values()[model::kEos] = 5.0;
  const auto out = model::greedy_decode(inst.config, inst.params, inst.f_src, inst.f_trg);
  for (const auto& seq : out) EXPECT_TRUE(seq.empty());
}

TEST(GreedyDecode, ArgmaxTiesGoToLowestId) {
  const std::vector<double> scores = {0.1, 0.7, 0.3, 0.7};
  EXPECT_EQ(model::argmax_token(scores), 1u);
}

// Fits one caption with Adam, then greedy decoding must reproduce it.
TEST(GreedyDecode, MemorizedExampleIsReproduced) {
  for (Variant v : kVariants) {
    ModelConfig config = small_config(v);
    config.hidden_dim = 32;
    Rng rng(20);
    ModelParams params = ModelParams::init(config, rng);
    params.set_requires_grad(true);
    const Tensor f_src = random_tensor({1, 4, config.feature_dim}, rng);
    const Tensor f_trg = random_tensor({1, 4, config.feature_dim}, rng);
    const std::vector<model::TokenId> caption = {7, 12, 5, 19, 12};
    std::vector<Tensor> tensors = params.tensors();
    numerics::AdamState adam;
    double loss_value = 0.0;
    for (int it = 0; it < 200; ++it) {
      params.zero_grad();
      numerics::Tape tape;
      Tensor loss;
      {
        numerics::TapeScope scope(tape);
        loss = model::sequence_loss(config, params, f_src, f_trg, {caption});
      }
      tape.backward(loss);
      numerics::adam_step(tensors, adam, {1e-2});
      loss_value = loss.item();
    }
    EXPECT_LT(loss_value, 0.05) << name_of(v);
    EXPECT_EQ(model::greedy_decode(config, params, f_src, f_trg).front(), caption) << name_of(v);
  }
}

TEST(Params, InitIsWithinFanInBound) {
  ModelConfig config = small_config(Variant::dynamic_relational);
  Rng rng(21);
  const ModelParams params = ModelParams::init(config, rng);
  for (const auto& spec : model::param_specs(config)) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(spec.fan_in));
    const Tensor& t = params.at(spec.name);
    EXPECT_EQ(t.shape(), spec.shape) << spec.name;
    for (double x : t.values()) EXPECT_LE(std::abs(x), bound) << spec.name;
  }
}

TEST(Checkpoint, RoundTripIsBitExact) {
  ModelConfig config = small_config(Variant::static_relational);
  Rng rng(22);
  model::Checkpoint ckpt;
  ckpt.config = config;
  ckpt.vocab = {"<pad>", "<bos>", "<eos>", "<unk>", "add"};
  ckpt.params = ModelParams::init(config, rng);
  ckpt.best_params = ModelParams::init(config, rng);
  for (const auto& p : ckpt.params.tensors()) {
    ckpt.adam.m.emplace_back(p.size(), 1.0 / 3.0);
    ckpt.adam.v.emplace_back(p.size(), std::nextafter(0.1, 1.0));
  }
  ckpt.adam.t = 17;
  ckpt.rng_state = rng.state();
  ckpt.train_state = {{"epoch", 3}};
  ckpt.train_config = {{"lr", 1e-4}};
  const auto path = std::filesystem::temp_directory_path() / "relcap_model_test.ckpt";
  model::write_checkpoint(ckpt, path);
  const model::Checkpoint back = model::read_checkpoint(path);
  std::filesystem::remove(path);
  EXPECT_EQ(back.vocab, ckpt.vocab);
  EXPECT_EQ(back.rng_state, ckpt.rng_state);
  EXPECT_EQ(back.train_state, ckpt.train_state);
  EXPECT_EQ(back.train_config, ckpt.train_config);
  EXPECT_EQ(back.adam.t, 17);
  EXPECT_EQ(back.adam.m, ckpt.adam.m);
  EXPECT_EQ(back.adam.v, ckpt.adam.v);
  ASSERT_EQ(back.params.entries().size(), ckpt.params.entries().size());
  for (std::size_t k = 0; k < ckpt.params.entries().size(); ++k) {
    EXPECT_EQ(back.params.entries()[k].name, ckpt.params.entries()[k].name);
    EXPECT_EQ(to_vector(back.params.entries()[k].tensor), to_vector(ckpt.params.entries()[k].tensor));
    EXPECT_EQ(to_vector(back.best_params.entries()[k].tensor), to_vector(ckpt.best_params.entries()[k].tensor));
  }
}

TEST(Checkpoint, RejectsForeignFile) {
  const auto path = std::filesystem::temp_directory_path() / "relcap_model_test.bad";
  {
    std::ofstream out(path);
    out << "not a checkpoint";
  }
  EXPECT_THROW(model::read_checkpoint(path), std::runtime_error);
  std::filesystem::remove(path);
}

}  // namespace
