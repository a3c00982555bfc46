#include "relcap/harness/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <numeric>
#include <sstream>

#include "relcap/model/params.hpp"
#include "relcap/model/speaker.hpp"
#include "relcap/numerics/gradcheck.hpp"
#include "relcap/numerics/ops.hpp"
#include "relcap/numerics/tape.hpp"

namespace relcap::harness {

using model::DecoderState;
using model::ModelConfig;
using model::ModelParams;
using model::TokenId;
using model::Variant;
using numerics::Rng;
using numerics::Tensor;

namespace {

constexpr Variant kVariants[] = {Variant::basic, Variant::multihead, Variant::static_relational,
                                 Variant::dynamic_relational};
constexpr double kExact = 1e-10;

// Magnitudes uniform in [lo, hi] with random signs. Weight gradients are
// outer products (delta x input), so inputs bounded away from zero keep
// gradient entries above the central-difference noise floor.
Tensor random_signed(numerics::Shape shape, Rng& rng, double lo, double hi) {
  std::vector<double> values(numerics::numel(shape));
  for (double& v : values) v = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(values));
}

std::vector<TokenId> random_tokens(std::size_t count, const ModelConfig& config, Rng& rng) {
  std::vector<TokenId> tokens(count);
  for (auto& t : tokens) t = static_cast<TokenId>(rng.below(config.vocab_size));
  return tokens;
}

}  // namespace

DecoderState random_check_state(std::size_t batch, const ModelConfig& config, Rng& rng) {
  return {random_signed({batch, config.hidden_dim}, rng, 0.3, 0.9),
          random_signed({batch, config.hidden_dim}, rng, 0.5, 1.5)};
}

namespace {

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return INFINITY;
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a.values()[i] - b.values()[i]));
  return worst;
}

// Reorders positions of a [B, L, D] grid: out[b, k] = in[b, perm[k]].
Tensor permute_positions(const Tensor& grid, const std::vector<std::size_t>& perm) {
  const std::size_t batch = grid.dim(0), len = grid.dim(1), d = grid.dim(2);
  std::vector<double> out(grid.size());
  const auto in = grid.values();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t k = 0; k < len; ++k) {
      std::copy_n(in.begin() + static_cast<std::ptrdiff_t>((b * len + perm[k]) * d), d,
                  out.begin() + static_cast<std::ptrdiff_t>((b * len + k) * d));
    }
  }
  return Tensor(grid.shape(), std::move(out));
}

}  // namespace

CheckInstance make_check_instance(Variant variant, std::size_t grid_side, std::size_t batch, Rng& rng) {
  CheckInstance inst;
  inst.config = verify_model_config(variant, grid_side);
  inst.params = ModelParams::init(inst.config, rng);
  for (const auto& e : inst.params.entries()) {
    Tensor t = e.tensor;
    for (double& v : t.mutable_values()) v *= 2.0;
  }
  Tensor embedding = inst.params.at("embedding");
  const Tensor fresh = random_signed(embedding.shape(), rng, 0.3, 1.0);
  std::copy(fresh.values().begin(), fresh.values().end(), embedding.mutable_values().begin());
  inst.f_src = random_signed({batch, inst.config.positions(), inst.config.feature_dim}, rng, 0.5, 1.5);
  inst.f_trg = random_signed({batch, inst.config.positions(), inst.config.feature_dim}, rng, 0.5, 1.5);
  return inst;
}

namespace {

struct Rollout {
  std::vector<Tensor> log_probs;
  std::vector<Tensor> hidden;
  std::vector<numerics::NamedTensor> attention;
};

Rollout rollout(const CheckInstance& inst, const Tensor& f_src, const Tensor& f_trg,
                const std::vector<std::vector<TokenId>>& tokens) {
  numerics::NoGradScope no_grad;
  Rollout r;
  const auto encoded = model::encode(inst.config, inst.params, f_src, f_trg);
  r.attention = encoded.attention;
  DecoderState state = DecoderState::zeros(f_src.dim(0), inst.config.hidden_dim);
  for (const auto& step_tokens : tokens) {
    auto out = model::step(inst.config, inst.params, encoded, step_tokens, state);
    r.log_probs.push_back(out.log_probs);
    r.hidden.push_back(out.state.h);
    for (auto& a : out.attention) r.attention.push_back(std::move(a));
    state = std::move(out.state);
  }
  return r;
}

double rollout_diff(const Rollout& a, const Rollout& b) {
  double worst = 0.0;
  for (std::size_t t = 0; t < a.log_probs.size(); ++t) {
    worst = std::max({worst, max_abs_diff(a.log_probs[t], b.log_probs[t]), max_abs_diff(a.hidden[t], b.hidden[t])});
  }
  return worst;
}

std::string fmt(double x) {
  std::ostringstream s;
  s.precision(3);
  s << std::scientific << x;
  return s.str();
}

CheckResult gradcheck_step(Variant variant, const VerifyOptions& opt, Rng& rng) {
  auto inst = make_check_instance(variant, opt.grid_side, 1, rng);
  const auto tokens = random_tokens(1, inst.config, rng);
  const auto targets = random_tokens(1, inst.config, rng);
  DecoderState state = random_check_state(1, inst.config, rng);
  std::vector<numerics::NamedTensor> leaves = inst.params.entries();
  leaves.push_back({"h0", state.h});
  leaves.push_back({"c0", state.c});
  leaves.push_back({"f_src", inst.f_src});
  leaves.push_back({"f_trg", inst.f_trg});
  const std::vector<double> weights(1, 1.0);
  auto loss = [&] {
    const auto encoded = model::encode(inst.config, inst.params, inst.f_src, inst.f_trg);
    const auto out = model::step(inst.config, inst.params, encoded, tokens, state);
    return numerics::weighted_nll(out.log_probs, targets, weights);
  };
  const auto report = numerics::grad_check(loss, leaves, {.eps = opt.grad_eps, .tol = opt.grad_tol});
  return {"gradcheck.step." + std::string(model::to_string(variant)), report.passed, report.max_rel_error,
          opt.grad_tol,
          std::to_string(report.coordinates) + " coordinates, " + std::to_string(report.failures) + " over, max abs " + fmt(report.max_abs_error) + ", worst " + report.worst_tensor + "[" +
              std::to_string(report.worst_index) + "] analytic " + fmt(report.worst_analytic) + " numeric " +
              fmt(report.worst_numeric)};
}

CheckResult oracle_check(std::size_t grid_side, const VerifyOptions& opt, Rng& rng) {
  double worst = 0.0;
  for (std::size_t k = 0; k < opt.oracle_instances; ++k) {
    auto inst = make_check_instance(Variant::dynamic_relational, grid_side, 1, rng);
    const auto tokens = random_tokens(1, inst.config, rng);
    const DecoderState state = random_check_state(1, inst.config, rng);
    numerics::NoGradScope no_grad;
    const auto encoded = model::encode(inst.config, inst.params, inst.f_src, inst.f_trg);
    const auto fast = model::dynamic_step(inst.config, inst.params, encoded, tokens, state);
    const auto slow = model::dynamic_step_oracle(inst.config, inst.params, inst.f_src, inst.f_trg, tokens, state);
    worst = std::max({worst, max_abs_diff(fast.log_probs, slow.log_probs), max_abs_diff(fast.state.h, slow.state.h),
                      max_abs_diff(fast.state.c, slow.state.c),
                      max_abs_diff(fast.attention.at(0).tensor, slow.attention.at(0).tensor)});
  }
  return {"oracle.dynamic.N" + std::to_string(grid_side), worst <= kExact, worst, kExact,
          std::to_string(opt.oracle_instances) + " instances, " + std::to_string(grid_side * grid_side * grid_side *
                                                                                 grid_side) +
              " pairs each"};
}

// Attention tensors: [B, L] and the dynamic [B, L, L] joint map normalize
// over everything after the batch axis; static [B, L, L] maps normalize rows.
double normalization_error(const numerics::NamedTensor& a) {
  const auto& t = a.tensor;
  const std::size_t group = a.name == "alpha_s2t" || a.name == "alpha_t2s" ? t.dim(t.rank() - 1) : t.size() / t.dim(0);
  double worst = 0.0;
  for (std::size_t start = 0; start < t.size(); start += group) {
    double s = 0.0;
    for (std::size_t i = start; i < start + group; ++i) {
      if (t.values()[i] < 0.0) return INFINITY;
      s += t.values()[i];
    }
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

CheckResult normalization_check(Variant variant, const VerifyOptions& opt, Rng& rng) {
  auto inst = make_check_instance(variant, opt.grid_side, 3, rng);
  std::vector<std::vector<TokenId>> tokens;
  for (int t = 0; t < 3; ++t) tokens.push_back(random_tokens(3, inst.config, rng));
  const auto r = rollout(inst, inst.f_src, inst.f_trg, tokens);
  double worst = 0.0;
  std::size_t maps = 0;
  for (const auto& a : r.attention) {
    worst = std::max(worst, normalization_error(a));
    ++maps;
  }
  const std::size_t vocab = inst.config.vocab_size;
  for (const auto& lp : r.log_probs) {
    for (std::size_t start = 0; start < lp.size(); start += vocab) {
      double s = 0.0;
      for (std::size_t i = start; i < start + vocab; ++i) s += std::exp(lp.values()[i]);
      worst = std::max(worst, std::abs(s - 1.0));
    }
  }
  return {"normalization." + std::string(model::to_string(variant)), worst <= kExact, worst, kExact,
          std::to_string(maps) + " attention maps and " + std::to_string(r.log_probs.size()) + " output distributions"};
}

std::vector<std::size_t> random_permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  rng.shuffle(p);
  return p;
}

CheckResult permutation_check(Variant variant, const VerifyOptions& opt, Rng& rng) {
  auto inst = make_check_instance(variant, opt.grid_side, 2, rng);
  std::vector<std::vector<TokenId>> tokens;
  for (int t = 0; t < 3; ++t) tokens.push_back(random_tokens(2, inst.config, rng));
  const auto p = random_permutation(inst.config.positions(), rng);
  const auto q = random_permutation(inst.config.positions(), rng);
  const auto base = rollout(inst, inst.f_src, inst.f_trg, tokens);
  const auto moved = rollout(inst, permute_positions(inst.f_src, p), permute_positions(inst.f_trg, q), tokens);
  const double diff = rollout_diff(base, moved);
  return {"permutation." + std::string(model::to_string(variant)), diff <= kExact, diff, kExact,
          "independent position permutations of source and target, 3 steps"};
}

CheckResult swap_check(Variant variant, const VerifyOptions& opt, Rng& rng) {
  auto inst = make_check_instance(variant, opt.grid_side, 2, rng);
  std::vector<std::vector<TokenId>> tokens;
  for (int t = 0; t < 3; ++t) tokens.push_back(random_tokens(2, inst.config, rng));
  const auto base = rollout(inst, inst.f_src, inst.f_trg, tokens);
  const auto swapped = rollout(inst, inst.f_trg, inst.f_src, tokens);
  const double diff = rollout_diff(base, swapped);
  const std::string name = "swap." + std::string(model::to_string(variant));
  if (variant == Variant::basic) return {name, diff <= 1e-12, diff, 1e-12, "output unchanged by swapping images"};
  return {name, diff > 1e-6, diff, 1e-6, "output changes when images are swapped"};
}

}  // namespace

bool VerifyReport::passed() const {
  return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

ModelConfig verify_model_config(Variant variant, std::size_t grid_side) {
  ModelConfig c;
  c.variant = variant;
  c.grid_side = grid_side;
  c.feature_dim = 8;
  c.hidden_dim = 16;
  c.embed_dim = 16;
  c.vocab_size = 20;
  c.dropout_rate = 0.0;
  c.validate();
  return c;
}

VerifyReport verify(const VerifyOptions& options) {
  const auto started = std::chrono::steady_clock::now();
  VerifyReport report;
  report.options = options;
  Rng rng(options.seed);
  {
    std::unique_ptr<numerics::ScopedBackwardFault> fault;
    if (!options.fault_op.empty()) fault = std::make_unique<numerics::ScopedBackwardFault>(options.fault_op);
    for (Variant v : kVariants) report.checks.push_back(gradcheck_step(v, options, rng));
  }
  for (std::size_t n = 1; n <= 4; ++n) report.checks.push_back(oracle_check(n, options, rng));
  for (Variant v : kVariants) report.checks.push_back(normalization_check(v, options, rng));
  for (Variant v : kVariants) report.checks.push_back(permutation_check(v, options, rng));
  for (Variant v : kVariants) report.checks.push_back(swap_check(v, options, rng));
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

nlohmann::json to_json(const VerifyReport& report) {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : report.checks) {
    checks.push_back({{"name", c.name},
                      {"passed", c.passed},
                      {"measure", c.measure},
                      {"threshold", c.threshold},
                      {"detail", c.detail}});
  }
  return {{"passed", report.passed()},
          {"options",
           {{"grid_side", report.options.grid_side},
            {"seed", report.options.seed},
            {"oracle_instances", report.options.oracle_instances},
            {"grad_eps", report.options.grad_eps},
            {"grad_tol", report.options.grad_tol},
            {"fault_op", report.options.fault_op}}},
          {"checks", checks}};
}

}  // namespace relcap::harness
