#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "relcap/model/config.hpp"
#include "relcap/model/params.hpp"
#include "relcap/model/speaker.hpp"
#include "relcap/numerics/rng.hpp"

namespace relcap::harness {

struct VerifyOptions {
  std::size_t grid_side = 2;  // N for the gradient, normalization and permutation checks
  std::uint64_t seed = 0;
  std::size_t oracle_instances = 20;  // per N in 1..4
  double grad_eps = 1e-5;
  double grad_tol = 1e-4;
  std::string fault_op;  // non-empty: negate this op's backward rule during gradchecks
};

struct CheckResult {
  std::string name;
  bool passed = false;
  double measure = 0.0;    // worst error (or, for "differs" checks, the smallest difference)
  double threshold = 0.0;
  std::string detail;
};

struct VerifyReport {
  VerifyOptions options;
  std::vector<CheckResult> checks;
  double seconds = 0.0;

  bool passed() const;
};

// The small instance the checks run on: D = 8, hidden = 16, vocab = 20,
// embed = 16, dropout off.
model::ModelConfig verify_model_config(model::Variant variant, std::size_t grid_side);

// Random instance for the checks: weights at twice the training init scale;
// embeddings, features and state entries drawn with magnitudes bounded away
// from zero (|x| in [0.3, 1] for embeddings and h, [0.5, 1.5] for features
// and c) so that no weight-gradient entry is an outer product with a
// near-zero input.
struct CheckInstance {
  model::ModelConfig config;
  model::ModelParams params;
  numerics::Tensor f_src;  // [batch, N*N, 8]
  numerics::Tensor f_trg;
};
CheckInstance make_check_instance(model::Variant variant, std::size_t grid_side, std::size_t batch,
                                  numerics::Rng& rng);
model::DecoderState random_check_state(std::size_t batch, const model::ModelConfig& config, numerics::Rng& rng);

// Runs (a) finite-difference gradchecks of the per-step loss for every
// variant with respect to every parameter, the decoder state and both
// feature grids, (b) dynamic step vs. the
// brute-force pair oracle for N = 1..4, (c) attention normalization,
// position-permutation invariance and source/target swap behaviour.
VerifyReport verify(const VerifyOptions& options = {});

nlohmann::json to_json(const VerifyReport& report);

}  // namespace relcap::harness
