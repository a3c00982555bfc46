#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "relcap/numerics/tensor.hpp"

namespace relcap::numerics {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moment accumulators, one per parameter, plus the step count.
struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::int64_t t = 0;
};

// One bias-corrected Adam update of every parameter from its accumulated
// gradient: p -= lr * m_hat / (sqrt(v_hat) + eps). An empty state is sized on
// first use; any other size mismatch throws.
void adam_step(std::span<Tensor> params, AdamState& state, const AdamConfig& config = {});

// Same update on raw buffers with an explicit gradient.
void adam_step(std::span<double> param, std::span<const double> grad, std::span<double> m, std::span<double> v,
               std::int64_t t, const AdamConfig& config);

}  // namespace relcap::numerics
