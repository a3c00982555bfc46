#include "relcap/numerics/adam.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace relcap::numerics {

void adam_step(std::span<double> param, std::span<const double> grad, std::span<double> m, std::span<double> v,
               std::int64_t t, const AdamConfig& config) {
  if (grad.size() != param.size() || m.size() != param.size() || v.size() != param.size()) {
    throw std::invalid_argument("adam_step: size mismatch (param " + std::to_string(param.size()) + ", grad " +
                                std::to_string(grad.size()) + ", m " + std::to_string(m.size()) + ", v " +
                                std::to_string(v.size()) + ")");
  }
  if (t < 1) throw std::invalid_argument("adam_step: step count must be >= 1");
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * grad[i];
    v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
    const double m_hat = m[i] / c1;
    const double v_hat = v[i] / c2;
    param[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
  }
}

void adam_step(std::span<Tensor> params, AdamState& state, const AdamConfig& config) {
  if (state.m.empty() && state.v.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.size(), 0.0);
      state.v.emplace_back(p.size(), 0.0);
    }
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw std::invalid_argument("adam_step: state holds " + std::to_string(state.m.size()) + " moments for " +
                                std::to_string(params.size()) + " parameters");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (state.m[k].size() != params[k].size() || state.v[k].size() != params[k].size()) {
      throw std::invalid_argument("adam_step: moment shape mismatch for parameter " + std::to_string(k) + " " +
                                  to_string(params[k].shape()));
    }
  }
  ++state.t;
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k].has_grad()) {
      adam_step(params[k].mutable_values(), params[k].node()->grad, state.m[k], state.v[k], state.t, config);
    } else {
      adam_step(params[k].mutable_values(), params[k].grad(), state.m[k], state.v[k], state.t, config);
    }
  }
}

}  // namespace relcap::numerics
