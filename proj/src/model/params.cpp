#include "relcap/model/params.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace relcap::model {

using numerics::NamedTensor;
using numerics::Tensor;

std::vector<ParamSpec> param_specs(const ModelConfig& c) {
  const std::size_t v = c.vocab_size, e = c.embed_dim, h = c.hidden_dim, d = c.feature_dim;
  std::vector<ParamSpec> specs = {
      {"embedding", {v, e}, e},
      {"lstm.w_x", {4 * h, e}, e},
      {"lstm.w_h", {4 * h, h}, h},
      {"lstm.b", {4 * h}, h},
  };
  auto multihead = [&] {
    specs.push_back({"mh.w_src", {h, d}, d});
    specs.push_back({"mh.w_2", {h, d + h}, d + h});
    specs.push_back({"mh.b_2", {h}, d + h});
    specs.push_back({"mh.w_trg", {h, d}, d});
    specs.push_back({"mh.w_3", {h, d + h}, d + h});
    specs.push_back({"mh.b_3", {h}, d + h});
  };
  switch (c.variant) {
    case Variant::basic:
      specs.push_back({"basic.w_img", {h, d}, d});
      specs.push_back({"basic.w_1", {h, d + h}, d + h});
      specs.push_back({"basic.b_1", {h}, d + h});
      break;
    case Variant::multihead:
      multihead();
      break;
    case Variant::static_relational:
      for (const char* dir : {"static.s2t.", "static.t2s."}) {
        const std::string p = dir;
        specs.push_back({p + "w_s", {h, d}, d});
        specs.push_back({p + "w_t", {h, d}, d});
        specs.push_back({p + "w_4", {d, 2 * d}, 2 * d});
        specs.push_back({p + "b_4", {d}, 2 * d});
      }
      multihead();
      break;
    case Variant::dynamic_relational:
      specs.push_back({"dyn.w_sk", {h, d}, d});
      specs.push_back({"dyn.w_tk", {h, d}, d});
      specs.push_back({"dyn.w_hk", {h, h}, h});
      specs.push_back({"dyn.w_5", {h, 2 * d + h}, 2 * d + h});
      specs.push_back({"dyn.b_5", {h}, 2 * d + h});
      break;
  }
  specs.push_back({"out.w", {v, h}, h});
  specs.push_back({"out.b", {v}, h});
  return specs;
}

ModelParams ModelParams::init(const ModelConfig& config, numerics::Rng& rng) {
  config.validate();
  ModelParams params;
  for (const auto& spec : param_specs(config)) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(spec.fan_in));
    std::vector<double> values(numerics::numel(spec.shape));
    for (double& x : values) x = rng.uniform(-bound, bound);
    params.add(spec.name, Tensor(spec.shape, std::move(values), true));
  }
  return params;
}

ModelParams ModelParams::zeros(const ModelConfig& config) {
  config.validate();
  ModelParams params;
  for (const auto& spec : param_specs(config)) params.add(spec.name, Tensor::zeros(spec.shape, true));
  return params;
}

const Tensor& ModelParams::at(std::string_view name) const {
  for (const auto& entry : entries_) {
    if (entry.name == name) return entry.tensor;
  }
  throw std::out_of_range("ModelParams: no parameter named '" + std::string(name) + "'");
}

Tensor& ModelParams::at(std::string_view name) {
  return const_cast<Tensor&>(std::as_const(*this).at(name));
}

bool ModelParams::contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.name == name; });
}

std::vector<Tensor> ModelParams::tensors() const {
  std::vector<Tensor> out;
  out.reserve(entries_.size());
  for (const auto& entry : entries_) out.push_back(entry.tensor);
  return out;
}

std::size_t ModelParams::total_size() const {
  std::size_t n = 0;
  for (const auto& entry : entries_) n += entry.tensor.size();
  return n;
}

void ModelParams::add(std::string name, Tensor tensor) {
  if (contains(name)) throw std::invalid_argument("ModelParams: duplicate parameter '" + name + "'");
  entries_.push_back({std::move(name), std::move(tensor)});
}

ModelParams ModelParams::clone() const {
  ModelParams copy;
  for (const auto& entry : entries_) copy.add(entry.name, entry.tensor.clone(entry.tensor.requires_grad()));
  return copy;
}

void ModelParams::copy_values_from(const ModelParams& other) {
  if (other.entries_.size() != entries_.size()) throw std::invalid_argument("ModelParams: layout mismatch");
  for (std::size_t k = 0; k < entries_.size(); ++k) {
    auto& mine = entries_[k];
    const auto& theirs = other.entries_[k];
    if (mine.name != theirs.name || mine.tensor.shape() != theirs.tensor.shape()) {
      throw std::invalid_argument("ModelParams: layout mismatch at '" + mine.name + "'");
    }
    std::copy(theirs.tensor.values().begin(), theirs.tensor.values().end(), mine.tensor.mutable_values().begin());
  }
}

void ModelParams::set_requires_grad(bool on) {
  for (auto& entry : entries_) entry.tensor.set_requires_grad(on);
}

void ModelParams::zero_grad() {
  for (auto& entry : entries_) entry.tensor.zero_grad();
}

}  // namespace relcap::model
