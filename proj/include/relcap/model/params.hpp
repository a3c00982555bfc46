#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "relcap/model/config.hpp"
#include "relcap/numerics/gradcheck.hpp"
#include "relcap/numerics/rng.hpp"
#include "relcap/numerics/tensor.hpp"

namespace relcap::model {

struct ParamSpec {
  std::string name;
  numerics::Shape shape;
  std::size_t fan_in;
};

// Every learnable tensor the configured variant uses, in a fixed order.
//
//   embedding              [V, E]
//   lstm.w_x, lstm.w_h     [4H, E], [4H, H]   gate order: input, forget, cell, output
//   lstm.b                 [4H]
//   out.w, out.b           [V, H], [V]
//   basic:    basic.w_img [H, D]; basic.w_1 [H, D+H]; basic.b_1 [H]
//   multihead and static:  mh.w_src, mh.w_trg [H, D]; mh.w_2, mh.w_3 [H, D+H]; mh.b_2, mh.b_3 [H]
//   static:   static.s2t.{w_s, w_t} [H, D], static.s2t.w_4 [D, 2D], static.s2t.b_4 [D],
//             and the same four under static.t2s
//   dynamic:  dyn.w_sk, dyn.w_tk [H, D]; dyn.w_hk [H, H]; dyn.w_5 [H, 2D+H]; dyn.b_5 [H]
std::vector<ParamSpec> param_specs(const ModelConfig& config);

class ModelParams {
 public:
  ModelParams() = default;

  // Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per tensor, drawn in spec order.
  static ModelParams init(const ModelConfig& config, numerics::Rng& rng);
  static ModelParams zeros(const ModelConfig& config);

  const numerics::Tensor& at(std::string_view name) const;
  numerics::Tensor& at(std::string_view name);
  bool contains(std::string_view name) const;

  const std::vector<numerics::NamedTensor>& entries() const { return entries_; }
  std::vector<numerics::Tensor> tensors() const;
  std::size_t total_size() const;

  void add(std::string name, numerics::Tensor tensor);
  ModelParams clone() const;
  void copy_values_from(const ModelParams& other);
  void set_requires_grad(bool on);
  void zero_grad();

 private:
  std::vector<numerics::NamedTensor> entries_;
};

}  // namespace relcap::model
