#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "relcap/numerics/tensor.hpp"

namespace relcap::numerics {

struct GradCheckOptions {
  double eps = 1e-5;
  double tol = 1e-4;
};

struct GradCheckReport {
  bool passed = true;
  double max_rel_error = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates = 0;
  std::size_t failures = 0;     // coordinates at or above tol
  double max_abs_error = 0.0;   // max |analytic - numeric|
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// Relative error |a - n| / max(1e-8, |a| + |n|).
double relative_error(double analytic, double numeric);

// Compares the tape gradient of the scalar fn at `point` with central
// differences (f(x+eps) - f(x-eps)) / (2 eps), coordinate by coordinate.
GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& fn, const Tensor& point,
                           GradCheckOptions options = {});

// Same check over several leaves at once; fn reads the leaves it closes over.
// Leaves are perturbed in place and restored exactly afterwards.
GradCheckReport grad_check(const std::function<Tensor()>& fn, std::vector<NamedTensor> leaves,
                           GradCheckOptions options = {});

}  // namespace relcap::numerics
