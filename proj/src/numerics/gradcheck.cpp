#include "relcap/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "relcap/numerics/tape.hpp"

namespace relcap::numerics {

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

namespace {

double evaluate(const std::function<Tensor()>& fn) {
  NoGradScope no_grad;
  const Tensor out = fn();
  if (out.size() != 1) throw std::invalid_argument("grad_check: function is not scalar-valued, shape " + to_string(out.shape()));
  return out.item();
}

}  // namespace

GradCheckReport grad_check(const std::function<Tensor()>& fn, std::vector<NamedTensor> leaves,
                           GradCheckOptions options) {
  std::vector<bool> saved_flags;
  for (auto& leaf : leaves) {
    saved_flags.push_back(leaf.tensor.requires_grad());
    leaf.tensor.set_requires_grad(true);
    leaf.tensor.zero_grad();
  }

  {
    Tape tape;
    TapeScope scope(tape);
    const Tensor out = fn();
    if (out.size() != 1) throw std::invalid_argument("grad_check: function is not scalar-valued, shape " + to_string(out.shape()));
    tape.backward(out);
  }

  GradCheckReport report;
  for (auto& leaf : leaves) {
    const auto analytic = leaf.tensor.grad();
    auto values = leaf.tensor.mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      values[i] = original + options.eps;
      const double up = evaluate(fn);
      values[i] = original - options.eps;
      const double down = evaluate(fn);
      values[i] = original;
      const double numeric = (up - down) / (2.0 * options.eps);
      const double err = relative_error(analytic[i], numeric);
      ++report.coordinates;
      if (err >= options.tol) ++report.failures;
      report.max_abs_error = std::max(report.max_abs_error, std::abs(analytic[i] - numeric));
      if (err > report.max_rel_error || report.coordinates == 1) {
        report.max_rel_error = err;
        report.worst_tensor = leaf.name;
        report.worst_index = i;
        report.worst_analytic = analytic[i];
        report.worst_numeric = numeric;
      }
    }
  }
  report.passed = report.max_rel_error < options.tol;

  for (std::size_t k = 0; k < leaves.size(); ++k) {
    leaves[k].tensor.zero_grad();
    leaves[k].tensor.set_requires_grad(saved_flags[k]);
  }
  return report;
}

GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& fn, const Tensor& point,
                           GradCheckOptions options) {
  Tensor leaf = point.clone(true);
  return grad_check([&] { return fn(leaf); }, {{"x", leaf}}, options);
}

}  // namespace relcap::numerics
