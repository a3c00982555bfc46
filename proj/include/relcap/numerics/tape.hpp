#pragma once

#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "relcap/numerics/tensor.hpp"

namespace relcap::numerics {

// Ordered record of differentiable operations. Ops consult the thread's
// active tape (see TapeScope) and record themselves only when one is active
// and at least one input requires a gradient.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  struct Entry {
    std::string op;
    std::shared_ptr<TensorNode> output;
    std::vector<std::shared_ptr<TensorNode>> inputs;
    BackwardFn backward;
  };

  void record(std::string op, std::shared_ptr<TensorNode> output,
              std::vector<std::shared_ptr<TensorNode>> inputs, BackwardFn backward);

  // Seeds d(loss)/d(loss) = 1 and replays entries in reverse. Leaf gradients
  // accumulate (sum) across calls until zero_grad(); the tape is consumed.
  void backward(const Tensor& loss);

  std::size_t size() const { return entries_.size(); }
  bool consumed() const { return consumed_; }
  std::size_t replayed() const { return replayed_; }

  // For backward rules: schedules weight.grad += dy^T x with dy [rows, n] and
  // x [rows, k] row-major. Both buffers must stay alive until the tape is
  // consumed. Contributions to one weight are stacked and applied as a single
  // product right before that weight's gradient is read.
  void defer_outer(TensorNode* weight, const double* dy, const double* x, std::size_t rows, std::size_t n,
                   std::size_t k);

 private:
  struct Outer {
    const double* dy;
    const double* x;
    std::size_t rows;
  };
  struct Pending {
    TensorNode* weight;
    std::size_t n, k, rows;
    std::vector<Outer> parts;
  };
  void flush(TensorNode* weight);
  void flush_all();

  std::vector<Entry> entries_;
  std::unordered_map<TensorNode*, Pending> pending_;
  bool consumed_ = false;
  std::size_t replayed_ = 0;
};

Tape* active_tape();

// Tape whose backward pass is running on this thread, if any.
Tape* replaying_tape();

class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

// Disables recording inside its lifetime (evaluation, finite differences).
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* previous_;
};

// Test instrumentation: while alive, the backward contribution of every
// recorded op named `op` is negated. Used as a gradcheck negative control.
class ScopedBackwardFault {
 public:
  explicit ScopedBackwardFault(std::string op);
  ~ScopedBackwardFault();
  ScopedBackwardFault(const ScopedBackwardFault&) = delete;
  ScopedBackwardFault& operator=(const ScopedBackwardFault&) = delete;

 private:
  std::string previous_;
};

}  // namespace relcap::numerics
