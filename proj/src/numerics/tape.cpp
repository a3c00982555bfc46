#include "relcap/numerics/tape.hpp"

#include <Eigen/Core>
#include <cstring>
#include <stdexcept>

namespace relcap::numerics {

namespace {
thread_local Tape* g_active = nullptr;
thread_local Tape* g_replaying = nullptr;
thread_local std::string g_fault_op;

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ReplayScope {
  Tape* previous;
  explicit ReplayScope(Tape* tape) : previous(g_replaying) { g_replaying = tape; }
  ~ReplayScope() { g_replaying = previous; }
};
}  // namespace

Tape* active_tape() { return g_active; }
Tape* replaying_tape() { return g_replaying; }

TapeScope::TapeScope(Tape& tape) : previous_(g_active) { g_active = &tape; }
TapeScope::~TapeScope() { g_active = previous_; }

NoGradScope::NoGradScope() : previous_(g_active) { g_active = nullptr; }
NoGradScope::~NoGradScope() { g_active = previous_; }

ScopedBackwardFault::ScopedBackwardFault(std::string op) : previous_(g_fault_op) {
  g_fault_op = std::move(op);
}
ScopedBackwardFault::~ScopedBackwardFault() { g_fault_op = previous_; }

void Tape::record(std::string op, std::shared_ptr<TensorNode> output,
                  std::vector<std::shared_ptr<TensorNode>> inputs, BackwardFn backward) {
  if (consumed_) throw std::logic_error("Tape::record: tape already consumed by backward");
  entries_.push_back({std::move(op), std::move(output), std::move(inputs), std::move(backward)});
}

void Tape::defer_outer(TensorNode* weight, const double* dy, const double* x, std::size_t rows, std::size_t n,
                       std::size_t k) {
  auto [it, fresh] = pending_.try_emplace(weight, Pending{weight, n, k, 0, {}});
  if (!fresh && (it->second.n != n || it->second.k != k)) {
    throw std::logic_error("Tape::defer_outer: inconsistent shape for one weight");
  }
  it->second.parts.push_back({dy, x, rows});
  it->second.rows += rows;
}

void Tape::flush(TensorNode* weight) {
  auto it = pending_.find(weight);
  if (it == pending_.end()) return;
  const Pending& p = it->second;
  Eigen::Map<RowMat> grad(weight->grad_buffer().data(), static_cast<Eigen::Index>(p.n),
                          static_cast<Eigen::Index>(p.k));
  if (p.parts.size() == 1) {
    const Outer& o = p.parts.front();
    grad.noalias() += Eigen::Map<const RowMat>(o.dy, o.rows, p.n).transpose() *
                      Eigen::Map<const RowMat>(o.x, o.rows, p.k);
  } else {
    RowMat dy(p.rows, p.n), x(p.rows, p.k);
    std::size_t r = 0;
    for (const Outer& o : p.parts) {
      std::memcpy(dy.data() + r * p.n, o.dy, o.rows * p.n * sizeof(double));
      std::memcpy(x.data() + r * p.k, o.x, o.rows * p.k * sizeof(double));
      r += o.rows;
    }
    grad.noalias() += dy.transpose() * x;
  }
  pending_.erase(it);
}

void Tape::flush_all() {
  std::vector<TensorNode*> weights;
  weights.reserve(pending_.size());
  for (const auto& [w, p] : pending_) weights.push_back(w);
  for (TensorNode* w : weights) flush(w);
}

void Tape::backward(const Tensor& loss) {
  if (consumed_) throw std::logic_error("Tape::backward: tape already consumed");
  if (!loss.defined() || loss.size() != 1) {
    throw std::invalid_argument("Tape::backward: loss must be a scalar, got shape " +
                                (loss.defined() ? to_string(loss.shape()) : std::string("<undefined>")));
  }
  if (!loss.requires_grad()) {
    throw std::invalid_argument("Tape::backward: loss does not depend on any tensor requiring grad");
  }
  consumed_ = true;
  loss.node()->grad_buffer()[0] += 1.0;

  ReplayScope replay(this);
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (!pending_.empty()) flush(it->output.get());
    if (it->output->grad.empty()) continue;  // not on a path to the loss
    ++replayed_;
    if (!g_fault_op.empty() && it->op == g_fault_op) {
      ReplayScope direct(nullptr);
      std::vector<std::vector<double>> before;
      before.reserve(it->inputs.size());
      for (auto& in : it->inputs) before.push_back(in->requires_grad ? in->grad_buffer() : std::vector<double>{});
      it->backward();
      for (std::size_t k = 0; k < it->inputs.size(); ++k) {
        auto& in = it->inputs[k];
        if (!in->requires_grad) continue;
        bool seen = false;
        for (std::size_t j = 0; j < k; ++j) seen = seen || it->inputs[j] == in;
        if (seen) continue;
        for (std::size_t i = 0; i < in->grad.size(); ++i) {
          in->grad[i] = before[k][i] - (in->grad[i] - before[k][i]);
        }
      }
    } else {
      it->backward();
    }
  }
  flush_all();
  // Intermediate nodes may outlive the tape through user handles; drop
  // references so their memory is released with the last handle.
  entries_.clear();
}

}  // namespace relcap::numerics
