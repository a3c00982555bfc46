#include "relcap/numerics/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "relcap/numerics/tape.hpp"

namespace relcap::numerics {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

[[noreturn]] void shape_error(const std::string& op, const Shape& a, const Shape& b) {
  throw std::invalid_argument(op + ": shape mismatch " + to_string(a) + " vs " + to_string(b));
}

[[noreturn]] void shape_error(const std::string& op, const Shape& a, const std::string& why) {
  throw std::invalid_argument(op + ": invalid shape " + to_string(a) + " (" + why + ")");
}

void require_defined(const std::string& op, const Tensor& t) {
  if (!t.defined()) throw std::invalid_argument(op + ": undefined tensor");
}

bool should_record(std::initializer_list<const Tensor*> inputs) {
  if (active_tape() == nullptr) return false;
  return std::any_of(inputs.begin(), inputs.end(), [](const Tensor* t) { return t->requires_grad(); });
}

// Marks `out` as differentiable and records the op on the active tape.
void record(const char* op, Tensor& out, std::vector<std::shared_ptr<TensorNode>> inputs,
            Tape::BackwardFn fn) {
  out.set_requires_grad(true);
  active_tape()->record(op, out.node(), std::move(inputs), std::move(fn));
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t len = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.len = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

template <class Forward, class Derivative>
Tensor unary(const char* op, const Tensor& x, Forward f, Derivative df) {
  require_defined(op, x);
  std::vector<double> out(x.size());
  const auto in = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  Tensor y(x.shape(), std::move(out));
  if (should_record({&x})) {
    auto xn = x.node();
    TensorNode* yn = y.node().get();
    record(op, y, {xn}, [xn, yn, df] {
      auto& gx = xn->grad_buffer();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += yn->grad[i] * df(xn->value[i], yn->value[i]);
    });
  }
  return y;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined("matmul", a);
  require_defined("matmul", b);
  if (b.rank() != 2 || a.shape().back() != b.dim(0)) shape_error("matmul", a.shape(), b.shape());
  const std::size_t k = b.dim(0), n = b.dim(1), rows = a.size() / k;
  Shape shape = a.shape();
  shape.back() = n;
  std::vector<double> out(rows * n);
  MutMap(out.data(), rows, n).noalias() = ConstMap(a.values().data(), rows, k) * ConstMap(b.values().data(), k, n);
  Tensor y(std::move(shape), std::move(out));
  if (should_record({&a, &b})) {
    auto an = a.node(), bn = b.node();
    TensorNode* yn = y.node().get();
    record("matmul", y, {an, bn}, [an, bn, yn, rows, k, n] {
      ConstMap dy(yn->grad.data(), rows, n);
      if (an->requires_grad) {
        MutMap(an->grad_buffer().data(), rows, k).noalias() += dy * ConstMap(bn->value.data(), k, n).transpose();
      }
      if (bn->requires_grad) {
        MutMap(bn->grad_buffer().data(), k, n).noalias() += ConstMap(an->value.data(), rows, k).transpose() * dy;
      }
    });
  }
  return y;
}

Tensor linear(const Tensor& x, const Tensor& w) {
  require_defined("linear", x);
  require_defined("linear", w);
  if (w.rank() != 2 || x.shape().back() != w.dim(1)) shape_error("linear", x.shape(), w.shape());
  const std::size_t k = w.dim(1), n = w.dim(0), rows = x.size() / k;
  Shape shape = x.shape();
  shape.back() = n;
  std::vector<double> out(rows * n);
  MutMap(out.data(), rows, n).noalias() =
      ConstMap(x.values().data(), rows, k) * ConstMap(w.values().data(), n, k).transpose();
  Tensor y(std::move(shape), std::move(out));
  if (should_record({&x, &w})) {
    auto xn = x.node(), wn = w.node();
    TensorNode* yn = y.node().get();
    record("linear", y, {xn, wn}, [xn, wn, yn, rows, k, n] {
      ConstMap dy(yn->grad.data(), rows, n);
      if (xn->requires_grad) {
        MutMap(xn->grad_buffer().data(), rows, k).noalias() += dy * ConstMap(wn->value.data(), n, k);
      }
      if (wn->requires_grad) {
        if (Tape* tape = replaying_tape()) {
          tape->defer_outer(wn.get(), yn->grad.data(), xn->value.data(), rows, n, k);
        } else {
          MutMap(wn->grad_buffer().data(), n, k).noalias() += dy.transpose() * ConstMap(xn->value.data(), rows, k);
        }
      }
    });
  }
  return y;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  return add_bias(linear(x, w), bias);
}

Tensor bmm(const Tensor& a, const Tensor& b, bool transpose_b) {
  require_defined("bmm", a);
  require_defined("bmm", b);
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0)) shape_error("bmm", a.shape(), b.shape());
  const std::size_t batch = a.dim(0), m = a.dim(1), k = a.dim(2);
  const std::size_t n = transpose_b ? b.dim(1) : b.dim(2);
  if ((transpose_b ? b.dim(2) : b.dim(1)) != k) shape_error("bmm", a.shape(), b.shape());
  std::vector<double> out(batch * m * n);
  const double* ap = a.values().data();
  const double* bp = b.values().data();
  for (std::size_t i = 0; i < batch; ++i) {
    ConstMap ai(ap + i * m * k, m, k);
    MutMap yi(out.data() + i * m * n, m, n);
    if (transpose_b) {
      yi.noalias() = ai * ConstMap(bp + i * n * k, n, k).transpose();
    } else {
      yi.noalias() = ai * ConstMap(bp + i * k * n, k, n);
    }
  }
  Tensor y({batch, m, n}, std::move(out));
  if (should_record({&a, &b})) {
    auto an = a.node(), bn = b.node();
    TensorNode* yn = y.node().get();
    record("bmm", y, {an, bn}, [an, bn, yn, batch, m, k, n, transpose_b] {
      for (std::size_t i = 0; i < batch; ++i) {
        ConstMap dy(yn->grad.data() + i * m * n, m, n);
        ConstMap ai(an->value.data() + i * m * k, m, k);
        if (transpose_b) {
          ConstMap bi(bn->value.data() + i * n * k, n, k);
          if (an->requires_grad) MutMap(an->grad_buffer().data() + i * m * k, m, k).noalias() += dy * bi;
          if (bn->requires_grad) MutMap(bn->grad_buffer().data() + i * n * k, n, k).noalias() += dy.transpose() * ai;
        } else {
          ConstMap bi(bn->value.data() + i * k * n, k, n);
          if (an->requires_grad) MutMap(an->grad_buffer().data() + i * m * k, m, k).noalias() += dy * bi.transpose();
          if (bn->requires_grad) MutMap(bn->grad_buffer().data() + i * k * n, k, n).noalias() += ai.transpose() * dy;
        }
      }
    });
  }
  return y;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_defined("add", a);
  require_defined("add", b);
  if (a.shape() != b.shape()) shape_error("add", a.shape(), b.shape());
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
  Tensor y(a.shape(), std::move(out));
  if (should_record({&a, &b})) {
    auto an = a.node(), bn = b.node();
    TensorNode* yn = y.node().get();
    record("add", y, {an, bn}, [an, bn, yn] {
      if (an->requires_grad) {
        auto& g = an->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += yn->grad[i];
      }
      if (bn->requires_grad) {
        auto& g = bn->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += yn->grad[i];
      }
    });
  }
  return y;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_defined("mul", a);
  require_defined("mul", b);
  if (a.shape() != b.shape()) shape_error("mul", a.shape(), b.shape());
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
  Tensor y(a.shape(), std::move(out));
  if (should_record({&a, &b})) {
    auto an = a.node(), bn = b.node();
    TensorNode* yn = y.node().get();
    record("mul", y, {an, bn}, [an, bn, yn] {
      if (an->requires_grad) {
        auto& g = an->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += yn->grad[i] * bn->value[i];
      }
      if (bn->requires_grad) {
        auto& g = bn->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += yn->grad[i] * an->value[i];
      }
    });
  }
  return y;
}

Tensor scale(const Tensor& x, double factor) {
  require_defined("scale", x);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.values()[i] * factor;
  Tensor y(x.shape(), std::move(out));
  if (should_record({&x})) {
    auto xn = x.node();
    TensorNode* yn = y.node().get();
    record("scale", y, {xn}, [xn, yn, factor] {
      auto& g = xn->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += yn->grad[i] * factor;
    });
  }
  return y;
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  require_defined("add_bias", x);
  require_defined("add_bias", bias);
  if (bias.rank() != 1 || x.shape().back() != bias.dim(0)) shape_error("add_bias", x.shape(), bias.shape());
  const std::size_t n = bias.dim(0), rows = x.size() / n;
  std::vector<double> out(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] = x.values()[r * n + j] + bias.values()[j];
  }
  Tensor y(x.shape(), std::move(out));
  if (should_record({&x, &bias})) {
    auto xn = x.node(), bn = bias.node();
    TensorNode* yn = y.node().get();
    record("add_bias", y, {xn, bn}, [xn, bn, yn, rows, n] {
      if (xn->requires_grad) {
        auto& g = xn->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += yn->grad[i];
      }
      if (bn->requires_grad) {
        auto& g = bn->grad_buffer();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t j = 0; j < n; ++j) g[j] += yn->grad[r * n + j];
        }
      }
    });
  }
  return y;
}

Tensor hadamard_rows(const Tensor& x, const Tensor& v) {
  require_defined("hadamard_rows", x);
  require_defined("hadamard_rows", v);
  if (x.rank() != 3 || v.rank() != 2 || x.dim(0) != v.dim(0) || x.dim(2) != v.dim(1)) {
    shape_error("hadamard_rows", x.shape(), v.shape());
  }
  const std::size_t batch = x.dim(0), m = x.dim(1), k = x.dim(2);
  std::vector<double> out(x.size());
  const double* xv = x.values().data();
  const double* vv = v.values().data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t row = (b * m + i) * k;
      for (std::size_t j = 0; j < k; ++j) out[row + j] = xv[row + j] * vv[b * k + j];
    }
  }
  Tensor y(x.shape(), std::move(out));
  if (should_record({&x, &v})) {
    auto xn = x.node(), vn = v.node();
    TensorNode* yn = y.node().get();
    record("hadamard_rows", y, {xn, vn}, [xn, vn, yn, batch, m, k] {
      const double* dy = yn->grad.data();
      if (xn->requires_grad) {
        double* dx = xn->grad_buffer().data();
        const double* vv = vn->value.data();
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t i = 0; i < m; ++i) {
            const std::size_t row = (b * m + i) * k;
            for (std::size_t j = 0; j < k; ++j) dx[row + j] += dy[row + j] * vv[b * k + j];
          }
        }
      }
      if (vn->requires_grad) {
        double* dv = vn->grad_buffer().data();
        const double* xv = xn->value.data();
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t i = 0; i < m; ++i) {
            const std::size_t row = (b * m + i) * k;
            for (std::size_t j = 0; j < k; ++j) dv[b * k + j] += dy[row + j] * xv[row + j];
          }
        }
      }
    });
  }
  return y;
}

Tensor tanh(const Tensor& x) {
  return unary(
      "tanh", x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      "sigmoid", x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  for (const auto& p : parts) require_defined("concat", p);
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) shape_error("concat", first, "axis " + std::to_string(axis) + " out of range");
  Shape shape = first;
  shape[axis] = 0;
  for (const auto& p : parts) {
    if (p.rank() != first.size()) shape_error("concat", first, p.shape());
    for (std::size_t d = 0; d < first.size(); ++d) {
      if (d != axis && p.dim(d) != first[d]) shape_error("concat", first, p.shape());
    }
    shape[axis] += p.dim(axis);
  }
  const auto split = split_axis(shape, axis);
  std::vector<double> out(numel(shape));
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t block = p.dim(axis) * split.inner;
    for (std::size_t o = 0; o < split.outer; ++o) {
      std::copy_n(p.values().data() + o * block, block, out.data() + o * split.len * split.inner + offset);
    }
    offset += block;
  }
  Tensor y(std::move(shape), std::move(out));

  bool any = false;
  for (const auto& p : parts) any = any || p.requires_grad();
  if (active_tape() != nullptr && any) {
    std::vector<std::shared_ptr<TensorNode>> nodes;
    for (const auto& p : parts) nodes.push_back(p.node());
    TensorNode* yn = y.node().get();
    record("concat", y, nodes, [nodes, yn, split, axis] {
      std::size_t offset = 0;
      for (const auto& pn : nodes) {
        const std::size_t block = pn->shape[axis] * split.inner;
        if (pn->requires_grad) {
          auto& g = pn->grad_buffer();
          for (std::size_t o = 0; o < split.outer; ++o) {
            const double* src = yn->grad.data() + o * split.len * split.inner + offset;
            for (std::size_t i = 0; i < block; ++i) g[o * block + i] += src[i];
          }
        }
        offset += block;
      }
    });
  }
  return y;
}

Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()), axis);
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length) {
  require_defined("slice", x);
  if (axis >= x.rank()) shape_error("slice", x.shape(), "axis " + std::to_string(axis) + " out of range");
  if (length == 0 || start + length > x.dim(axis)) {
    shape_error("slice", x.shape(),
                "range [" + std::to_string(start) + ", " + std::to_string(start + length) + ") on axis " +
                    std::to_string(axis));
  }
  const auto split = split_axis(x.shape(), axis);
  Shape shape = x.shape();
  shape[axis] = length;
  const std::size_t block = length * split.inner;
  std::vector<double> out(split.outer * block);
  for (std::size_t o = 0; o < split.outer; ++o) {
    std::copy_n(x.values().data() + (o * split.len + start) * split.inner, block, out.data() + o * block);
  }
  Tensor y(std::move(shape), std::move(out));
  if (should_record({&x})) {
    auto xn = x.node();
    TensorNode* yn = y.node().get();
    record("slice", y, {xn}, [xn, yn, split, start, block] {
      auto& g = xn->grad_buffer();
      for (std::size_t o = 0; o < split.outer; ++o) {
        double* dst = g.data() + (o * split.len + start) * split.inner;
        for (std::size_t i = 0; i < block; ++i) dst[i] += yn->grad[o * block + i];
      }
    });
  }
  return y;
}

Tensor reshape(const Tensor& x, Shape shape) {
  require_defined("reshape", x);
  if (numel(shape) != x.size()) shape_error("reshape", x.shape(), shape);
  Tensor y(std::move(shape), std::vector<double>(x.values().begin(), x.values().end()));
  if (should_record({&x})) {
    auto xn = x.node();
    TensorNode* yn = y.node().get();
    record("reshape", y, {xn}, [xn, yn] {
      auto& g = xn->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += yn->grad[i];
    });
  }
  return y;
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> ids) {
  require_defined("gather_rows", table);
  if (table.rank() != 2) shape_error("gather_rows", table.shape(), "table must be rank 2");
  if (ids.empty()) throw std::invalid_argument("gather_rows: empty id list");
  const std::size_t rows = table.dim(0), width = table.dim(1);
  std::vector<double> out(ids.size() * width);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] >= rows) {
      throw std::invalid_argument("gather_rows: id " + std::to_string(ids[r]) + " out of range for table " +
                                  to_string(table.shape()));
    }
    std::copy_n(table.values().data() + ids[r] * width, width, out.data() + r * width);
  }
  Tensor y({ids.size(), width}, std::move(out));
  if (should_record({&table})) {
    auto tn = table.node();
    TensorNode* yn = y.node().get();
    std::vector<std::size_t> idx(ids.begin(), ids.end());
    record("gather_rows", y, {tn}, [tn, yn, idx = std::move(idx), width] {
      auto& g = tn->grad_buffer();
      for (std::size_t r = 0; r < idx.size(); ++r) {
        for (std::size_t j = 0; j < width; ++j) g[idx[r] * width + j] += yn->grad[r * width + j];
      }
    });
  }
  return y;
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  require_defined("softmax", x);
  if (axis >= x.rank()) shape_error("softmax", x.shape(), "axis " + std::to_string(axis) + " out of range");
  const auto s = split_axis(x.shape(), axis);
  std::vector<double> out(x.size());
  const auto in = x.values();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.len * s.inner + i;
      double hi = -std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < s.len; ++a) hi = std::max(hi, in[base + a * s.inner]);
      double total = 0.0;
      for (std::size_t a = 0; a < s.len; ++a) {
        const double e = std::exp(in[base + a * s.inner] - hi);
        out[base + a * s.inner] = e;
        total += e;
      }
      for (std::size_t a = 0; a < s.len; ++a) out[base + a * s.inner] /= total;
    }
  }
  Tensor y(x.shape(), std::move(out));
  if (should_record({&x})) {
    auto xn = x.node();
    TensorNode* yn = y.node().get();
    record("softmax", y, {xn}, [xn, yn, s] {
      auto& g = xn->grad_buffer();
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t i = 0; i < s.inner; ++i) {
          const std::size_t base = o * s.len * s.inner + i;
          double inner_product = 0.0;
          for (std::size_t a = 0; a < s.len; ++a) {
            inner_product += yn->grad[base + a * s.inner] * yn->value[base + a * s.inner];
          }
          for (std::size_t a = 0; a < s.len; ++a) {
            const std::size_t at = base + a * s.inner;
            g[at] += yn->value[at] * (yn->grad[at] - inner_product);
          }
        }
      }
    });
  }
  return y;
}

Tensor log_softmax(const Tensor& x, std::size_t axis) {
  require_defined("log_softmax", x);
  if (axis >= x.rank()) shape_error("log_softmax", x.shape(), "axis " + std::to_string(axis) + " out of range");
  const auto s = split_axis(x.shape(), axis);
  std::vector<double> out(x.size());
  const auto in = x.values();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.len * s.inner + i;
      double hi = -std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < s.len; ++a) hi = std::max(hi, in[base + a * s.inner]);
      double total = 0.0;
      for (std::size_t a = 0; a < s.len; ++a) total += std::exp(in[base + a * s.inner] - hi);
      const double log_z = hi + std::log(total);
      for (std::size_t a = 0; a < s.len; ++a) out[base + a * s.inner] = in[base + a * s.inner] - log_z;
    }
  }
  Tensor y(x.shape(), std::move(out));
  if (should_record({&x})) {
    auto xn = x.node();
    TensorNode* yn = y.node().get();
    record("log_softmax", y, {xn}, [xn, yn, s] {
      auto& g = xn->grad_buffer();
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t i = 0; i < s.inner; ++i) {
          const std::size_t base = o * s.len * s.inner + i;
          double total = 0.0;
          for (std::size_t a = 0; a < s.len; ++a) total += yn->grad[base + a * s.inner];
          for (std::size_t a = 0; a < s.len; ++a) {
            const std::size_t at = base + a * s.inner;
            g[at] += yn->grad[at] - std::exp(yn->value[at]) * total;
          }
        }
      }
    });
  }
  return y;
}

Tensor sum(const Tensor& x) {
  require_defined("sum", x);
  double total = 0.0;
  for (double v : x.values()) total += v;
  Tensor y = Tensor::scalar(total);
  if (should_record({&x})) {
    auto xn = x.node();
    TensorNode* yn = y.node().get();
    record("sum", y, {xn}, [xn, yn] {
      auto& g = xn->grad_buffer();
      for (double& v : g) v += yn->grad[0];
    });
  }
  return y;
}

Tensor mean(const Tensor& x) {
  require_defined("mean", x);
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

Tensor sum_axis(const Tensor& x, std::size_t axis) {
  require_defined("sum_axis", x);
  if (axis >= x.rank()) shape_error("sum_axis", x.shape(), "axis " + std::to_string(axis) + " out of range");
  const auto s = split_axis(x.shape(), axis);
  Shape shape = x.shape();
  shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(axis));
  if (shape.empty()) shape = {1};
  std::vector<double> out(s.outer * s.inner, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t a = 0; a < s.len; ++a) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        out[o * s.inner + i] += x.values()[(o * s.len + a) * s.inner + i];
      }
    }
  }
  Tensor y(std::move(shape), std::move(out));
  if (should_record({&x})) {
    auto xn = x.node();
    TensorNode* yn = y.node().get();
    record("sum_axis", y, {xn}, [xn, yn, s] {
      auto& g = xn->grad_buffer();
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t a = 0; a < s.len; ++a) {
          for (std::size_t i = 0; i < s.inner; ++i) g[(o * s.len + a) * s.inner + i] += yn->grad[o * s.inner + i];
        }
      }
    });
  }
  return y;
}

Tensor dropout(const Tensor& x, double keep_prob, Rng& rng, bool training) {
  require_defined("dropout", x);
  if (!(keep_prob > 0.0 && keep_prob <= 1.0)) {
    throw std::invalid_argument("dropout: keep probability must be in (0, 1], got " + std::to_string(keep_prob));
  }
  if (!training || keep_prob == 1.0) return x;
  std::vector<double> mask(x.size());
  for (double& m : mask) m = rng.bernoulli(keep_prob) ? 1.0 / keep_prob : 0.0;
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.values()[i] * mask[i];
  Tensor y(x.shape(), std::move(out));
  if (should_record({&x})) {
    auto xn = x.node();
    TensorNode* yn = y.node().get();
    record("dropout", y, {xn}, [xn, yn, mask = std::move(mask)] {
      auto& g = xn->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += yn->grad[i] * mask[i];
    });
  }
  return y;
}

Tensor weighted_nll(const Tensor& log_probs, std::span<const std::size_t> targets, std::span<const double> weights) {
  require_defined("weighted_nll", log_probs);
  if (log_probs.rank() != 2) shape_error("weighted_nll", log_probs.shape(), "log-probabilities must be [B, V]");
  const std::size_t batch = log_probs.dim(0), vocab = log_probs.dim(1);
  if (targets.size() != batch || weights.size() != batch) {
    shape_error("weighted_nll", log_probs.shape(), Shape{targets.size(), weights.size()});
  }
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    if (targets[b] >= vocab) {
      throw std::invalid_argument("weighted_nll: target " + std::to_string(targets[b]) + " outside vocabulary of " +
                                  std::to_string(vocab));
    }
    total -= weights[b] * log_probs.values()[b * vocab + targets[b]];
  }
  Tensor y = Tensor::scalar(total);
  if (should_record({&log_probs})) {
    auto ln = log_probs.node();
    TensorNode* yn = y.node().get();
    std::vector<std::size_t> t(targets.begin(), targets.end());
    std::vector<double> w(weights.begin(), weights.end());
    record("weighted_nll", y, {ln}, [ln, yn, t = std::move(t), w = std::move(w), vocab] {
      auto& g = ln->grad_buffer();
      for (std::size_t b = 0; b < t.size(); ++b) g[b * vocab + t[b]] -= w[b] * yn->grad[0];
    });
  }
  return y;
}

Tensor dot(const Tensor& x, const Tensor& y) { return sum(mul(x, y)); }

Tensor dot3(const Tensor& x, const Tensor& y, const Tensor& z) { return sum(mul(mul(x, y), z)); }

}  // namespace relcap::numerics
