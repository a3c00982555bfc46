#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "relcap/numerics/rng.hpp"
#include "relcap/numerics/tensor.hpp"

// Differentiable primitives. Every function validates shapes, computes the
// forward value eagerly, and records a backward rule on the active tape when
// any input requires a gradient. Shape errors throw std::invalid_argument
// naming both shapes.
namespace relcap::numerics {

// A[..., k] x B[k, n] -> [..., n]
Tensor matmul(const Tensor& a, const Tensor& b);

// X[..., k] x W[n, k]^T -> [..., n]; weights are stored output-major.
Tensor linear(const Tensor& x, const Tensor& w);
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);

// Batched product: A[b, m, k] x B[b, k, n] -> [b, m, n], or with
// transpose_b, A[b, m, k] x B[b, n, k]^T -> [b, m, n].
Tensor bmm(const Tensor& a, const Tensor& b, bool transpose_b = false);

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);

// X[..., n] + bias[n] on every row.
Tensor add_bias(const Tensor& x, const Tensor& bias);

// X[b, m, k] * v[b, k]: each row of batch entry b scaled element-wise by v[b].
Tensor hadamard_rows(const Tensor& x, const Tensor& v);

Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);

Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length);
Tensor reshape(const Tensor& x, Shape shape);

// table[V, E] rows selected by ids -> [ids.size(), E]
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> ids);

// Numerically stable (max-subtracted) softmax / log-softmax along `axis`.
Tensor softmax(const Tensor& x, std::size_t axis);
Tensor log_softmax(const Tensor& x, std::size_t axis);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// Sums out `axis`; the result drops that axis (a rank-1 input gives [1]).
Tensor sum_axis(const Tensor& x, std::size_t axis);

// Inverted dropout: keeps each entry with probability keep_prob and scales
// survivors by 1/keep_prob. Identity when !training or keep_prob == 1.
Tensor dropout(const Tensor& x, double keep_prob, Rng& rng, bool training);

// sum_b weights[b] * -logp[b, targets[b]] for logp[B, V]; returns shape [1].
Tensor weighted_nll(const Tensor& log_probs, std::span<const std::size_t> targets,
                    std::span<const double> weights);

// x . y
Tensor dot(const Tensor& x, const Tensor& y);
// Three-way product sum_d x_d y_d z_d evaluated as (x * y) . z
Tensor dot3(const Tensor& x, const Tensor& y, const Tensor& z);

}  // namespace relcap::numerics
