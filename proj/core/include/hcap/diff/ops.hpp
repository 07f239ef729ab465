#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hcap/diff/tensor.hpp"

namespace hcap::diff {

// ---- linear algebra --------------------------------------------------------

// [m x k] . [k x n] -> [m x n]. 1-D operands are treated as row vectors.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// ---- elementwise -----------------------------------------------------------

enum class UnaryOp { sigmoid, tanh, relu, exp, log, neg };
enum class BinaryOp { add, sub, mul };

// Same-shape operands, or one operand with a single element (scalar).
Tensor elementwise(BinaryOp op, const Tensor& a, const Tensor& b);
Tensor elementwise(UnaryOp op, const Tensor& a);

inline Tensor add(const Tensor& a, const Tensor& b) { return elementwise(BinaryOp::add, a, b); }
inline Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(BinaryOp::sub, a, b); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(BinaryOp::mul, a, b); }
inline Tensor sigmoid(const Tensor& a) { return elementwise(UnaryOp::sigmoid, a); }
inline Tensor tanh(const Tensor& a) { return elementwise(UnaryOp::tanh, a); }
inline Tensor relu(const Tensor& a) { return elementwise(UnaryOp::relu, a); }
inline Tensor exp(const Tensor& a) { return elementwise(UnaryOp::exp, a); }
inline Tensor log(const Tensor& a) { return elementwise(UnaryOp::log, a); }
inline Tensor neg(const Tensor& a) { return elementwise(UnaryOp::neg, a); }

Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double offset);
Tensor clamp(const Tensor& a, double lo, double hi);

// a[m x n] + b[1 x n] broadcast over rows (bias add).
Tensor add_row(const Tensor& a, const Tensor& b);

// ---- reductions and normalization -------------------------------------------

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// Numerically stable softmax along axis 0 (columns) or 1 (rows) of a 2-D
// tensor; a 1-D tensor only has axis 0.
Tensor softmax(const Tensor& a, int axis);
// Row-wise layer normalization with learned gain/bias of shape [1 x n].
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);
// Per-row negative log-likelihood of the target class under softmax(logits).
// A negative target masks the row (loss 0). Returns [m x 1].
Tensor token_nll(const Tensor& logits, std::span<const int> targets);

// ---- structure -------------------------------------------------------------

Tensor reshape(const Tensor& a, Shape shape);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end);
Tensor gather_rows(const Tensor& a, std::span<const std::size_t> indices);
// Stride-2 mean pooling over rows; odd tails average a single row.
Tensor avg_pool_rows2(const Tensor& a);

}  // namespace hcap::diff
