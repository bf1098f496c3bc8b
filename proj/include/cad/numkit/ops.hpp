// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cad/numkit/graph.hpp"
#include "cad/rng.hpp"

namespace cad::numkit {

enum class Activation { Tanh, Sigmoid };
enum class Mode { Train, Infer };

/// W x + b for x[n], W[m x n], b[m].
Var affine(Var x, Var W, Var b);
/// W x without bias.
Var matvec(Var W, Var x);

Var add(Var a, Var b);
Var mul(Var a, Var b);
/// 1 - a, elementwise.
Var one_minus(Var a);
Var sum(Var x);

Var activate(Var x, Activation kind);
inline Var tanh(Var x) { return activate(x, Activation::Tanh); }
inline Var sigmoid(Var x) { return activate(x, Activation::Sigmoid); }

/// Softmax of a 1-D tensor, max-subtracted.
Var softmax(Var logits);

/// Column-wise max over the first valid_len rows of H[T x d]. Ties go to the
/// earliest row.
Var maxpool_time(Var H, std::size_t valid_len);

/// Inverted dropout. Infer mode returns x itself.
Var dropout(Var x, double rate, Mode mode, Rng& rng);

/// Concatenates 1-D tensors end to end.
Var concat(std::span<const Var> parts);
/// [A | B] for matrices with the same number of rows.
Var concat_cols(Var A, Var B);
/// Stacks equal-length 1-D tensors into a [T x d] matrix.
Var stack_rows(std::span<const Var> rows);
/// Row i of a matrix as a 1-D tensor.
Var row(Var M, std::size_t i);
/// Rows of table[V x d] picked by ids, as [ids.size() x d].
Var gather_rows(Var table, std::span<const std::size_t> ids);

// Value-only helpers shared with reference code paths.
double sigmoid_value(double x);
Tensor softmax_value(std::span<const double> logits);

}  // namespace cad::numkit
