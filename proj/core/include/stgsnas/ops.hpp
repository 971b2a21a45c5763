// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "stgsnas/autodiff.hpp"

/// Differentiable tensor ops recorded on a Tape.
///
/// Broadcasting is limited to two forms: a shape-{1} scalar combined with any
/// tensor (add/sub/mul), and a row bias added along the last axis (add_bias).
namespace stgsnas::ad {

Var matmul(Var a, Var b);                // [m,k] x [k,n]
Var linear(Var x, Var w);                // [...,k] x [k,n] -> [...,n]
Var bmm(Var a, Var b);                   // [B,m,k] x [B,k,n]
Var transpose_last2(Var x);              // [B,m,n] -> [B,n,m]
Var reshape(Var x, Shape shape);

Var softmax(Var x, std::size_t axis);
Var softmax(Var x);                      // last axis

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var add_bias(Var x, Var bias);           // bias shape [x.shape.back()]
Var neg(Var x);
Var scale(Var x, double factor);

Var sigmoid(Var x);
Var relu(Var x);
Var exp(Var x);
/// Natural log; throws DomainError on any non-positive entry.
Var log(Var x);

Var concat(std::span<const Var> parts, std::size_t axis);
Var sum(Var x);                          // -> [1]
Var mean(Var x);                         // -> [1]
Var mean_axis(Var x, std::size_t axis);  // drops `axis`
/// Picks `index` along `axis` and drops that axis.
Var select(Var x, std::size_t axis, std::size_t index);
Var dot(Var a, Var b);                   // sum(a * b)

/// Same value, no gradient path.
Var stop_gradient(Var x);

/// Mean softmax cross-entropy of logits [B,K] against integer labels.
Var softmax_cross_entropy(Var logits, std::span<const int> labels);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator-(Var a) { return neg(a); }

}  // namespace stgsnas::ad

namespace stgsnas {

/// Value-only softmax along the last axis of a 1-D or 2-D tensor, computed
/// with max subtraction.
Tensor softmax_values(const Tensor& logits);
std::vector<double> softmax_values(std::span<const double> logits);

}  // namespace stgsnas
