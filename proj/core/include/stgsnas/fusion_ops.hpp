// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stgsnas/autodiff.hpp"

namespace stgsnas {

/// Binary fusion operations available inside a cell. The enumerator order
/// is the default pool order and indexes gamma logits.
enum class OpKind { Zero, Sum, Attention, LinearGLU, ConcatFC };

/// Unary first-level edge operations. Index 0 keeps the edge.
enum class EdgeKind { Identity, Zero };

inline constexpr std::size_t kNumEdgeKinds = 2;

std::string_view to_string(OpKind kind);
OpKind op_kind_from_string(std::string_view name);
std::string_view to_string(EdgeKind kind);

/// Zero, Sum, Attention, LinearGLU, ConcatFC.
const std::vector<OpKind>& default_op_pool();

/// Number of scalar weights an op of this kind owns at feature width C.
std::size_t op_parameter_count(OpKind kind, std::size_t width);

/// Tape handles to an op's weights. Fields an op does not use stay invalid.
struct OpWeightVars {
  Var w1;  // LinearGLU, C x C
  Var w2;  // LinearGLU, C x C
  Var w;   // ConcatFC, 2C x C
  Var b;   // ConcatFC, C
};

/// Learnable tensors owned by one op instance.
class OpWeights {
 public:
  OpWeights() = default;

  /// Glorot-uniform initialized weights for `kind`; no tensors for
  /// weight-free kinds.
  static OpWeights create(OpKind kind, std::size_t width, std::string_view id_prefix,
                          std::uint64_t seed);

  OpKind kind() const noexcept { return kind_; }
  std::size_t width() const noexcept { return width_; }
  std::vector<Param>& params() noexcept { return params_; }
  const std::vector<Param>& params() const noexcept { return params_; }
  std::size_t parameter_count() const;

  OpWeightVars bind(Tape& tape);

 private:
  OpKind kind_ = OpKind::Zero;
  std::size_t width_ = 0;
  std::vector<Param> params_;
};

/// Applies a fusion op to x, y of shape [B, T, C]; the result has the same
/// shape.
///   Zero      -> 0
///   Sum       -> x + y
///   Attention -> softmax(x y^T / sqrt(C)) y   (softmax over keys)
///   LinearGLU -> (x W1) * sigmoid(y W2)
///   ConcatFC  -> relu([x, y] W + b)
Var apply_op(OpKind kind, Var x, Var y, const OpWeightVars& weights);

/// Identity(x) = x, Zero(x) = 0.
Var apply_edge(EdgeKind kind, Var x);

/// Fills `t` with Glorot-uniform values drawn from a counter-based stream.
void glorot_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, std::uint64_t seed,
                    std::uint64_t stream);

}  // namespace stgsnas
