// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "stgsnas/autodiff.hpp"
#include "stgsnas/derived_arch.hpp"
#include "stgsnas/fusion_ops.hpp"
#include "stgsnas/sampler.hpp"
#include "stgsnas/space_config.hpp"

namespace stgsnas {

/// Architecture logits.
///   alpha[e]                 : per first-level edge, over {Identity, Zero}
///   beta[cell * 2 + slot]    : per cell input slot, over the cell's predecessors
///   gamma[cell * steps + j]  : per intermediate step, over the op pool
/// All logits start at zero.
class ArchParams {
 public:
  explicit ArchParams(const SpaceConfig& config);

  const std::vector<Edge>& edges() const noexcept { return edges_; }
  std::size_t edge_index(Edge e) const;

  std::vector<Param> alpha;
  std::vector<Param> beta;
  std::vector<Param> gamma;

  Param& beta_for(int cell, int slot) { return beta[static_cast<std::size_t>(cell * 2 + slot)]; }
  Param& gamma_for(int cell, int step) {
    return gamma[static_cast<std::size_t>(cell * steps_ + step)];
  }
  const Param& beta_for(int cell, int slot) const {
    return beta[static_cast<std::size_t>(cell * 2 + slot)];
  }
  const Param& gamma_for(int cell, int step) const {
    return gamma[static_cast<std::size_t>(cell * steps_ + step)];
  }

  /// Saturates logits so that `arch` wins every argmax: the chosen entry gets
  /// +magnitude, the rest -magnitude.
  void saturate_to(const DerivedArch& arch, double magnitude);

 private:
  std::vector<Edge> edges_;
  int steps_ = 0;
  std::vector<OpKind> pool_;
};

/// Sum over edges of the Shannon entropy (nats) of softmax(logits).
double entropy_alpha(const ArchParams& arch);
double entropy_beta(const ArchParams& arch);
double entropy_gamma(const ArchParams& arch);

/// Relaxed two-level supernet: architecture logits, every candidate op's
/// weights, and the classifier head.
///
/// Forward pass, for inputs image [B, N_I, C] and speech [B, N_S, C]:
///  1. each cell input slot receives sum_u beta_slot[u] * sum_o alpha_uv[o] * o(x_u)
///     over all predecessors u of the cell;
///  2. step j applies sum_k gamma_j[k] * op_k(x, y) to the two most recent
///     cell-local nodes;
///  3. the cell's value as a later predecessor is the mean of its steps;
///  4. all step outputs of all cells are concatenated, mean-pooled over T and
///     mapped to two logits by a linear head.
class SuperNet {
 public:
  SuperNet(SpaceConfig config, std::uint64_t seed);

  SuperNet(const SuperNet&) = default;
  SuperNet& operator=(const SuperNet&) = default;

  const SpaceConfig& config() const noexcept { return config_; }
  ArchParams& arch() noexcept { return arch_; }
  const ArchParams& arch() const noexcept { return arch_; }

  /// Candidate-op weights of a step, in pool order (weight-free ops hold no
  /// tensors).
  std::vector<OpWeights>& step_weights(int cell, int step);
  Param& head_weight() noexcept { return head_w_; }
  Param& head_bias() noexcept { return head_b_; }

  std::vector<Param*> parameters();
  std::vector<Param*> parameters(ParamGroup group);
  std::vector<const Param*> parameters() const;

  /// Scalar count of all op weights plus head (architecture logits excluded).
  std::size_t weight_count() const;

  /// Relaxed forward; noise is consumed from `cursor` in a fixed order
  /// (alpha edges, then beta slots, then gamma steps).
  Var forward(Tape& tape, const Tensor& image, const Tensor& speech, const RelaxationConfig& cfg,
              NoiseCursor& cursor);

  /// Forward of a discrete architecture using the supernet's shared weights.
  Var forward_fixed(Tape& tape, const Tensor& image, const Tensor& speech, const DerivedArch& arch);

  /// Per-edge / per-slot / per-step argmax, ties to the lowest index.
  DerivedArch derive() const;

 private:
  struct MixWeights {
    std::vector<Var> alpha, beta, gamma;
  };
  Var forward_impl(Tape& tape, const Tensor& image, const Tensor& speech, const MixWeights& mix);
  void check_inputs(const Tensor& image, const Tensor& speech) const;

  SpaceConfig config_;
  ArchParams arch_;
  std::vector<std::vector<OpWeights>> step_weights_;  // [cell * steps + j][pool index]
  Param head_w_;
  Param head_b_;
};

DerivedArch derive(const SuperNet& net);

}  // namespace stgsnas
