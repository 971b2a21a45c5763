// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "stgsnas/autodiff.hpp"
#include "stgsnas/derived_arch.hpp"
#include "stgsnas/fusion_ops.hpp"

namespace stgsnas {

/// Stand-alone network for a discrete architecture: only the chosen ops own
/// weights. Wiring matches SuperNet::forward_fixed.
class DerivedNet {
 public:
  DerivedNet(DerivedArch arch, std::uint64_t seed);

  const DerivedArch& arch() const noexcept { return arch_; }

  /// Logits [B, 2] for image [B, N_I, C] and speech [B, N_S, C].
  Var forward(Tape& tape, const Tensor& image, const Tensor& speech);

  std::vector<Param*> parameters();
  std::vector<const Param*> parameters() const;

  /// Equals count_parameters(arch()).
  std::size_t parameter_count() const;

 private:
  DerivedArch arch_;
  std::vector<OpWeights> step_weights_;  // [cell * steps + j]
  Param head_w_;
  Param head_b_;
};

}  // namespace stgsnas
