// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "stgsnas/space_config.hpp"

namespace stgsnas {

enum class Modality { Image, Speech };

/// Discrete choices for one cell.
struct CellChoice {
  std::array<int, 2> inputs{};  // node indices, each < the cell's own node
  std::vector<OpKind> ops;      // one per intermediate step
  friend bool operator==(const CellChoice&, const CellChoice&) = default;
};

/// A discrete architecture: which first-level edges survive, which node feeds
/// each cell input slot, and which fusion op each intermediate step applies.
struct DerivedArch {
  SpaceConfig config;
  std::vector<Edge> kept_edges;  // sorted
  std::vector<CellChoice> cells;

  bool edge_kept(int from, int to) const;

  /// Throws ContractError if the arch does not fit its config (wrong sizes,
  /// forward references, ops outside the pool, unknown edges).
  void validate() const;

  /// True if some path carries this modality into the classifier head.
  bool retains_modality(Modality m) const;
  bool modality_dropped() const {
    return !retains_modality(Modality::Image) || !retains_modality(Modality::Speech);
  }
  /// True if some non-Zero step op receives image on one side and speech on
  /// the other (or a mix covering both with both sides non-empty).
  bool has_cross_modal_fusion() const;

  /// Canonical compact text key, unique per architecture within a config.
  std::string fingerprint() const;

  friend bool operator==(const DerivedArch&, const DerivedArch&) = default;
};

/// Scalar weight count of the retrainable network for `arch`: chosen op
/// weights plus the linear classifier head.
std::size_t count_parameters(const DerivedArch& arch);

/// Head size alone: (cells * steps * C) * classes + classes.
std::size_t head_parameter_count(const SpaceConfig& config);

}  // namespace stgsnas
