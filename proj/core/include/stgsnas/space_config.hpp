// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <compare>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "stgsnas/fusion_ops.hpp"

namespace stgsnas {

enum class NodeKind { Image, Speech, Cell };

/// First-level edge between two nodes of the global sequence
/// [I1..I_NI, S1..S_NS, Cell1..CellN]. `to` is always a cell node.
struct Edge {
  int from = 0;
  int to = 0;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Shape of the two-level search space.
struct SpaceConfig {
  int num_image_features = 2;
  int num_speech_features = 2;
  int num_cells = 2;
  int steps_per_cell = 2;
  int feature_width = 64;
  std::vector<OpKind> op_pool = default_op_pool();

  static constexpr int kNumClasses = 2;
  static constexpr int kInputsPerCell = 2;

  /// Throws ContractError on non-positive sizes, an empty or duplicated pool.
  void validate() const;

  int num_backbone_nodes() const { return num_image_features + num_speech_features; }
  int num_nodes() const { return num_backbone_nodes() + num_cells; }
  int cell_node(int cell) const { return num_backbone_nodes() + cell; }
  /// Candidate inputs of a cell: every node before it in the sequence.
  int num_predecessors(int cell) const { return cell_node(cell); }
  NodeKind node_kind(int node) const;
  /// "I1", "S2", "Cell1", ... (1-based labels).
  std::string node_name(int node) const;

  /// All first-level edges in (to, from) lexicographic order.
  std::vector<Edge> first_level_edges() const;
  std::size_t num_first_level_edges() const;

  /// Concatenated intermediate nodes feeding the classifier head.
  int head_nodes() const { return num_cells * steps_per_cell; }

  /// Inputs of step `step` as indices into the cell-local node list
  /// [in0, in1, step0, step1, ...]: the two most recent nodes.
  static std::pair<int, int> step_inputs(int step) { return {step, step + 1}; }

  friend bool operator==(const SpaceConfig&, const SpaceConfig&) = default;
};

}  // namespace stgsnas
