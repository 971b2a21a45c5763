// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <deque>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "stgsnas/tensor.hpp"

namespace stgsnas {

/// Which optimizer group a parameter belongs to.
enum class ParamGroup { Weights, ArchAlpha, ArchBeta, ArchGamma };

inline constexpr std::array<ParamGroup, 4> kAllParamGroups = {
    ParamGroup::Weights, ParamGroup::ArchAlpha, ParamGroup::ArchBeta, ParamGroup::ArchGamma};

std::string_view to_string(ParamGroup group);
ParamGroup param_group_from_string(std::string_view name);

inline bool is_arch_group(ParamGroup g) { return g != ParamGroup::Weights; }

/// A learnable tensor. `grad` always has the shape of `value`.
struct Param {
  Param() = default;
  Param(std::string id_, ParamGroup group_, Tensor value_)
      : id(std::move(id_)), group(group_), value(std::move(value_)), grad(value.shape()) {}

  std::string id;
  ParamGroup group = ParamGroup::Weights;
  Tensor value;
  Tensor grad;

  void zero_grad() { grad.fill(0.0); }
};

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape
/// lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  /// Gradient of the last backward() target w.r.t. this node. Zeros if the
  /// node did not participate.
  Tensor grad() const;
  bool requires_grad() const;
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class BackwardContext;
using BackwardFn = std::function<void(BackwardContext&)>;

/// Define-by-run reverse-mode tape. Nodes are appended in evaluation order,
/// so node order is a topological order.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);

  /// Registers a parameter leaf. Parameters outside the trainable groups are
  /// recorded as constants and never receive gradient.
  Var param(Param& p);

  void set_trainable_groups(std::vector<ParamGroup> groups);
  bool group_trainable(ParamGroup g) const;

  /// Appends an op node. `fn` runs during backward() only if some input
  /// requires grad.
  Var record(Tensor value, std::vector<Var> inputs, BackwardFn fn);

  /// Reverse accumulation from a scalar node; parameter gradients are added
  /// into Param::grad.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

  /// Groups whose parameters received gradient in the last backward().
  const std::vector<ParamGroup>& groups_updated() const { return groups_updated_; }

 private:
  friend class Var;
  friend class BackwardContext;

  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    Param* param = nullptr;
    bool requires_grad = false;
  };

  Node& node(Var v);
  const Node& node(Var v) const;

  std::deque<Node> nodes_;
  std::vector<ParamGroup> trainable_ = {kAllParamGroups.begin(), kAllParamGroups.end()};
  std::vector<ParamGroup> groups_updated_;
};

/// View handed to backward rules.
class BackwardContext {
 public:
  BackwardContext(Tape& tape, std::size_t node_id) : tape_(tape), id_(node_id) {}

  const Tensor& grad_output() const;
  const Tensor& output() const;
  std::size_t num_inputs() const;
  const Tensor& input(std::size_t i) const;
  bool needs_grad(std::size_t i) const;
  /// Accumulator for input i; allocated with zeros on first access.
  Tensor& input_grad(std::size_t i);

 private:
  Tape& tape_;
  std::size_t id_;
};

}  // namespace stgsnas
