// SPDX-License-Identifier: Apache-2.0
#include "stgsnas/autodiff.hpp"

#include <algorithm>

#include "stgsnas/errors.hpp"

namespace stgsnas {

std::string_view to_string(ParamGroup group) {
  switch (group) {
    case ParamGroup::Weights: return "weights";
    case ParamGroup::ArchAlpha: return "arch-alpha";
    case ParamGroup::ArchBeta: return "arch-beta";
    case ParamGroup::ArchGamma: return "arch-gamma";
  }
  return "unknown";
}

ParamGroup param_group_from_string(std::string_view name) {
  for (auto g : kAllParamGroups) {
    if (to_string(g) == name) return g;
  }
  throw ContractError("unknown parameter group '" + std::string(name) + "'");
}

const Tensor& Var::value() const {
  if (!tape_) throw ContractError("value() on an invalid Var");
  return tape_->node(*this).value;
}

Tensor Var::grad() const {
  if (!tape_) throw ContractError("grad() on an invalid Var");
  const auto& n = tape_->node(*this);
  return n.grad.defined() ? n.grad : Tensor(n.value.shape());
}

bool Var::requires_grad() const { return tape_ && tape_->node(*this).requires_grad; }

Tape::Node& Tape::node(Var v) {
  if (v.tape_ != this || v.id_ >= nodes_.size()) throw ContractError("Var does not belong to this tape");
  return nodes_[v.id_];
}

const Tape::Node& Tape::node(Var v) const {
  if (v.tape_ != this || v.id_ >= nodes_.size()) throw ContractError("Var does not belong to this tape");
  return nodes_[v.id_];
}

Var Tape::constant(Tensor value) {
  if (!value.defined()) throw ContractError("cannot record an undefined tensor");
  nodes_.push_back(Node{std::move(value), {}, {}, {}, nullptr, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::param(Param& p) {
  Var v = constant(p.value);
  if (group_trainable(p.group)) {
    auto& n = nodes_.back();
    n.param = &p;
    n.requires_grad = true;
  }
  return v;
}

void Tape::set_trainable_groups(std::vector<ParamGroup> groups) { trainable_ = std::move(groups); }

bool Tape::group_trainable(ParamGroup g) const {
  return std::find(trainable_.begin(), trainable_.end(), g) != trainable_.end();
}

Var Tape::record(Tensor value, std::vector<Var> inputs, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  n.inputs.reserve(inputs.size());
  for (const auto& in : inputs) {
    if (in.tape_ != this) throw ContractError("op input recorded on a different tape");
    n.inputs.push_back(in.id_);
    n.requires_grad = n.requires_grad || nodes_[in.id_].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

void Tape::backward(Var loss) {
  auto& root = node(loss);
  if (root.value.numel() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " + shape_str(root.value.shape()));
  }
  for (auto& n : nodes_) n.grad = Tensor();
  groups_updated_.clear();
  root.grad = Tensor(root.value.shape(), 1.0);

  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (!n.requires_grad || !n.grad.defined()) continue;
    if (n.backward) {
      BackwardContext ctx(*this, i);
      n.backward(ctx);
    }
    if (n.param) {
      n.param->grad.add_(n.grad);
      if (std::find(groups_updated_.begin(), groups_updated_.end(), n.param->group) ==
          groups_updated_.end()) {
        groups_updated_.push_back(n.param->group);
      }
    }
  }
}

const Tensor& BackwardContext::grad_output() const { return tape_.nodes_[id_].grad; }
const Tensor& BackwardContext::output() const { return tape_.nodes_[id_].value; }
std::size_t BackwardContext::num_inputs() const { return tape_.nodes_[id_].inputs.size(); }

const Tensor& BackwardContext::input(std::size_t i) const {
  return tape_.nodes_[tape_.nodes_[id_].inputs.at(i)].value;
}

bool BackwardContext::needs_grad(std::size_t i) const {
  return tape_.nodes_[tape_.nodes_[id_].inputs.at(i)].requires_grad;
}

Tensor& BackwardContext::input_grad(std::size_t i) {
  auto& in = tape_.nodes_[tape_.nodes_[id_].inputs.at(i)];
  if (!in.grad.defined()) in.grad = Tensor(in.value.shape());
  return in.grad;
}

}  // namespace stgsnas
