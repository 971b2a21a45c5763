// SPDX-License-Identifier: Apache-2.0
#include "stgsnas/fusion_ops.hpp"

#include <cmath>

#include "stgsnas/errors.hpp"
#include "stgsnas/ops.hpp"
#include "stgsnas/sampler.hpp"

namespace stgsnas {

std::string_view to_string(OpKind kind) {
  switch (kind) {
    case OpKind::Zero: return "Zero";
    case OpKind::Sum: return "Sum";
    case OpKind::Attention: return "Attention";
    case OpKind::LinearGLU: return "LinearGLU";
    case OpKind::ConcatFC: return "ConcatFC";
  }
  return "unknown";
}

OpKind op_kind_from_string(std::string_view name) {
  for (auto k : default_op_pool()) {
    if (to_string(k) == name) return k;
  }
  throw ContractError("unknown fusion op '" + std::string(name) + "'");
}

std::string_view to_string(EdgeKind kind) { return kind == EdgeKind::Identity ? "Identity" : "Zero"; }

const std::vector<OpKind>& default_op_pool() {
  static const std::vector<OpKind> pool = {OpKind::Zero, OpKind::Sum, OpKind::Attention,
                                           OpKind::LinearGLU, OpKind::ConcatFC};
  return pool;
}

std::size_t op_parameter_count(OpKind kind, std::size_t width) {
  switch (kind) {
    case OpKind::LinearGLU: return 2 * width * width;
    case OpKind::ConcatFC: return 2 * width * width + width;
    default: return 0;
  }
}

void glorot_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, std::uint64_t seed,
                    std::uint64_t stream) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  SeededRng rng(seed, stream);
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = limit * (2.0 * rng.uniform(i) - 1.0);
}

OpWeights OpWeights::create(OpKind kind, std::size_t width, std::string_view id_prefix,
                            std::uint64_t seed) {
  if (width == 0) throw ContractError("feature width must be positive");
  OpWeights w;
  w.kind_ = kind;
  w.width_ = width;
  const std::string prefix(id_prefix);
  auto stream_of = [](const std::string& id) { return stable_hash(id); };
  if (kind == OpKind::LinearGLU) {
    for (const char* name : {"/W1", "/W2"}) {
      Tensor t({width, width});
      glorot_uniform(t, width, width, seed, stream_of(prefix + name));
      w.params_.emplace_back(prefix + name, ParamGroup::Weights, std::move(t));
    }
  } else if (kind == OpKind::ConcatFC) {
    Tensor t({2 * width, width});
    glorot_uniform(t, 2 * width, width, seed, stream_of(prefix + "/W"));
    w.params_.emplace_back(prefix + "/W", ParamGroup::Weights, std::move(t));
    w.params_.emplace_back(prefix + "/b", ParamGroup::Weights, Tensor({width}, 0.0));
  }
  return w;
}

std::size_t OpWeights::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.numel();
  return n;
}

OpWeightVars OpWeights::bind(Tape& tape) {
  OpWeightVars v;
  if (kind_ == OpKind::LinearGLU) {
    v.w1 = tape.param(params_[0]);
    v.w2 = tape.param(params_[1]);
  } else if (kind_ == OpKind::ConcatFC) {
    v.w = tape.param(params_[0]);
    v.b = tape.param(params_[1]);
  }
  return v;
}

namespace {

void check_inputs(Var x, Var y) {
  const auto& xs = x.shape();
  if (xs.size() != 3) throw DimensionError("fusion ops expect [B,T,C] inputs, got " + shape_str(xs));
  if (xs != y.shape()) {
    throw DimensionError("fusion op inputs differ: " + shape_str(xs) + " vs " + shape_str(y.shape()));
  }
}

void require_weight(const Var& w, OpKind kind, std::size_t rows, std::size_t cols) {
  if (!w.valid()) throw ContractError(std::string(to_string(kind)) + " called without its weights");
  const auto& s = w.shape();
  const bool ok = cols == 0 ? (s.size() == 1 && s[0] == rows)
                            : (s.size() == 2 && s[0] == rows && s[1] == cols);
  if (!ok) {
    throw DimensionError(std::string(to_string(kind)) + " weight " + shape_str(s) +
                         " inconsistent with feature width " +
                         std::to_string(cols == 0 ? rows : cols));
  }
}

}  // namespace

Var apply_op(OpKind kind, Var x, Var y, const OpWeightVars& weights) {
  check_inputs(x, y);
  const std::size_t c = x.shape()[2];
  switch (kind) {
    case OpKind::Zero:
      return x.tape()->constant(Tensor(x.shape()));
    case OpKind::Sum:
      return ad::add(x, y);
    case OpKind::Attention: {
      Var scores = ad::scale(ad::bmm(x, ad::transpose_last2(y)), 1.0 / std::sqrt(static_cast<double>(c)));
      return ad::bmm(ad::softmax(scores), y);
    }
    case OpKind::LinearGLU:
      require_weight(weights.w1, kind, c, c);
      require_weight(weights.w2, kind, c, c);
      return ad::mul(ad::linear(x, weights.w1), ad::sigmoid(ad::linear(y, weights.w2)));
    case OpKind::ConcatFC: {
      require_weight(weights.w, kind, 2 * c, c);
      require_weight(weights.b, kind, c, 0);
      const Var parts[] = {x, y};
      return ad::relu(ad::add_bias(ad::linear(ad::concat(parts, 2), weights.w), weights.b));
    }
  }
  throw ContractError("unhandled fusion op");
}

Var apply_edge(EdgeKind kind, Var x) {
  if (kind == EdgeKind::Identity) return x;
  return x.tape()->constant(Tensor(x.shape()));
}

}  // namespace stgsnas
