// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "stgsnas/autodiff.hpp"
#include "stgsnas/ops.hpp"

namespace stgsnas::testing {

/// Tensor of uniform(lo, hi) entries from a std::mt19937_64.
inline Tensor random_tensor(const Shape& shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(shape);
  for (auto& v : t.data()) v = dist(gen);
  return t;
}

using OpBuilder = std::function<Var(Tape&, std::span<const Var>)>;

/// Max relative error between backward() and central differences of
/// loss = <build(inputs), R> for a fixed random R, over every input entry.
inline double op_gradcheck(std::vector<Tensor> inputs, const OpBuilder& build, std::uint64_t seed = 7) {
  std::vector<Param> params;
  params.reserve(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i)
    params.emplace_back("in" + std::to_string(i), ParamGroup::Weights, std::move(inputs[i]));

  Tensor projection;
  auto forward = [&](Tape& tape) {
    std::vector<Var> vars;
    for (auto& p : params) vars.push_back(tape.param(p));
    Var out = build(tape, vars);
    if (!projection.defined()) projection = random_tensor(out.shape(), seed);
    return ad::dot(out, tape.constant(projection));
  };

  {
    Tape tape;
    for (auto& p : params) p.zero_grad();
    tape.backward(forward(tape));
  }
  double worst = 0.0;
  for (auto& p : params) {
    const std::vector<double> analytic = p.grad.values();
    worst = std::max(worst, max_fd_error(p.value.data(), analytic, [&] {
                       Tape tape;
                       return forward(tape).value().item();
                     }));
  }
  return worst;
}

}  // namespace stgsnas::testing
