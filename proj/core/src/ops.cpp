// SPDX-License-Identifier: Apache-2.0
#include "stgsnas/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "stgsnas/errors.hpp"

namespace stgsnas {

std::vector<double> softmax_values(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    z += out[i];
  }
  for (auto& v : out) v /= z;
  return out;
}

Tensor softmax_values(const Tensor& logits) {
  if (logits.rank() > 2) throw DimensionError("softmax_values expects rank 1 or 2");
  const std::size_t n = logits.shape().back();
  Tensor out(logits.shape());
  for (std::size_t r = 0; r < logits.numel() / n; ++r) {
    auto row = softmax_values(logits.data().subspan(r * n, n));
    std::copy(row.begin(), row.end(), out.data().begin() + static_cast<std::ptrdiff_t>(r * n));
  }
  return out;
}

namespace ad {
namespace {

Tape& tape_of(Var a) {
  if (!a.valid()) throw ContractError("op on invalid Var");
  return *a.tape();
}

Tape& tape_of(Var a, Var b) {
  if (a.tape() != b.tape() || !a.valid()) throw ContractError("op inputs live on different tapes");
  return *a.tape();
}

bool is_scalar(const Tensor& t) { return t.numel() == 1 && t.rank() == 1; }

// C[m,n] += A[m,k] * B[k,n]
void gemm_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
              std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m,n] += A[m,k] * B[n,k]^T
void gemm_acc_bt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                 std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      const double* arow = a + i * k;
      const double* brow = b + j * k;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      c[i * n + j] += s;
    }
  }
}

// C[k,n] += A[m,k]^T * B[m,n]
void gemm_acc_at(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                 std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      double* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename F, typename D>
Var unary(Var x, F f, D dfdx) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.numel(); ++i) out[i] = f(xv[i]);
  return tape_of(x).record(std::move(out), {x}, [dfdx](BackwardContext& ctx) {
    const auto& g = ctx.grad_output();
    const auto& in = ctx.input(0);
    const auto& y = ctx.output();
    auto& gi = ctx.input_grad(0);
    for (std::size_t i = 0; i < g.numel(); ++i) gi[i] += g[i] * dfdx(in[i], y[i]);
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  auto& tape = tape_of(a, b);
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) {
    throw DimensionError("matmul: cannot multiply " + shape_str(av.shape()) + " by " +
                         shape_str(bv.shape()));
  }
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  Tensor out({m, n});
  gemm_acc(av.data().data(), bv.data().data(), out.data().data(), m, k, n);
  return tape.record(std::move(out), {a, b}, [m, k, n](BackwardContext& ctx) {
    const auto& g = ctx.grad_output();
    if (ctx.needs_grad(0)) {
      gemm_acc_bt(g.data().data(), ctx.input(1).data().data(), ctx.input_grad(0).data().data(), m,
                  n, k);
    }
    if (ctx.needs_grad(1)) {
      gemm_acc_at(ctx.input(0).data().data(), g.data().data(), ctx.input_grad(1).data().data(), m,
                  k, n);
    }
  });
}

Var linear(Var x, Var w) {
  const auto& xs = x.shape();
  const auto& ws = w.shape();
  if (ws.size() != 2 || xs.back() != ws[0]) {
    throw DimensionError("linear: input " + shape_str(xs) + " incompatible with weight " +
                         shape_str(ws));
  }
  const std::size_t rows = x.value().numel() / xs.back();
  Var y = matmul(reshape(x, {rows, xs.back()}), w);
  Shape out_shape = xs;
  out_shape.back() = ws[1];
  return reshape(y, std::move(out_shape));
}

Var bmm(Var a, Var b) {
  auto& tape = tape_of(a, b);
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.rank() != 3 || bv.rank() != 3 || av.dim(0) != bv.dim(0) || av.dim(2) != bv.dim(1)) {
    throw DimensionError("bmm: cannot multiply " + shape_str(av.shape()) + " by " +
                         shape_str(bv.shape()));
  }
  const std::size_t batch = av.dim(0), m = av.dim(1), k = av.dim(2), n = bv.dim(2);
  Tensor out({batch, m, n});
  for (std::size_t s = 0; s < batch; ++s) {
    gemm_acc(av.data().data() + s * m * k, bv.data().data() + s * k * n,
             out.data().data() + s * m * n, m, k, n);
  }
  return tape.record(std::move(out), {a, b}, [batch, m, k, n](BackwardContext& ctx) {
    const auto& g = ctx.grad_output();
    for (std::size_t s = 0; s < batch; ++s) {
      const double* gs = g.data().data() + s * m * n;
      if (ctx.needs_grad(0)) {
        gemm_acc_bt(gs, ctx.input(1).data().data() + s * k * n,
                    ctx.input_grad(0).data().data() + s * m * k, m, n, k);
      }
      if (ctx.needs_grad(1)) {
        gemm_acc_at(ctx.input(0).data().data() + s * m * k, gs,
                    ctx.input_grad(1).data().data() + s * k * n, m, k, n);
      }
    }
  });
}

Var transpose_last2(Var x) {
  const auto& xv = x.value();
  if (xv.rank() != 3) throw DimensionError("transpose_last2 expects rank 3, got " + shape_str(xv.shape()));
  const std::size_t batch = xv.dim(0), m = xv.dim(1), n = xv.dim(2);
  Tensor out({batch, n, m});
  for (std::size_t s = 0; s < batch; ++s)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) out[(s * n + j) * m + i] = xv[(s * m + i) * n + j];
  return tape_of(x).record(std::move(out), {x}, [batch, m, n](BackwardContext& ctx) {
    const auto& g = ctx.grad_output();
    auto& gi = ctx.input_grad(0);
    for (std::size_t s = 0; s < batch; ++s)
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gi[(s * m + i) * n + j] += g[(s * n + j) * m + i];
  });
}

Var reshape(Var x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return tape_of(x).record(std::move(out), {x}, [](BackwardContext& ctx) {
    const auto& g = ctx.grad_output();
    auto& gi = ctx.input_grad(0);
    for (std::size_t i = 0; i < g.numel(); ++i) gi[i] += g[i];
  });
}

Var softmax(Var x, std::size_t axis) {
  const auto& xv = x.value();
  const auto& s = xv.shape();
  if (axis >= s.size()) throw DimensionError("softmax: axis out of range for " + shape_str(s));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t n = s[axis];
  Tensor out(s);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      double m = xv[base];
      for (std::size_t j = 1; j < n; ++j) m = std::max(m, xv[base + j * inner]);
      double z = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double e = std::exp(xv[base + j * inner] - m);
        out[base + j * inner] = e;
        z += e;
      }
      for (std::size_t j = 0; j < n; ++j) out[base + j * inner] /= z;
    }
  }
  return tape_of(x).record(std::move(out), {x}, [outer, inner, n](BackwardContext& ctx) {
    const auto& g = ctx.grad_output();
    const auto& y = ctx.output();
    auto& gi = ctx.input_grad(0);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * n * inner + in;
        double dotp = 0.0;
        for (std::size_t j = 0; j < n; ++j) dotp += g[base + j * inner] * y[base + j * inner];
        for (std::size_t j = 0; j < n; ++j) {
          const std::size_t idx = base + j * inner;
          gi[idx] += y[idx] * (g[idx] - dotp);
        }
      }
    }
  });
}

Var softmax(Var x) { return softmax(x, x.shape().size() - 1); }

namespace {

// Elementwise binary op with optional scalar broadcast on either side.
template <typename F, typename DA, typename DB>
Var binary(Var a, Var b, const char* name, F f, DA dfda, DB dfdb) {
  auto& tape = tape_of(a, b);
  const auto& av = a.value();
  const auto& bv = b.value();
  const bool a_scalar = is_scalar(av) && !is_scalar(bv);
  const bool b_scalar = is_scalar(bv) && !is_scalar(av);
  if (!a_scalar && !b_scalar && av.shape() != bv.shape()) {
    throw DimensionError(std::string(name) + ": shape mismatch " + shape_str(av.shape()) + " vs " +
                         shape_str(bv.shape()));
  }
  const Shape& out_shape = a_scalar ? bv.shape() : av.shape();
  Tensor out(out_shape);
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) out[i] = f(av[a_scalar ? 0 : i], bv[b_scalar ? 0 : i]);
  return tape.record(std::move(out), {a, b}, [=](BackwardContext& ctx) {
    const auto& g = ctx.grad_output();
    const auto& x = ctx.input(0);
    const auto& y = ctx.input(1);
    if (ctx.needs_grad(0)) {
      auto& ga = ctx.input_grad(0);
      for (std::size_t i = 0; i < n; ++i)
        ga[a_scalar ? 0 : i] += g[i] * dfda(x[a_scalar ? 0 : i], y[b_scalar ? 0 : i]);
    }
    if (ctx.needs_grad(1)) {
      auto& gb = ctx.input_grad(1);
      for (std::size_t i = 0; i < n; ++i)
        gb[b_scalar ? 0 : i] += g[i] * dfdb(x[a_scalar ? 0 : i], y[b_scalar ? 0 : i]);
    }
  });
}

}  // namespace

Var add(Var a, Var b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Var add_bias(Var x, Var bias) {
  auto& tape = tape_of(x, bias);
  const auto& xv = x.value();
  const auto& bv = bias.value();
  const std::size_t n = xv.shape().back();
  if (bv.rank() != 1 || bv.dim(0) != n) {
    throw DimensionError("add_bias: bias " + shape_str(bv.shape()) + " does not match last axis of " +
                         shape_str(xv.shape()));
  }
  Tensor out = xv;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += bv[i % n];
  return tape.record(std::move(out), {x, bias}, [n](BackwardContext& ctx) {
    const auto& g = ctx.grad_output();
    if (ctx.needs_grad(0)) {
      auto& gx = ctx.input_grad(0);
      for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i];
    }
    if (ctx.needs_grad(1)) {
      auto& gb = ctx.input_grad(1);
      for (std::size_t i = 0; i < g.numel(); ++i) gb[i % n] += g[i];
    }
  });
}

Var neg(Var x) {
  return unary(x, [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Var scale(Var x, double factor) {
  return unary(
      x, [factor](double v) { return factor * v; }, [factor](double, double) { return factor; });
}

Var sigmoid(Var x) {
  return unary(
      x,
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var relu(Var x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var exp(Var x) {
  return unary(x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Var log(Var x) {
  for (double v : x.value().data()) {
    if (!(v > 0.0)) throw DomainError("log: argument must be strictly positive, got " + std::to_string(v));
  }
  return unary(x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw ContractError("concat of zero tensors");
  auto& tape = tape_of(parts[0]);
  const Shape& s0 = parts[0].shape();
  if (axis >= s0.size()) throw DimensionError("concat: axis out of range for " + shape_str(s0));
  std::size_t outer = 1, inner = 1, total = 0;
  for (std::size_t i = 0; i < axis; ++i) outer *= s0[i];
  for (std::size_t i = axis + 1; i < s0.size(); ++i) inner *= s0[i];
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    const auto& s = p.shape();
    if (p.tape() != &tape) throw ContractError("concat inputs live on different tapes");
    if (s.size() != s0.size()) throw DimensionError("concat: rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != s0[i]) {
        throw DimensionError("concat: " + shape_str(s) + " incompatible with " + shape_str(s0));
      }
    }
    widths.push_back(s[axis]);
    total += s[axis];
  }
  Shape out_shape = s0;
  out_shape[axis] = total;
  Tensor out(out_shape);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto& v = parts[p].value();
    const std::size_t w = widths[p];
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(v.data().begin() + static_cast<std::ptrdiff_t>(o * w * inner), w * inner,
                  out.data().begin() + static_cast<std::ptrdiff_t>((o * total + offset) * inner));
    }
    offset += w;
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return tape.record(std::move(out), std::move(inputs),
                     [widths, outer, inner, total](BackwardContext& ctx) {
                       const auto& g = ctx.grad_output();
                       std::size_t offset = 0;
                       for (std::size_t p = 0; p < widths.size(); ++p) {
                         const std::size_t w = widths[p];
                         if (ctx.needs_grad(p)) {
                           auto& gi = ctx.input_grad(p);
                           for (std::size_t o = 0; o < outer; ++o)
                             for (std::size_t i = 0; i < w * inner; ++i)
                               gi[o * w * inner + i] += g[(o * total + offset) * inner + i];
                         }
                         offset += w;
                       }
                     });
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return tape_of(x).record(Tensor::scalar(s), {x}, [](BackwardContext& ctx) {
    const double g = ctx.grad_output()[0];
    auto& gi = ctx.input_grad(0);
    for (std::size_t i = 0; i < gi.numel(); ++i) gi[i] += g;
  });
}

Var mean(Var x) { return scale(sum(x), 1.0 / static_cast<double>(x.value().numel())); }

Var mean_axis(Var x, std::size_t axis) {
  const auto& xv = x.value();
  const auto& s = xv.shape();
  if (axis >= s.size()) throw DimensionError("mean_axis: axis out of range for " + shape_str(s));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t n = s[axis];
  Shape out_shape;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (i != axis) out_shape.push_back(s[i]);
  if (out_shape.empty()) out_shape.push_back(1);
  Tensor out(out_shape);
  const double inv = 1.0 / static_cast<double>(n);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t in = 0; in < inner; ++in) out[o * inner + in] += xv[(o * n + j) * inner + in] * inv;
  return tape_of(x).record(std::move(out), {x}, [outer, inner, n, inv](BackwardContext& ctx) {
    const auto& g = ctx.grad_output();
    auto& gi = ctx.input_grad(0);
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t in = 0; in < inner; ++in) gi[(o * n + j) * inner + in] += g[o * inner + in] * inv;
  });
}

Var select(Var x, std::size_t axis, std::size_t index) {
  const auto& xv = x.value();
  const auto& s = xv.shape();
  if (axis >= s.size() || index >= s[axis]) {
    throw DimensionError("select: index " + std::to_string(index) + " on axis " +
                         std::to_string(axis) + " out of range for " + shape_str(s));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t n = s[axis];
  Shape out_shape;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (i != axis) out_shape.push_back(s[i]);
  if (out_shape.empty()) out_shape.push_back(1);
  Tensor out(out_shape);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t in = 0; in < inner; ++in) out[o * inner + in] = xv[(o * n + index) * inner + in];
  return tape_of(x).record(std::move(out), {x}, [outer, inner, n, index](BackwardContext& ctx) {
    const auto& g = ctx.grad_output();
    auto& gi = ctx.input_grad(0);
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t in = 0; in < inner; ++in) gi[(o * n + index) * inner + in] += g[o * inner + in];
  });
}

Var dot(Var a, Var b) { return sum(mul(a, b)); }

Var stop_gradient(Var x) { return tape_of(x).constant(x.value()); }

Var softmax_cross_entropy(Var logits, std::span<const int> labels) {
  const auto& lv = logits.value();
  if (lv.rank() != 2) throw DimensionError("softmax_cross_entropy expects [B,K] logits");
  const std::size_t batch = lv.dim(0), k = lv.dim(1);
  if (labels.size() != batch) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                         " labels for batch of " + std::to_string(batch));
  }
  Tensor probs({batch, k});
  double loss = 0.0;
  for (std::size_t r = 0; r < batch; ++r) {
    const int y = labels[r];
    if (y < 0 || static_cast<std::size_t>(y) >= k) throw DomainError("label out of range");
    const double* row = lv.data().data() + r * k;
    double m = row[0];
    for (std::size_t j = 1; j < k; ++j) m = std::max(m, row[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(row[j] - m);
    const double log_z = m + std::log(z);
    for (std::size_t j = 0; j < k; ++j) probs[r * k + j] = std::exp(row[j] - log_z);
    loss += log_z - row[y];
  }
  loss /= static_cast<double>(batch);
  std::vector<int> ys(labels.begin(), labels.end());
  return tape_of(logits).record(
      Tensor::scalar(loss), {logits},
      [probs = std::move(probs), ys = std::move(ys), batch, k](BackwardContext& ctx) {
        const double g = ctx.grad_output()[0] / static_cast<double>(batch);
        auto& gi = ctx.input_grad(0);
        for (std::size_t r = 0; r < batch; ++r) {
          for (std::size_t j = 0; j < k; ++j) {
            const double target = static_cast<std::size_t>(ys[r]) == j ? 1.0 : 0.0;
            gi[r * k + j] += g * (probs[r * k + j] - target);
          }
        }
      });
}

}  // namespace ad
}  // namespace stgsnas
