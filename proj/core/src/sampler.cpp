// SPDX-License-Identifier: Apache-2.0
#include "stgsnas/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "stgsnas/errors.hpp"
#include "stgsnas/ops.hpp"

namespace stgsnas {

std::string_view to_string(RelaxationMode mode) {
  switch (mode) {
    case RelaxationMode::Stgs: return "stgs";
    case RelaxationMode::PlainSoftmax: return "plain-softmax";
    case RelaxationMode::EvalDeterministic: return "eval-deterministic";
    case RelaxationMode::GumbelSoft: return "gumbel-soft";
  }
  return "unknown";
}

RelaxationMode relaxation_mode_from_string(std::string_view name) {
  for (auto m : {RelaxationMode::Stgs, RelaxationMode::PlainSoftmax,
                 RelaxationMode::EvalDeterministic, RelaxationMode::GumbelSoft}) {
    if (to_string(m) == name) return m;
  }
  throw ContractError("unknown relaxation mode '" + std::string(name) + "'");
}

void RelaxationConfig::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw ContractError("temperature must be a positive finite number");
  }
  if (samples < 1) throw ContractError("sample count M must be >= 1");
}

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

SeededRng::SeededRng(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), key_(mix64(mix64(seed + kGolden) ^ (stream * kGolden + 1))) {}

std::uint64_t SeededRng::bits(std::uint64_t draw_index) const noexcept {
  return mix64(key_ + (draw_index + 1) * kGolden);
}

double SeededRng::uniform(std::uint64_t draw_index) const noexcept {
  return static_cast<double>(bits(draw_index) >> 11) * 0x1.0p-53;
}

SeededRng SeededRng::substream(std::uint64_t salt) const noexcept {
  return SeededRng(seed_, mix64(stream_ ^ mix64(salt + kGolden)));
}

double NoiseCursor::next_clamped_uniform() {
  return std::clamp(next_uniform(), kUniformFloor, 1.0 - kUniformFloor);
}

double NoiseCursor::next_gumbel(const GumbelParams& p) { return gumbel_icdf(next_clamped_uniform(), p); }

double gumbel_icdf(double u, const GumbelParams& p) {
  if (!(u > 0.0 && u < 1.0)) {
    throw DomainError("gumbel_icdf: u must lie in the open interval (0, 1), got " + std::to_string(u));
  }
  if (!(p.beta >= 0.0)) throw DomainError("gumbel scale beta must be non-negative");
  return -p.beta * std::log(-std::log(u)) + p.mu;
}

double gumbel_cdf(double x, const GumbelParams& p) {
  if (!(p.beta > 0.0)) throw DomainError("gumbel_cdf needs beta > 0");
  return std::exp(-std::exp(-(x - p.mu) / p.beta));
}

Tensor sample_gumbel(const Shape& shape, NoiseCursor& cursor, const GumbelParams& p) {
  Tensor out(shape);
  for (auto& v : out.data()) v = cursor.next_gumbel(p);
  return out;
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw ContractError("argmax of an empty range");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

std::vector<double> one_hot(std::size_t index, std::size_t n) {
  std::vector<double> v(n, 0.0);
  v.at(index) = 1.0;
  return v;
}

double shannon_entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

std::size_t gumbel_max_logits(std::span<const double> logits, NoiseCursor& cursor) {
  if (logits.empty()) throw ContractError("gumbel_max over zero categories");
  std::vector<double> perturbed(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!std::isfinite(logits[i])) throw DomainError("gumbel_max: non-finite logit");
    perturbed[i] = logits[i] + cursor.next_gumbel();
  }
  return argmax(perturbed);
}

std::size_t gumbel_max(std::span<const double> theta, NoiseCursor& cursor) {
  std::vector<double> logits(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    if (!(theta[i] > 0.0) || !std::isfinite(theta[i])) {
      throw DomainError("gumbel_max: unnormalized probabilities must be positive and finite");
    }
    logits[i] = std::log(theta[i]);
  }
  return gumbel_max_logits(logits, cursor);
}

namespace {

void require_vector(const Tensor& logits) {
  if (logits.rank() != 1) {
    throw DimensionError("relaxed sampling expects 1-D logits, got " + shape_str(logits.shape()));
  }
}

bool is_noisy(RelaxationMode m) { return m == RelaxationMode::Stgs || m == RelaxationMode::GumbelSoft; }

// Pre-softmax scores; mirrors the arithmetic of the composed tape route
// (add, then scale by 1/temperature) so both produce identical bits.
std::vector<double> relaxed_scores(std::span<const double> logits, const RelaxationConfig& cfg,
                                   NoiseCursor& cursor, std::vector<double>* noise_out = nullptr) {
  std::vector<double> s(logits.size());
  switch (cfg.mode) {
    case RelaxationMode::EvalDeterministic:
    case RelaxationMode::PlainSoftmax:
      std::copy(logits.begin(), logits.end(), s.begin());
      break;
    case RelaxationMode::Stgs:
    case RelaxationMode::GumbelSoft: {
      const double factor = 1.0 / cfg.temperature;
      for (std::size_t i = 0; i < s.size(); ++i) {
        const double g = cursor.next_gumbel();
        if (noise_out) noise_out->push_back(g);
        s[i] = factor * (logits[i] + g);
      }
      break;
    }
  }
  return s;
}

}  // namespace

Tensor gumbel_softmax_sample(const Tensor& logits, const RelaxationConfig& cfg, NoiseCursor& cursor) {
  cfg.validate();
  require_vector(logits);
  auto scores = relaxed_scores(logits.data(), cfg, cursor);
  return Tensor(logits.shape(), softmax_values(scores));
}

namespace ad {

Var gumbel_softmax_sample(Var logits, const RelaxationConfig& cfg, NoiseCursor& cursor) {
  cfg.validate();
  require_vector(logits.value());
  Tape& tape = *logits.tape();
  switch (cfg.mode) {
    case RelaxationMode::EvalDeterministic:
    case RelaxationMode::PlainSoftmax:
      return softmax(logits);
    case RelaxationMode::Stgs:
    case RelaxationMode::GumbelSoft:
      break;
  }
  Var noise = tape.constant(sample_gumbel(logits.shape(), cursor));
  return softmax(scale(add(logits, noise), 1.0 / cfg.temperature));
}

Var stgs_forward_backward(Var logits, const RelaxationConfig& cfg, NoiseCursor& cursor) {
  if (cfg.mode != RelaxationMode::Stgs) {
    throw ContractError("stgs_forward_backward requires relaxation mode 'stgs'");
  }
  cfg.validate();
  require_vector(logits.value());
  Tape& tape = *logits.tape();
  Var noise = tape.constant(sample_gumbel(logits.shape(), cursor));
  Var perturbed = add(logits, noise);
  Var soft = softmax(scale(perturbed, 1.0 / cfg.temperature));
  const std::size_t n = logits.value().numel();
  Var hard = tape.constant(Tensor({n}, one_hot(argmax(perturbed.value().data()), n)));
  return add(hard, sub(soft, stop_gradient(soft)));
}

Var multi_sample_average(Var logits, const RelaxationConfig& cfg, NoiseCursor& cursor) {
  cfg.validate();
  const Tensor& phi = logits.value();
  require_vector(phi);
  const std::size_t n = phi.numel();
  const std::size_t m_count = is_noisy(cfg.mode) ? static_cast<std::size_t>(cfg.samples) : 1;
  const double factor = is_noisy(cfg.mode) ? 1.0 / cfg.temperature : 1.0;

  // soft[m * n + i] keeps every relaxed sample for the backward rule.
  std::vector<double> soft(m_count * n);
  Tensor out({n});
  for (std::size_t m = 0; m < m_count; ++m) {
    std::vector<double> noise;
    auto scores = relaxed_scores(phi.data(), cfg, cursor, &noise);
    auto s = softmax_values(scores);
    std::copy(s.begin(), s.end(), soft.begin() + static_cast<std::ptrdiff_t>(m * n));
    if (cfg.mode == RelaxationMode::Stgs) {
      std::vector<double> perturbed(n);
      for (std::size_t i = 0; i < n; ++i) perturbed[i] = phi[i] + noise[i];
      out[argmax(perturbed)] += 1.0;
    } else {
      for (std::size_t i = 0; i < n; ++i) out[i] += s[i];
    }
  }
  if (m_count > 1) {
    const double inv = static_cast<double>(m_count);
    for (auto& v : out.data()) v /= inv;
  }

  return logits.tape()->record(
      std::move(out), {logits}, [soft = std::move(soft), n, m_count, factor](BackwardContext& ctx) {
        const auto& g = ctx.grad_output();
        auto& gi = ctx.input_grad(0);
        const double inv_m = 1.0 / static_cast<double>(m_count);
        for (std::size_t m = 0; m < m_count; ++m) {
          const double* y = soft.data() + m * n;
          double dotp = 0.0;
          for (std::size_t i = 0; i < n; ++i) dotp += g[i] * y[i];
          for (std::size_t i = 0; i < n; ++i) {
            const double d = (y[i] * (g[i] - dotp)) * factor;
            gi[i] += m_count == 1 ? d : d * inv_m;
          }
        }
      });
}

}  // namespace ad
}  // namespace stgsnas
