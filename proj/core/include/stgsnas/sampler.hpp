// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "stgsnas/autodiff.hpp"

namespace stgsnas {

/// Location/scale of a Gumbel distribution. `beta` must be non-negative.
struct GumbelParams {
  double mu = 0.0;
  double beta = 1.0;
};

/// How architecture logits are turned into mixing weights.
///
///  - Stgs: one-hot forward, gradient of the relaxed Gumbel-Softmax sample.
///  - PlainSoftmax: softmax(phi), no noise, no discretization, no
///    temperature (the conventional softmax relaxation used as a baseline).
///  - EvalDeterministic: softmax(phi), no noise.
///  - GumbelSoft: the relaxed sample softmax((phi + G) / temperature) used as
///    is. Differentiable in phi for fixed noise; used for gradient checks.
enum class RelaxationMode { Stgs, PlainSoftmax, EvalDeterministic, GumbelSoft };

std::string_view to_string(RelaxationMode mode);
RelaxationMode relaxation_mode_from_string(std::string_view name);

struct RelaxationConfig {
  double temperature = 10.0;
  int samples = 15;
  RelaxationMode mode = RelaxationMode::Stgs;

  /// Throws ContractError unless temperature > 0 and samples >= 1.
  void validate() const;
};

/// Counter-based generator: the draw for (seed, stream, index) is a pure
/// function of those three numbers.
class SeededRng {
 public:
  SeededRng(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

  std::uint64_t bits(std::uint64_t draw_index) const noexcept;
  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform(std::uint64_t draw_index) const noexcept;

  /// A stream keyed by this one plus `salt`.
  SeededRng substream(std::uint64_t salt) const noexcept;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
};

/// Sequential reader over a SeededRng. Copying a cursor freezes the noise it
/// will produce, which is how tests replay identical Gumbel draws.
class NoiseCursor {
 public:
  explicit NoiseCursor(SeededRng rng, std::uint64_t start = 0) : rng_(rng), next_(start) {}

  double next_uniform() { return rng_.uniform(next_++); }
  /// Uniform clamped to [kUniformFloor, 1 - kUniformFloor].
  double next_clamped_uniform();
  double next_gumbel(const GumbelParams& p = {});

  std::uint64_t position() const noexcept { return next_; }
  const SeededRng& rng() const noexcept { return rng_; }

 private:
  SeededRng rng_;
  std::uint64_t next_;
};

inline constexpr double kUniformFloor = 1e-10;

/// FNV-1a; used to derive stream ids from names.
constexpr std::uint64_t stable_hash(std::string_view text) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Gumbel quantile function: mu - beta * log(-log u). Requires 0 < u < 1.
double gumbel_icdf(double u, const GumbelParams& p = {});

/// Gumbel CDF exp(-exp(-(x - mu) / beta)).
double gumbel_cdf(double x, const GumbelParams& p = {});

/// Tensor of i.i.d. Gumbel draws, consumed from `cursor` in row-major order.
Tensor sample_gumbel(const Shape& shape, NoiseCursor& cursor, const GumbelParams& p = {});

/// Categorical sample via argmax(log theta_i + G_i). `theta` holds
/// unnormalized probabilities and every entry must be > 0. Ties go to the
/// lowest index.
std::size_t gumbel_max(std::span<const double> theta, NoiseCursor& cursor);

/// Same trick with theta already in log space.
std::size_t gumbel_max_logits(std::span<const double> logits, NoiseCursor& cursor);

/// Index of the largest entry, lowest index on ties.
std::size_t argmax(std::span<const double> values);

std::vector<double> one_hot(std::size_t index, std::size_t n);

/// Shannon entropy (natural log) of a probability vector; 0 log 0 = 0.
double shannon_entropy(std::span<const double> probs);

/// Value-only relaxed sample for 1-D logits.
///   Stgs / GumbelSoft : softmax((phi + G) / temperature)
///   PlainSoftmax      : softmax(phi)
///   EvalDeterministic : softmax(phi)
Tensor gumbel_softmax_sample(const Tensor& logits, const RelaxationConfig& cfg, NoiseCursor& cursor);

namespace ad {

/// Relaxed sample recorded on the tape from elementary ops (noise constant,
/// add, scale, softmax). Modes as in the value-only overload.
Var gumbel_softmax_sample(Var logits, const RelaxationConfig& cfg, NoiseCursor& cursor);

/// Straight-through Gumbel-Softmax built from elementary ops:
/// hard + (soft - stop_gradient(soft)). Forward is exactly one-hot; the
/// gradient is that of the soft sample. Requires mode Stgs.
Var stgs_forward_backward(Var logits, const RelaxationConfig& cfg, NoiseCursor& cursor);

/// Average of cfg.samples independent draws as a single tape node.
/// Stgs averages straight-through one-hots, GumbelSoft averages soft samples;
/// the deterministic modes return their single softmax. With samples == 1 the
/// forward value is bitwise identical to the corresponding single-sample op.
Var multi_sample_average(Var logits, const RelaxationConfig& cfg, NoiseCursor& cursor);

}  // namespace ad
}  // namespace stgsnas
