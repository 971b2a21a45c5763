// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "stgsnas/errors.hpp"
#include "stgsnas/ops.hpp"
#include "stgsnas/sampler.hpp"

namespace stgsnas {
namespace {

NoiseCursor cursor(std::uint64_t seed, std::string_view stream = "test") {
  return NoiseCursor(SeededRng(seed, stable_hash(stream)));
}

RelaxationConfig relax(RelaxationMode mode, double lambda, int samples = 1) {
  RelaxationConfig c;
  c.mode = mode;
  c.temperature = lambda;
  c.samples = samples;
  return c;
}

double max_component(const Tensor& t) {
  double m = 0.0;
  for (double v : t.values()) m = std::max(m, v);
  return m;
}

double simplex_gap(const Tensor& t) {
  double s = 0.0;
  for (double v : t.values()) {
    if (v < 0.0) return 1.0;
    s += v;
  }
  return std::abs(s - 1.0);
}

TEST(GumbelIcdf, KnownValues) {
  EXPECT_NEAR(gumbel_icdf(std::exp(-1.0)), 0.0, 1e-15);
  EXPECT_NEAR(gumbel_icdf(0.5), -std::log(std::log(2.0)), 1e-15);
  EXPECT_NEAR(gumbel_icdf(0.5), 0.3665129, 1e-7);
  EXPECT_NEAR(gumbel_icdf(0.5, {2.0, 3.0}), 2.0 + 3.0 * 0.36651292058166435, 1e-12);
}

TEST(GumbelIcdf, OutsideOpenIntervalIsDomainError) {
  EXPECT_THROW(gumbel_icdf(0.0), DomainError);
  EXPECT_THROW(gumbel_icdf(1.0), DomainError);
  EXPECT_THROW(gumbel_icdf(-0.1), DomainError);
  EXPECT_THROW(gumbel_icdf(std::nan("")), DomainError);
}

TEST(GumbelIcdf, InvertsCdf) {
  for (double u : {1e-10, 0.01, 0.3, 0.5, 0.9, 1.0 - 1e-10}) EXPECT_NEAR(gumbel_cdf(gumbel_icdf(u)), u, 1e-12);
}

TEST(NoiseCursor, ClampKeepsDrawsFinite) {
  EXPECT_TRUE(std::isfinite(gumbel_icdf(kUniformFloor)));
  EXPECT_TRUE(std::isfinite(gumbel_icdf(1.0 - kUniformFloor)));
  NoiseCursor c = cursor(1);
  for (int i = 0; i < 100000; ++i) {
    const double u = c.next_clamped_uniform();
    ASSERT_GE(u, kUniformFloor);
    ASSERT_LE(u, 1.0 - kUniformFloor);
  }
}

TEST(SampleGumbel, SameSeedSameTensor) {
  NoiseCursor a = cursor(42);
  NoiseCursor b = cursor(42);
  EXPECT_EQ(sample_gumbel({3, 5}, a), sample_gumbel({3, 5}, b));
  NoiseCursor c = cursor(43);
  NoiseCursor d = cursor(42, "other");
  NoiseCursor e = cursor(42);
  const Tensor ref = sample_gumbel({3, 5}, e);
  EXPECT_NE(sample_gumbel({3, 5}, c), ref);
  EXPECT_NE(sample_gumbel({3, 5}, d), ref);
}

TEST(SampleGumbel, CopiedCursorReplaysDraws) {
  NoiseCursor a = cursor(5);
  a.next_uniform();
  NoiseCursor frozen = a;
  EXPECT_EQ(a.next_gumbel(), frozen.next_gumbel());
  EXPECT_EQ(a.position(), frozen.position());
}

TEST(SampleGumbel, MomentsAndKs) {
  constexpr std::size_t n = 200000;
  NoiseCursor c = cursor(2024);
  const Tensor draws = sample_gumbel({n}, c);
  double mean = 0.0;
  for (double v : draws.values()) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : draws.values()) var += (v - mean) * (v - mean);
  var /= n - 1;
  // 3 sigma bands; the Gumbel excess kurtosis is 12/5, so var(s^2) ~ 4.4 sigma^4 / n.
  const double pi2_6 = std::numbers::pi * std::numbers::pi / 6.0;
  EXPECT_NEAR(mean, std::numbers::egamma, 3.0 * std::sqrt(pi2_6 / n));
  EXPECT_NEAR(var, pi2_6, 3.0 * pi2_6 * std::sqrt(4.4 / n));
  const double d = testing::ks_statistic(draws.values(), [](double x) { return std::exp(-std::exp(-x)); });
  EXPECT_GT(testing::ks_p_value(d, n), 0.01);
}

TEST(SampleGumbel, KsCalibratedAcrossSeeds) {
  constexpr int kSeeds = 100;
  int rejected = 0;
  for (int s = 0; s < kSeeds; ++s) {
    NoiseCursor c = cursor(static_cast<std::uint64_t>(s), "ks");
    std::vector<double> draws(20000);
    for (auto& v : draws) v = c.next_gumbel();
    const double d = testing::ks_statistic(draws, [](double x) { return std::exp(-std::exp(-x)); });
    rejected += testing::ks_p_value(d, draws.size()) < 0.05;
  }
  // Binomial(100, 0.05): P(X >= 13) < 0.005.
  EXPECT_LE(rejected, 12);
}

TEST(KsOracle, RejectsShiftedSample) {
  NoiseCursor c = cursor(9);
  std::vector<double> shifted(20000);
  for (auto& v : shifted) v = c.next_gumbel({0.1, 1.0});
  const double d = testing::ks_statistic(shifted, [](double x) { return std::exp(-std::exp(-x)); });
  EXPECT_LT(testing::ks_p_value(d, shifted.size()), 0.01);
}

TEST(GumbelMax, DegenerateDistribution) {
  NoiseCursor c = cursor(3);
  const std::vector<double> theta = {1.0, 1e-300};
  int zeros = 0;
  for (int i = 0; i < 10000; ++i) zeros += gumbel_max(theta, c) == 0;
  EXPECT_GE(zeros / 10000.0, 0.999);
}

TEST(GumbelMax, SingleCategory) {
  NoiseCursor c = cursor(4);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(gumbel_max(std::vector<double>{0.7}, c), 0u);
}

TEST(GumbelMax, NonPositiveThetaIsDomainError) {
  NoiseCursor c = cursor(4);
  EXPECT_THROW(gumbel_max(std::vector<double>{0.5, 0.0}, c), DomainError);
  EXPECT_THROW(gumbel_max(std::vector<double>{0.5, -1.0}, c), DomainError);
}

TEST(GumbelMax, FrequenciesMatchCategorical) {
  // A single seed rejects at 0.01 one time in a hundred, so check the
  // rejection rate over many seeds instead.
  const std::vector<double> theta = {0.2, 0.3, 0.5};
  constexpr int kSeeds = 200;
  int rejected = 0;
  for (int s = 0; s < kSeeds; ++s) {
    NoiseCursor c = cursor(static_cast<std::uint64_t>(s), "gumbel-max");
    std::vector<std::size_t> counts(3, 0);
    for (int i = 0; i < 100000; ++i) ++counts[gumbel_max(theta, c)];
    rejected += testing::chi_square(counts, theta).p_value < 0.01;
  }
  // Binomial(200, 0.01): P(X >= 7) < 0.005.
  EXPECT_LE(rejected, 6);
}

TEST(GumbelMax, ChiSquareOracleRejectsWrongProbabilities) {
  NoiseCursor c = cursor(5);
  const std::vector<double> theta = {0.2, 0.3, 0.5};
  std::vector<std::size_t> counts(3, 0);
  for (int i = 0; i < 100000; ++i) ++counts[gumbel_max(theta, c)];
  const std::vector<double> wrong = {0.21, 0.29, 0.5};
  EXPECT_LT(testing::chi_square(counts, wrong).p_value, 0.01);
}

TEST(Argmax, TiesGoToLowestIndex) {
  EXPECT_EQ(argmax(std::vector<double>{1.0, 3.0, 3.0}), 1u);
  EXPECT_EQ(argmax(std::vector<double>{0.0, 0.0}), 0u);
  EXPECT_EQ(one_hot(2, 4), (std::vector<double>{0, 0, 1, 0}));
}

TEST(GumbelSoftmax, OutputsOnSimplex) {
  NoiseCursor c = cursor(6);
  for (double lambda : {0.01, 0.1, 1.0, 10.0, 100.0}) {
    const Tensor phi = testing::random_tensor({6}, static_cast<std::uint64_t>(lambda * 100), -5, 5);
    for (auto mode : {RelaxationMode::Stgs, RelaxationMode::GumbelSoft, RelaxationMode::PlainSoftmax,
                      RelaxationMode::EvalDeterministic}) {
      EXPECT_LT(simplex_gap(gumbel_softmax_sample(phi, relax(mode, lambda), c)), 1e-12);
    }
  }
}

TEST(GumbelSoftmax, LowTemperatureSharpnessMatchesLogisticLaw) {
  // Two categories: max > 0.999 iff |G1 - G2 + phi1 - phi0| > lambda log 999, and
  // G1 - G2 is standard logistic.
  auto logistic = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  for (double gap : {0.0, 1.0, 5.0}) {
    NoiseCursor c = cursor(7);
    const Tensor phi = Tensor::vector({0.0, gap});
    constexpr int n = 100000;
    const double lambda = 0.01;
    int sharp = 0;
    for (int i = 0; i < n; ++i)
      sharp += max_component(gumbel_softmax_sample(phi, relax(RelaxationMode::GumbelSoft, lambda), c)) > 0.999;
    const double t = lambda * std::log(999.0);
    const double expected = 1.0 - (logistic(t + gap) - logistic(-t + gap));
    EXPECT_NEAR(sharp / static_cast<double>(n), expected, 4.0 * std::sqrt(expected * (1 - expected) / n)) << gap;
  }
}

TEST(GumbelSoftmax, HighTemperatureRaisesEntropy) {
  const Tensor phi = Tensor::vector({0.0, 5.0});
  auto mean_entropy = [&](double lambda) {
    NoiseCursor c = cursor(8);
    double h = 0.0;
    for (int i = 0; i < 10000; ++i)
      h += shannon_entropy(gumbel_softmax_sample(phi, relax(RelaxationMode::GumbelSoft, lambda), c).values());
    return h / 10000.0;
  };
  EXPECT_GT(mean_entropy(100.0), mean_entropy(1.0));
}

TEST(GumbelSoftmax, MonotoneInTemperature) {
  const Tensor phi = Tensor::vector({0.0, 1.0});
  double prev_max = 2.0;
  double prev_entropy = -1.0;
  for (double lambda : {0.01, 0.1, 1.0, 10.0, 100.0}) {
    NoiseCursor c = cursor(10);
    double m = 0.0;
    double h = 0.0;
    for (int i = 0; i < 10000; ++i) {
      const Tensor s = gumbel_softmax_sample(phi, relax(RelaxationMode::GumbelSoft, lambda), c);
      m += max_component(s);
      h += shannon_entropy(s.values());
    }
    EXPECT_LE(m / 10000.0, prev_max) << lambda;
    EXPECT_GT(h / 10000.0, prev_entropy) << lambda;
    prev_max = m / 10000.0;
    prev_entropy = h / 10000.0;
  }
}

TEST(GumbelSoftmax, DeterministicModesIgnoreNoiseAndTemperature) {
  const Tensor phi = Tensor::vector({0.3, -1.2, 2.0});
  const Tensor expected = softmax_values(phi);
  for (auto mode : {RelaxationMode::EvalDeterministic, RelaxationMode::PlainSoftmax}) {
    NoiseCursor a = cursor(11);
    NoiseCursor b = cursor(12);
    EXPECT_EQ(gumbel_softmax_sample(phi, relax(mode, 10.0), a), expected);
    EXPECT_EQ(gumbel_softmax_sample(phi, relax(mode, 0.5), b), expected);
  }
}

TEST(GumbelSoftmax, MatchesTemperedSoftmaxOfPerturbedLogits) {
  const Tensor phi = Tensor::vector({0.3, -1.2, 2.0});
  NoiseCursor a = cursor(13);
  NoiseCursor b = a;
  const Tensor s = gumbel_softmax_sample(phi, relax(RelaxationMode::GumbelSoft, 2.0), a);
  std::vector<double> z(3);
  for (std::size_t i = 0; i < 3; ++i) z[i] = (phi[i] + b.next_gumbel()) / 2.0;
  const std::vector<double> ref = softmax_values(z);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(s[i], ref[i], 1e-15);
}

TEST(GumbelSoftmax, TapeAndValueAgree) {
  const Tensor phi = Tensor::vector({0.3, -1.2, 2.0});
  NoiseCursor a = cursor(14);
  NoiseCursor b = a;
  Param p("phi", ParamGroup::ArchAlpha, phi);
  Tape tape;
  const Var s = ad::gumbel_softmax_sample(tape.param(p), relax(RelaxationMode::GumbelSoft, 0.7), a);
  EXPECT_EQ(s.value(), gumbel_softmax_sample(phi, relax(RelaxationMode::GumbelSoft, 0.7), b));
}

TEST(GumbelSoftmax, DifferentiableAtSeveralTemperatures) {
  for (double lambda : {0.5, 1.0, 5.0, 10.0}) {
    const NoiseCursor frozen = cursor(15);
    const double err = testing::op_gradcheck({testing::random_tensor({5}, 16, -2, 2)},
                                             [&](Tape&, std::span<const Var> v) {
                                               NoiseCursor c = frozen;
                                               return ad::gumbel_softmax_sample(
                                                   v[0], relax(RelaxationMode::GumbelSoft, lambda), c);
                                             });
    EXPECT_LT(err, 1e-6) << lambda;
  }
}

TEST(Stgs, ForwardIsExactlyOneHot) {
  NoiseCursor c = cursor(17);
  Param p("phi", ParamGroup::ArchGamma, testing::random_tensor({5}, 18, -2, 2));
  for (int i = 0; i < 200; ++i) {
    Tape tape;
    const Var z = ad::stgs_forward_backward(tape.param(p), relax(RelaxationMode::Stgs, 10.0), c);
    int ones = 0;
    for (double v : z.value().values()) {
      ASSERT_TRUE(v == 0.0 || v == 1.0);
      ones += v == 1.0;
    }
    EXPECT_EQ(ones, 1);
  }
}

TEST(Stgs, GradientEqualsSoftSampleGradient) {
  const Tensor coeffs = testing::random_tensor({4}, 19, -3, 3);
  for (double lambda : {0.5, 1.0, 10.0}) {
    const NoiseCursor frozen = cursor(20);
    Param a("a", ParamGroup::ArchAlpha, testing::random_tensor({4}, 21, -1, 1));
    Param b = a;
    {
      Tape tape;
      NoiseCursor c = frozen;
      Var z = ad::stgs_forward_backward(tape.param(a), relax(RelaxationMode::Stgs, lambda), c);
      tape.backward(ad::dot(z, tape.constant(coeffs)));
    }
    {
      Tape tape;
      NoiseCursor c = frozen;
      Var s = ad::gumbel_softmax_sample(tape.param(b), relax(RelaxationMode::GumbelSoft, lambda), c);
      tape.backward(ad::dot(s, tape.constant(coeffs)));
    }
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(a.grad[i], b.grad[i], 1e-12);
  }
}

TEST(Stgs, RequiresStgsMode) {
  NoiseCursor c = cursor(22);
  Tape tape;
  const Var phi = tape.constant(Tensor::vector({0.0, 1.0}));
  EXPECT_THROW(ad::stgs_forward_backward(phi, relax(RelaxationMode::GumbelSoft, 1.0), c), ContractError);
}

TEST(Stgs, OneHotFrequenciesMatchSoftmaxOfLogits) {
  NoiseCursor c = cursor(23);
  const Tensor phi = Tensor::vector({0.5, -0.3, 1.1, 0.0});
  const Tensor probs = softmax_values(phi);
  std::vector<std::size_t> counts(4, 0);
  for (int i = 0; i < 100000; ++i) {
    Tape tape;
    const Var z = ad::stgs_forward_backward(tape.constant(phi), relax(RelaxationMode::Stgs, 10.0), c);
    ++counts[argmax(z.value().values())];
  }
  EXPECT_GT(testing::chi_square(counts, probs.values()).p_value, 0.01);
}

TEST(MultiSample, SingleSampleIsBitwiseIdentical) {
  const Tensor phi = Tensor::vector({0.3, -1.2, 2.0});
  for (auto mode : {RelaxationMode::Stgs, RelaxationMode::GumbelSoft}) {
    const NoiseCursor frozen = cursor(24);
    Tape tape;
    const Var v = tape.constant(phi);
    NoiseCursor c1 = frozen;
    NoiseCursor c2 = frozen;
    const Var avg = ad::multi_sample_average(v, relax(mode, 3.0, 1), c1);
    const Var single = mode == RelaxationMode::Stgs ? ad::stgs_forward_backward(v, relax(mode, 3.0), c2)
                                                    : ad::gumbel_softmax_sample(v, relax(mode, 3.0), c2);
    EXPECT_EQ(avg.value(), single.value());
    EXPECT_EQ(c1.position(), c2.position());
  }
}

TEST(MultiSample, LargeMConvergesToCategorical) {
  NoiseCursor c = cursor(25);
  Tape tape;
  const Var avg =
      ad::multi_sample_average(tape.constant(Tensor::vector({0.0, 0.0})), relax(RelaxationMode::Stgs, 10.0, 10000), c);
  EXPECT_NEAR(avg.value()[0], 0.5, 0.02);
  EXPECT_NEAR(avg.value()[1], 0.5, 0.02);
}

TEST(MultiSample, StaysOnSimplex) {
  NoiseCursor c = cursor(26);
  const Tensor phi = testing::random_tensor({7}, 27, -3, 3);
  for (int m : {1, 2, 5, 15, 64}) {
    for (auto mode : {RelaxationMode::Stgs, RelaxationMode::GumbelSoft}) {
      Tape tape;
      EXPECT_LT(simplex_gap(ad::multi_sample_average(tape.constant(phi), relax(mode, 1.0, m), c).value()), 1e-12);
    }
  }
}

TEST(MultiSample, SoftAverageGradientMatchesFiniteDifferences) {
  for (double lambda : {0.5, 1.0, 5.0, 10.0}) {
    const NoiseCursor frozen = cursor(28);
    const double err = testing::op_gradcheck({testing::random_tensor({5}, 29, -2, 2)},
                                             [&](Tape&, std::span<const Var> v) {
                                               NoiseCursor c = frozen;
                                               return ad::multi_sample_average(
                                                   v[0], relax(RelaxationMode::GumbelSoft, lambda, 15), c);
                                             });
    EXPECT_LT(err, 1e-6) << lambda;
  }
}

TEST(MultiSample, StgsAverageBackpropagatesSoftAverage) {
  const Tensor coeffs = testing::random_tensor({4}, 30, -3, 3);
  const NoiseCursor frozen = cursor(31);
  Param a("a", ParamGroup::ArchGamma, testing::random_tensor({4}, 32, -1, 1));
  Param b = a;
  {
    Tape tape;
    NoiseCursor c = frozen;
    tape.backward(ad::dot(ad::multi_sample_average(tape.param(a), relax(RelaxationMode::Stgs, 10.0, 15), c),
                          tape.constant(coeffs)));
  }
  {
    Tape tape;
    NoiseCursor c = frozen;
    tape.backward(ad::dot(ad::multi_sample_average(tape.param(b), relax(RelaxationMode::GumbelSoft, 10.0, 15), c),
                          tape.constant(coeffs)));
  }
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(a.grad[i], b.grad[i], 1e-12);
}

TEST(MultiSample, AverageOfStgsSamplesIsMultipleOfOneOverM) {
  NoiseCursor c = cursor(33);
  Tape tape;
  const Var avg = ad::multi_sample_average(tape.constant(Tensor::vector({0.0, 0.4, -0.2})),
                                           relax(RelaxationMode::Stgs, 10.0, 15), c);
  for (double v : avg.value().values()) EXPECT_NEAR(v * 15.0, std::round(v * 15.0), 1e-12);
}

TEST(RelaxationConfig, Validation) {
  EXPECT_THROW(relax(RelaxationMode::Stgs, 0.0).validate(), ContractError);
  EXPECT_THROW(relax(RelaxationMode::Stgs, -1.0).validate(), ContractError);
  EXPECT_THROW(relax(RelaxationMode::Stgs, 1.0, 0).validate(), ContractError);
  EXPECT_NO_THROW(relax(RelaxationMode::Stgs, 10.0, 15).validate());
  const RelaxationConfig defaults;
  EXPECT_EQ(defaults.temperature, 10.0);
  EXPECT_EQ(defaults.samples, 15);
  EXPECT_EQ(defaults.mode, RelaxationMode::Stgs);
}

TEST(RelaxationConfig, ModeNamesRoundTrip) {
  for (auto m : {RelaxationMode::Stgs, RelaxationMode::PlainSoftmax, RelaxationMode::EvalDeterministic,
                 RelaxationMode::GumbelSoft})
    EXPECT_EQ(relaxation_mode_from_string(to_string(m)), m);
  EXPECT_THROW(relaxation_mode_from_string("annealed"), ContractError);
}

TEST(StableHash, IsFnv1a) {
  EXPECT_EQ(stable_hash(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(stable_hash("a"), 0xaf63dc4c8601ec8cULL);
}

}  // namespace
}  // namespace stgsnas
