#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "jesbo/gauss_math.hpp"
#include "oracles.hpp"

using namespace jesbo;

TEST(StdNormal, ValuesAtZero) {
  const auto [pdf, cdf] = std_normal(0.0);
  EXPECT_NEAR(pdf, 0.3989423, 1e-7);
  EXPECT_DOUBLE_EQ(cdf, 0.5);
}

TEST(StdNormal, UpperTailLimit) {
  const auto [pdf, cdf] = std_normal(40.0);
  EXPECT_LT(pdf, 1e-300);
  EXPECT_NEAR(cdf, 1.0, 1e-15);
}

TEST(StdNormal, Symmetry) {
  for (double z = -8.0; z <= 8.0; z += 0.137) EXPECT_NEAR(std_normal_cdf(z) + std_normal_cdf(-z), 1.0, 1e-12);
}

TEST(StdNormal, LogCdfMatchesDirectAndContinuesPastUnderflow) {
  for (double z : {-3.0, -5.9, -6.0, -6.1, -10.0, -30.0})
    EXPECT_NEAR(log_std_normal_cdf(z), std::log(std_normal_cdf(z)), 1e-10 * std::abs(std::log(std_normal_cdf(z))));
  // Phi(-40) underflows in double precision; the tail branch stays finite.
  const double v = log_std_normal_cdf(-40.0);
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_NEAR(v, -0.5 * 1600.0 - 0.5 * std::log(2.0 * std::numbers::pi) - std::log(40.0), 1e-3);
}

TEST(TruncatedMoments, HalfStandardNormal) {
  const TruncatedMoments m = truncated_moments(0.0, 1.0, 0.0);
  EXPECT_NEAR(m.mean, -0.7978846, 1e-7);
  EXPECT_NEAR(m.variance, 0.3633802, 1e-7);
  EXPECT_NEAR(m.log_mass, std::log(0.5), 1e-15);
}

TEST(TruncatedMoments, ScaledAndShifted) {
  const TruncatedMoments m = truncated_moments(2.0, 4.0, 2.0);
  EXPECT_NEAR(m.mean, 0.4042308, 1e-7);
  EXPECT_NEAR(m.variance, 1.4535209, 1e-7);
}

TEST(TruncatedMoments, NegligibleTruncation) {
  const TruncatedMoments m = truncated_moments(1.5, 2.0, 1.5 + 10.0 * std::sqrt(2.0));
  EXPECT_NEAR(m.mean, 1.5, 1e-8);
  EXPECT_NEAR(m.variance, 2.0, 1e-8);
}

TEST(TruncatedMoments, RejectsNonPositiveVariance) {
  EXPECT_THROW(truncated_moments(0.0, 0.0, 1.0), std::invalid_argument);
  EXPECT_THROW(truncated_moments(0.0, -1.0, 1.0), std::invalid_argument);
}

TEST(TruncatedMoments, MatchesQuadratureOracle) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> mu_d(-5.0, 5.0);
  std::uniform_real_distribution<double> logvar_d(std::log(1e-3), std::log(1e3));
  std::uniform_real_distribution<double> beta_d(-6.0, 6.0);
  for (int i = 0; i < 60; ++i) {
    const double mu = mu_d(rng);
    const double var = std::exp(logvar_d(rng));
    const double upper = mu + beta_d(rng) * std::sqrt(var);
    const TruncatedMoments m = truncated_moments(mu, var, upper);
    const oracle::Moments ref = oracle::truncated_normal_quadrature(mu, var, upper);
    EXPECT_NEAR(m.mean, ref.mean, 1e-6 * std::max(std::abs(ref.mean), std::sqrt(var)));
    EXPECT_NEAR(m.variance, ref.variance, 1e-6 * ref.variance);
  }
}

TEST(TruncatedMoments, DeepTruncationBranch) {
  // Continuous across the branch switch at beta = -6.
  const TruncatedMoments a = truncated_moments(0.0, 1.0, -6.0 + 1e-12);
  const TruncatedMoments b = truncated_moments(0.0, 1.0, -6.0 - 1e-12);
  EXPECT_NEAR(a.mean, b.mean, 1e-9);
  EXPECT_NEAR(a.variance, b.variance, 1e-9 * a.variance);
  for (double beta : {-8.0, -15.0, -30.0}) {
    const TruncatedMoments m = truncated_moments(0.0, 1.0, beta);
    const oracle::Moments ref = oracle::truncated_normal_quadrature(0.0, 1.0, beta);
    EXPECT_NEAR(m.mean, ref.mean, 1e-8 * std::abs(ref.mean));
    EXPECT_NEAR(m.variance, ref.variance, 1e-6 * ref.variance);
  }
  // Far beyond double-precision underflow of Phi: exponential-tail limit.
  const TruncatedMoments far = truncated_moments(0.0, 1.0, -1e4);
  EXPECT_NEAR(far.variance * 1e8, 1.0, 1e-6);
  EXPECT_NEAR(far.mean, -1e4 - 1e-4, 1e-9);
}

TEST(TruncatedMoments, VarianceMonotoneInBound) {
  double prev = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 100; ++i) {
    const double upper = 6.0 - 0.12 * i;  // decreasing bound
    const double v = truncated_moments(0.0, 1.0, upper).variance;
    EXPECT_LE(v, prev + 1e-15);
    EXPECT_LE(v, 1.0);
    prev = v;
  }
}

TEST(TruncatedMoments, MeanBelowBound) {
  for (double upper = -20.0; upper <= 5.0; upper += 0.5) EXPECT_LE(truncated_moments(0.3, 2.0, upper).mean, upper);
}

TEST(GaussianEntropy, ClosedFormValues) {
  EXPECT_NEAR(gaussian_entropy(1.0), 1.4189385, 1e-7);
  EXPECT_NEAR(gaussian_entropy(std::exp(2.0)), 1.4189385 + 1.0, 1e-7);
  EXPECT_NEAR(gaussian_entropy(3.0) - gaussian_entropy(1.5), 0.3465736, 1e-7);
  EXPECT_THROW(gaussian_entropy(0.0), std::invalid_argument);
  double prev = -std::numeric_limits<double>::infinity();
  for (double v = 1e-6; v < 1e6; v *= 1.7) {
    EXPECT_GT(gaussian_entropy(v), prev);
    prev = gaussian_entropy(v);
  }
}

TEST(McTruncationEntropy, NoTruncationNoNoise) {
  const EntropyEstimate e = mc_truncation_entropy(0.5, 2.0, 0.0, std::numeric_limits<double>::infinity(), 50000, 1);
  EXPECT_NEAR(e.entropy, gaussian_entropy(2.0), 3.0 * e.std_err);
}

TEST(McTruncationEntropy, PureNoise) {
  const EntropyEstimate e = mc_truncation_entropy(0.0, 1e-12, 1.0, 0.0, 50000, 2);
  EXPECT_NEAR(e.entropy, gaussian_entropy(1.0), 3.0 * e.std_err);
}

TEST(McTruncationEntropy, NoiselessTruncationMatchesQuadrature) {
  const EntropyEstimate e = mc_truncation_entropy(0.0, 1.0, 0.0, -1.0, 100000, 3);
  EXPECT_NEAR(e.entropy, oracle::truncated_normal_entropy_quadrature(0.0, 1.0, -1.0), 3.0 * e.std_err);
}

TEST(McTruncationEntropy, MomentMatchingUnderestimatesReduction) {
  const EntropyEstimate e = mc_truncation_entropy(0.0, 1.0, 1.0, 0.0, 200000, 4);
  const double mm = gaussian_entropy(truncated_moments(0.0, 1.0, 0.0).variance + 1.0);
  // Moment matching gives the larger entropy, i.e. the smaller reduction.
  EXPECT_GE(mm, e.entropy - 3.0 * e.std_err);
  EXPECT_LE(mm, e.entropy + 3.0 * e.std_err + 0.01);
}

TEST(McTruncationEntropy, DeterministicGivenSeed) {
  const EntropyEstimate a = mc_truncation_entropy(0.0, 1.0, 0.1, 0.2, 5000, 9);
  const EntropyEstimate b = mc_truncation_entropy(0.0, 1.0, 0.1, 0.2, 5000, 9);
  EXPECT_EQ(a.entropy, b.entropy);
  EXPECT_EQ(a.std_err, b.std_err);
  EXPECT_THROW(mc_truncation_entropy(0.0, 1.0, 0.1, 0.2, 999, 9), std::invalid_argument);
}
