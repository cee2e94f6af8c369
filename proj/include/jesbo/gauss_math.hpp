// Scalar Gaussian utilities: standard normal pdf/cdf, moments of an
// upper-truncated Gaussian, Gaussian differential entropy, and a Monte Carlo
// estimator for the entropy of a truncated Gaussian plus independent noise.
//
// All entropies are in nats.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>

namespace jesbo {

inline constexpr double kInvSqrt2Pi = 0.3989422804014326779399460599343819;
inline constexpr double kLog2Pi = 1.8378770664093454835606594728112353;

struct StdNormal {
  double pdf;
  double cdf;
};

inline double std_normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

inline double std_normal_cdf(double z) { return 0.5 * std::erfc(-z * std::numbers::sqrt2 / 2.0); }

inline StdNormal std_normal(double z) { return {std_normal_pdf(z), std_normal_cdf(z)}; }

namespace detail {

// Laplace continued fraction tail for the inverse Mills ratio at x = -beta > 0:
//   phi(x) / Phi(-x) = x + 1 / (x + c),   c = 2 / (x + 3 / (x + 4 / (x + ...))).
// Converges quickly for x >= 6; evaluated by backward recurrence.
inline double mills_tail(double x) {
  constexpr int kDepth = 80;
  double t = 0.0;
  for (int k = kDepth; k >= 2; --k) t = k / (x + t);
  return t;
}

}  // namespace detail

/// log Phi(z), accurate far into the lower tail.
inline double log_std_normal_cdf(double z) {
  if (z >= -6.0) return std::log(std_normal_cdf(z));
  const double x = -z;
  const double lambda = x + 1.0 / (x + detail::mills_tail(x));
  return -0.5 * z * z - 0.5 * kLog2Pi - std::log(lambda);
}

/// Moments of N(mu, var) conditioned on f <= upper.
struct TruncatedMoments {
  double mean;
  double variance;
  double log_mass;  // log Phi(beta)
};

/// With beta = (upper - mu) / sigma and lambda = phi(beta) / Phi(beta):
/// mean = mu - sigma * lambda, variance = var * (1 - beta * lambda - lambda^2).
/// Below beta = -6 the continued-fraction form of the Mills ratio is used so
/// that neither Phi underflow nor the cancellation in the variance factor
/// degrades the result.
inline TruncatedMoments truncated_moments(double mu, double var, double upper) {
  if (!(var > 0.0)) throw std::invalid_argument("truncated_moments: variance must be positive");
  const double sigma = std::sqrt(var);
  if (upper == std::numeric_limits<double>::infinity()) return {mu, var, 0.0};
  const double beta = (upper - mu) / sigma;

  double lambda = 0.0;
  double factor = 1.0;
  double log_mass = 0.0;
  if (beta >= -6.0) {
    const auto [pdf, cdf] = std_normal(beta);
    lambda = pdf / cdf;
    factor = 1.0 - beta * lambda - lambda * lambda;
    log_mass = std::log(cdf);
  } else {
    const double x = -beta;
    const double c = detail::mills_tail(x);
    const double delta = 1.0 / (x + c);
    lambda = x + delta;
    // 1 + x*lambda - lambda^2 rewritten as c / (x + c) - delta^2.
    factor = c / (x + c) - delta * delta;
    log_mass = -0.5 * beta * beta - 0.5 * kLog2Pi - std::log(lambda);
  }
  factor = std::clamp(factor, 0.0, 1.0);
  return {mu - sigma * lambda, var * factor, log_mass};
}

/// Differential entropy of N(., var), 0.5 * ln(2 pi e var).
inline double gaussian_entropy(double var) {
  if (!(var > 0.0)) throw std::invalid_argument("gaussian_entropy: variance must be positive");
  return 0.5 * (kLog2Pi + 1.0 + std::log(var));
}

struct EntropyEstimate {
  double entropy;
  double std_err;
};

/// Monte Carlo estimate of H[y] for y = f + eps, f ~ N(mu, var_f) truncated
/// above at `upper`, eps ~ N(0, var_noise). Samples y exactly and averages
/// -log p(y), where p is the exact convolution density
///   p(y) = N(y; mu, var_f + var_noise) * Phi((upper - m(y)) / s) / Phi(beta),
/// m(y) and s^2 being the moments of f given y before truncation.
inline EntropyEstimate mc_truncation_entropy(double mu, double var_f, double var_noise, double upper,
                                             std::size_t n_samples, std::uint64_t seed) {
  if (n_samples < 1000) throw std::invalid_argument("mc_truncation_entropy: need at least 1000 samples");
  if (!(var_f > 0.0) || var_noise < 0.0)
    throw std::invalid_argument("mc_truncation_entropy: invalid variances");

  const double sd_f = std::sqrt(var_f);
  const double sd_noise = std::sqrt(var_noise);
  const bool truncated = std::isfinite(upper);
  const double beta = truncated ? (upper - mu) / sd_f : std::numeric_limits<double>::infinity();
  const double log_mass = truncated ? log_std_normal_cdf(beta) : 0.0;
  const double mass = std::exp(log_mass);
  const boost::math::normal unit;

  const double var_y = var_f + var_noise;
  const double gain = var_f / var_y;
  const double sd_cond = std::sqrt(var_f * var_noise / var_y);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    double u = uniform(rng);
    while (u <= 0.0) u = uniform(rng);
    const double z = truncated ? boost::math::quantile(unit, u * mass) : boost::math::quantile(unit, u);
    const double f = mu + sd_f * z;
    const double y = f + sd_noise * normal(rng);

    double log_p = 0.0;
    if (var_noise == 0.0) {
      log_p = -0.5 * z * z - 0.5 * kLog2Pi - std::log(sd_f) - log_mass;
    } else {
      const double r = (y - mu) / std::sqrt(var_y);
      log_p = -0.5 * r * r - 0.5 * kLog2Pi - 0.5 * std::log(var_y);
      if (truncated) {
        const double m_cond = mu + gain * (y - mu);
        log_p += log_std_normal_cdf((upper - m_cond) / sd_cond) - log_mass;
      }
    }
    sum += -log_p;
    sum_sq += log_p * log_p;
  }
  const double n = static_cast<double>(n_samples);
  const double mean = sum / n;
  const double var = std::max(0.0, sum_sq / n - mean * mean) * n / (n - 1.0);
  return {mean, std::sqrt(var / n)};
}

}  // namespace jesbo
