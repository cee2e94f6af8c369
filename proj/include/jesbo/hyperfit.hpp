// Kernel hyperparameter selection: fixed (known) parameters, MAP-II with
// log-normal priors via restarted Nelder-Mead in log space, or an ensemble of
// MAP solutions restarted from prior samples.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "jesbo/gp.hpp"

namespace jesbo {

enum class HyperMode { Fixed, Map, Ensemble };

struct HyperFitConfig {
  HyperMode mode = HyperMode::Map;
  std::optional<KernelParams> fixed;  // required in Fixed mode
  int n_restarts = 5;
  int n_sets = 1;  // ensemble size S
  int max_evals = 400;
  double prior_log_sd = 1.0;
};

struct HyperFitResult {
  std::vector<KernelParams> sets;
  std::vector<std::string> warnings;
};

struct NelderMeadResult {
  Vector x;
  double value;
  int evals;
};

/// Minimize `f` with the Nelder-Mead simplex method.
inline NelderMeadResult nelder_mead(const std::function<double(const Vector&)>& f, const Vector& start,
                                    double step, int max_evals, double tol = 1e-9) {
  const Eigen::Index n = start.size();
  std::vector<Vector> simplex(static_cast<std::size_t>(n + 1), start);
  std::vector<double> values(static_cast<std::size_t>(n + 1));
  int evals = 0;
  auto eval = [&](const Vector& x) {
    ++evals;
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };
  for (Eigen::Index i = 0; i < n; ++i) simplex[static_cast<std::size_t>(i + 1)][i] += step;
  for (std::size_t i = 0; i < simplex.size(); ++i) values[i] = eval(simplex[i]);

  std::vector<std::size_t> order(simplex.size());
  while (evals < max_evals) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second = order[order.size() - 2];
    if (std::abs(values[worst] - values[best]) <= tol * (1.0 + std::abs(values[best]))) break;

    Vector centroid = Vector::Zero(n);
    for (std::size_t i = 0; i < simplex.size(); ++i)
      if (i != worst) centroid += simplex[i];
    centroid /= static_cast<double>(n);

    const Vector reflected = centroid + (centroid - simplex[worst]);
    const double fr = eval(reflected);
    if (fr < values[best]) {
      const Vector expanded = centroid + 2.0 * (centroid - simplex[worst]);
      const double fe = eval(expanded);
      if (fe < fr) {
        simplex[worst] = expanded;
        values[worst] = fe;
      } else {
        simplex[worst] = reflected;
        values[worst] = fr;
      }
      continue;
    }
    if (fr < values[second]) {
      simplex[worst] = reflected;
      values[worst] = fr;
      continue;
    }
    const bool outside = fr < values[worst];
    const Vector contracted =
        outside ? Vector(centroid + 0.5 * (reflected - centroid)) : Vector(centroid + 0.5 * (simplex[worst] - centroid));
    const double fc = eval(contracted);
    if (fc < std::min(fr, values[worst])) {
      simplex[worst] = contracted;
      values[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i < simplex.size(); ++i) {
      if (i == best) continue;
      simplex[i] = simplex[best] + 0.5 * (simplex[i] - simplex[best]);
      values[i] = eval(simplex[i]);
    }
  }
  const auto it = std::min_element(values.begin(), values.end());
  const auto idx = static_cast<std::size_t>(it - values.begin());
  return {simplex[idx], *it, evals};
}

namespace detail {

struct LogPrior {
  Vector median_log;  // [log theta_1..D, log sigma^2, log noise]
  double sd;
  double noise_floor;

  double log_density(const Vector& p) const { return -0.5 * ((p - median_log) / sd).squaredNorm(); }

  KernelParams unpack(const Vector& p) const {
    const Eigen::Index dim = p.size() - 2;
    KernelParams kp;
    kp.length_scales = p.head(dim).array().exp();
    kp.output_scale = std::exp(p[dim]);
    kp.noise_variance = std::max(noise_floor, std::exp(p[dim + 1]));
    return kp;
  }
};

inline LogPrior make_prior(const std::vector<Observation>& data, const Bounds& bounds, double sd) {
  const Eigen::Index dim = bounds.dim();
  double mean = 0.0;
  for (const auto& o : data) mean += o.y;
  mean /= static_cast<double>(data.size());
  double var = 0.0;
  for (const auto& o : data) var += (o.y - mean) * (o.y - mean);
  var /= static_cast<double>(std::max<std::size_t>(1, data.size() - 1));
  if (!(var > 1e-12)) var = 1.0;

  LogPrior prior;
  prior.median_log.resize(dim + 2);
  const Vector range = bounds.range();
  for (Eigen::Index d = 0; d < dim; ++d) prior.median_log[d] = std::log(0.3 * (range[d] > 0 ? range[d] : 1.0));
  prior.median_log[dim] = std::log(var);
  prior.median_log[dim + 1] = std::log(0.01 * var);
  prior.sd = sd;
  prior.noise_floor = 1e-6 * var;
  return prior;
}

}  // namespace detail

/// Negative log posterior of log-parameters under the MAP-II objective.
inline double neg_log_posterior(const std::vector<Observation>& data, const detail::LogPrior& prior,
                                const Vector& p) {
  // Keep the search inside +-8 prior standard deviations.
  if (((p - prior.median_log).array().abs() > 8.0 * prior.sd).any()) return std::numeric_limits<double>::infinity();
  const KernelParams kp = prior.unpack(p);
  std::vector<Observation> obs = data;
  for (auto& o : obs) o.noise_variance = kp.noise_variance;
  try {
    return -log_marginal_likelihood(std::move(obs), kp) - prior.log_density(p);
  } catch (const std::runtime_error&) {
    return std::numeric_limits<double>::infinity();
  }
}

inline HyperFitResult fit_hyperparameters(const std::vector<Observation>& data, const Bounds& bounds,
                                          const HyperFitConfig& config, std::uint64_t seed) {
  HyperFitResult result;
  if (config.mode == HyperMode::Fixed) {
    if (!config.fixed) throw std::invalid_argument("fit_hyperparameters: fixed mode requires parameters");
    result.sets.push_back(*config.fixed);
    return result;
  }
  if (data.size() < 2) throw std::invalid_argument("fit_hyperparameters: need at least 2 observations");

  const detail::LogPrior prior = detail::make_prior(data, bounds, config.prior_log_sd);
  auto objective = [&](const Vector& p) { return neg_log_posterior(data, prior, p); };

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto prior_sample = [&]() {
    Vector p = prior.median_log;
    for (Eigen::Index i = 0; i < p.size(); ++i) p[i] += prior.sd * normal(rng);
    return p;
  };

  const int restarts = std::max(1, config.n_restarts);
  NelderMeadResult best{prior.median_log, std::numeric_limits<double>::infinity(), 0};
  for (int r = 0; r < restarts; ++r) {
    const Vector start = r == 0 ? prior.median_log : prior_sample();
    const NelderMeadResult run = nelder_mead(objective, start, 0.5, config.max_evals);
    if (run.value < best.value) best = run;
  }
  if (!std::isfinite(best.value)) {
    result.warnings.push_back("hyperparameter optimization diverged; using prior medians");
    result.sets.push_back(prior.unpack(prior.median_log));
    return result;
  }
  result.sets.push_back(prior.unpack(best.x));

  if (config.mode == HyperMode::Ensemble) {
    for (int s = 1; s < config.n_sets; ++s) {
      const NelderMeadResult run = nelder_mead(objective, prior_sample(), 0.5, config.max_evals);
      if (std::isfinite(run.value)) {
        result.sets.push_back(prior.unpack(run.x));
      } else {
        result.warnings.push_back("ensemble member " + std::to_string(s) + " diverged; reusing MAP set");
        result.sets.push_back(result.sets.front());
      }
    }
  }
  return result;
}

}  // namespace jesbo
