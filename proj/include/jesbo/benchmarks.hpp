// Benchmark objectives: GP-sample tasks drawn from a fixed random Fourier
// feature expansion, standard synthetic test functions (negated so that every
// task is a maximization problem), noisy observation, a dense-search optimum
// oracle, and regret computation.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jesbo/gp.hpp"
#include "jesbo/maximize.hpp"
#include "jesbo/rff.hpp"

namespace jesbo {

enum class SyntheticFunction { Branin, Hartmann3, Hartmann6, Levy8, Michalewicz10 };

struct Task {
  std::string name;
  Bounds bounds;
  std::function<double(const Vector&)> noiseless_eval;
  std::function<Vector(const Matrix&)> noiseless_batch;
  double noise_variance = 0.0;
  OptPair true_opt{Vector(), -std::numeric_limits<double>::infinity()};
  std::optional<KernelParams> kernel_params;  // generator parameters of GP-sample tasks
  nlohmann::json descriptor;

  Eigen::Index dim() const { return bounds.dim(); }

  Vector eval_batch(const Matrix& pts) const {
    if (noiseless_batch) return noiseless_batch(pts);
    Vector v(pts.cols());
    for (Eigen::Index i = 0; i < pts.cols(); ++i) v[i] = noiseless_eval(Vector(pts.col(i)));
    return v;
  }
};

// ---------------------------------------------------------------------------
// GP-sample tasks

/// Generator parameters per dimension: theta_d, sigma^2 = 10, noise 0.01.
inline KernelParams gp_sample_params(int dimension) {
  double theta = 0.0;
  switch (dimension) {
    case 2: theta = 0.1; break;
    case 4: theta = 0.2; break;
    case 6: theta = 0.3; break;
    case 12: theta = 0.6; break;
    default:
      throw std::invalid_argument("gp-sample task: unsupported dimension " + std::to_string(dimension) +
                                  " (supported: 2, 4, 6, 12)");
  }
  return KernelParams::isotropic(dimension, theta, 10.0, 0.01);
}

inline constexpr Eigen::Index kGpSampleFeatures = 1024;
inline constexpr Eigen::Index kDefaultOracleBudget = 100000;

struct OracleOptions {
  Eigen::Index budget = kDefaultOracleBudget;
  int top_k = 10;
  int refine_rounds = 30;
};

OptPair estimate_true_optimum(const Task& task, const OracleOptions& opts, std::uint64_t seed);

/// A fixed prior draw from the RFF approximation of the SE kernel on [0,1]^D.
/// `noise_variance` overrides the generator's 0.01 when given.
inline Task make_gp_sample_task(int dimension, std::uint64_t seed, std::optional<double> noise_variance = std::nullopt,
                                Eigen::Index oracle_budget = kDefaultOracleBudget) {
  KernelParams params = gp_sample_params(dimension);
  if (noise_variance) {
    if (*noise_variance < 0.0) throw std::invalid_argument("gp-sample task: negative noise variance");
    params.noise_variance = *noise_variance;
  }
  const RFFBasis basis = draw_rff_basis(params, kGpSampleFeatures, derive_seed(seed, 0x6770, 1));
  auto path = std::make_shared<const SamplePath>(draw_sample_path(basis, {}, 0.0, derive_seed(seed, 0x6770, 2)));

  Task task;
  task.name = "gp_sample_d" + std::to_string(dimension);
  task.bounds = Bounds::unit_cube(dimension);
  task.noiseless_eval = [path](const Vector& x) { return (*path)(x); };
  task.noiseless_batch = [path](const Matrix& pts) { return path->values(pts); };
  task.noise_variance = params.noise_variance;
  task.kernel_params = params;
  task.descriptor = {{"kind", "gp_sample"}, {"dimension", dimension}, {"seed", seed},
                     {"noise_variance", params.noise_variance}};
  OracleOptions oracle;
  oracle.budget = oracle_budget;
  task.true_opt = estimate_true_optimum(task, oracle, derive_seed(seed, 0x6770, 3));
  return task;
}

// ---------------------------------------------------------------------------
// Synthetic functions (standard minimization forms)

namespace synthetic {

inline double branin(const Vector& x) {
  constexpr double pi = std::numbers::pi;
  const double a = 1.0;
  const double b = 5.1 / (4.0 * pi * pi);
  const double c = 5.0 / pi;
  const double r = 6.0;
  const double s = 10.0;
  const double t = 1.0 / (8.0 * pi);
  const double term = x[1] - b * x[0] * x[0] + c * x[0] - r;
  return a * term * term + s * (1.0 - t) * std::cos(x[0]) + s;
}

inline constexpr std::array<double, 4> kHartmannAlpha{1.0, 1.2, 3.0, 3.2};

inline double hartmann3(const Vector& x) {
  static constexpr double a[4][3] = {{3.0, 10.0, 30.0}, {0.1, 10.0, 35.0}, {3.0, 10.0, 30.0}, {0.1, 10.0, 35.0}};
  static constexpr double p[4][3] = {
      {0.3689, 0.1170, 0.2673}, {0.4699, 0.4387, 0.7470}, {0.1091, 0.8732, 0.5547}, {0.0381, 0.5743, 0.8828}};
  double total = 0.0;
  for (int i = 0; i < 4; ++i) {
    double inner = 0.0;
    for (int j = 0; j < 3; ++j) inner += a[i][j] * (x[j] - p[i][j]) * (x[j] - p[i][j]);
    total += kHartmannAlpha[static_cast<std::size_t>(i)] * std::exp(-inner);
  }
  return -total;
}

inline double hartmann6(const Vector& x) {
  static constexpr double a[4][6] = {{10.0, 3.0, 17.0, 3.5, 1.7, 8.0},
                                     {0.05, 10.0, 17.0, 0.1, 8.0, 14.0},
                                     {3.0, 3.5, 1.7, 10.0, 17.0, 8.0},
                                     {17.0, 8.0, 0.05, 10.0, 0.1, 14.0}};
  static constexpr double p[4][6] = {{0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886},
                                     {0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991},
                                     {0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650},
                                     {0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381}};
  double total = 0.0;
  for (int i = 0; i < 4; ++i) {
    double inner = 0.0;
    for (int j = 0; j < 6; ++j) inner += a[i][j] * (x[j] - p[i][j]) * (x[j] - p[i][j]);
    total += kHartmannAlpha[static_cast<std::size_t>(i)] * std::exp(-inner);
  }
  return -total;
}

inline double levy(const Vector& x) {
  constexpr double pi = std::numbers::pi;
  const Eigen::Index d = x.size();
  auto w = [&](Eigen::Index i) { return 1.0 + (x[i] - 1.0) / 4.0; };
  double total = std::pow(std::sin(pi * w(0)), 2);
  for (Eigen::Index i = 0; i + 1 < d; ++i) {
    const double wi = w(i);
    total += (wi - 1.0) * (wi - 1.0) * (1.0 + 10.0 * std::pow(std::sin(pi * wi + 1.0), 2));
  }
  const double wd = w(d - 1);
  total += (wd - 1.0) * (wd - 1.0) * (1.0 + std::pow(std::sin(2.0 * pi * wd), 2));
  return total;
}

inline double michalewicz(const Vector& x, int m = 10) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    total += std::sin(xi) * std::pow(std::sin(static_cast<double>(i + 1) * xi * xi / std::numbers::pi), 2 * m);
  }
  return -total;
}

}  // namespace synthetic

inline std::string to_string(SyntheticFunction fn) {
  switch (fn) {
    case SyntheticFunction::Branin: return "branin";
    case SyntheticFunction::Hartmann3: return "hartmann3";
    case SyntheticFunction::Hartmann6: return "hartmann6";
    case SyntheticFunction::Levy8: return "levy8";
    case SyntheticFunction::Michalewicz10: return "michalewicz10";
  }
  return "unknown";
}

inline SyntheticFunction synthetic_from_string(const std::string& name) {
  for (auto fn : {SyntheticFunction::Branin, SyntheticFunction::Hartmann3, SyntheticFunction::Hartmann6,
                  SyntheticFunction::Levy8, SyntheticFunction::Michalewicz10})
    if (to_string(fn) == name) return fn;
  throw std::invalid_argument("unknown synthetic function '" + name + "'");
}

inline Bounds synthetic_bounds(SyntheticFunction fn) {
  switch (fn) {
    case SyntheticFunction::Branin: return {Vector{{-5.0, 0.0}}, Vector{{10.0, 15.0}}};
    case SyntheticFunction::Hartmann3: return Bounds::unit_cube(3);
    case SyntheticFunction::Hartmann6: return Bounds::unit_cube(6);
    case SyntheticFunction::Levy8: return {Vector::Constant(8, -10.0), Vector::Constant(8, 10.0)};
    case SyntheticFunction::Michalewicz10: return {Vector::Zero(10), Vector::Constant(10, std::numbers::pi)};
  }
  throw std::invalid_argument("synthetic_bounds: unknown function");
}

/// Standard minimization value of the named function.
inline double synthetic_minimization_value(SyntheticFunction fn, const Vector& x) {
  const Bounds b = synthetic_bounds(fn);
  if (!b.contains(x, 1e-12))
    throw std::invalid_argument("synthetic_eval: point outside the domain of " + to_string(fn));
  switch (fn) {
    case SyntheticFunction::Branin: return synthetic::branin(x);
    case SyntheticFunction::Hartmann3: return synthetic::hartmann3(x);
    case SyntheticFunction::Hartmann6: return synthetic::hartmann6(x);
    case SyntheticFunction::Levy8: return synthetic::levy(x);
    case SyntheticFunction::Michalewicz10: return synthetic::michalewicz(x);
  }
  throw std::invalid_argument("synthetic_eval: unknown function");
}

/// Maximization value (the negated standard value).
inline double synthetic_eval(SyntheticFunction fn, const Vector& x) { return -synthetic_minimization_value(fn, x); }

/// Published minimizers, used to seed the optimum oracle.
inline std::optional<Vector> synthetic_known_minimizer(SyntheticFunction fn) {
  switch (fn) {
    case SyntheticFunction::Branin: return Vector{{std::numbers::pi, 2.275}};
    case SyntheticFunction::Hartmann3: return Vector{{0.114614, 0.555649, 0.852547}};
    case SyntheticFunction::Hartmann6: return Vector{{0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573}};
    case SyntheticFunction::Levy8: return Vector::Ones(8);
    case SyntheticFunction::Michalewicz10: return std::nullopt;
  }
  return std::nullopt;
}

inline constexpr double kDefaultSyntheticNoise = 0.01;

inline Task make_synthetic_task(SyntheticFunction fn, double noise_variance = kDefaultSyntheticNoise,
                                Eigen::Index oracle_budget = kDefaultOracleBudget, std::uint64_t oracle_seed = 0) {
  if (noise_variance < 0.0) throw std::invalid_argument("synthetic task: negative noise variance");
  Task task;
  task.name = to_string(fn);
  task.bounds = synthetic_bounds(fn);
  const Bounds bounds = task.bounds;
  task.noiseless_eval = [fn, bounds](const Vector& x) { return synthetic_eval(fn, bounds.clamp(x)); };
  task.noise_variance = noise_variance;
  task.descriptor = {{"kind", "synthetic"}, {"name", task.name}, {"noise_variance", noise_variance}};
  if (auto known = synthetic_known_minimizer(fn)) task.true_opt = {*known, task.noiseless_eval(*known)};
  OracleOptions oracle;
  oracle.budget = oracle_budget;
  task.true_opt = estimate_true_optimum(task, oracle, oracle_seed);
  return task;
}

// ---------------------------------------------------------------------------
// Oracle, observation, regret

/// Dense scrambled-Sobol search followed by coordinate refinement of the
/// top-k points. The task's current optimum (if any) is kept as a candidate,
/// so repeated calls never decrease f*.
inline OptPair estimate_true_optimum(const Task& task, const OracleOptions& opts, std::uint64_t seed) {
  if (opts.budget < 1000) throw std::invalid_argument("estimate_true_optimum: budget must be >= 1000");
  const Bounds& bounds = task.bounds;
  const Matrix pts = sobol_in_box(bounds, opts.budget, seed);
  const Vector values = task.eval_batch(pts);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(values.size()));
  for (Eigen::Index i = 0; i < values.size(); ++i) order[static_cast<std::size_t>(i)] = i;
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, opts.top_k)), order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](Eigen::Index a, Eigen::Index b) { return values[a] > values[b] || (values[a] == values[b] && a < b); });

  std::vector<std::pair<Vector, double>> starts;
  for (std::size_t i = 0; i < k; ++i) starts.emplace_back(pts.col(order[i]), values[order[i]]);
  if (task.true_opt.x_star.size() == bounds.dim() && std::isfinite(task.true_opt.f_star))
    starts.emplace_back(task.true_opt.x_star, task.noiseless_eval(task.true_opt.x_star));

  const double step = std::min(0.5, 2.0 / std::pow(static_cast<double>(opts.budget), 1.0 / bounds.dim()));
  OptPair best{starts.front().first, -std::numeric_limits<double>::infinity()};
  for (const auto& [x0, f0] : starts) {
    const MaximizeResult r = refine_coordinatewise(task.noiseless_eval, bounds, x0, f0, opts.refine_rounds, step, 24);
    if (r.value > best.f_star) best = {r.x, r.value};
  }
  return best;
}

/// Noisy observation keyed by `noise_seed`.
inline double observe(const Task& task, const Vector& x, std::uint64_t noise_seed) {
  if (!task.bounds.contains(x, 1e-12)) throw std::invalid_argument("observe: query outside task bounds");
  const double f = task.noiseless_eval(x);
  if (task.noise_variance == 0.0) return f;
  std::mt19937_64 rng(noise_seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(task.noise_variance));
  return f + normal(rng);
}

struct Regrets {
  double simple;
  double inference;
};

/// Simple regret from the best noiseless value among queries so far,
/// inference regret from the noiseless value at the recommendation.
inline Regrets regrets(const Task& task, double best_noiseless_query, const Vector& recommendation) {
  return {task.true_opt.f_star - best_noiseless_query, task.true_opt.f_star - task.noiseless_eval(recommendation)};
}

// ---------------------------------------------------------------------------
// JSON descriptors

/// Build a task from a descriptor such as
///   {"kind": "gp_sample", "dimension": 2, "seed": 3, "noise_variance": 4.0}
///   {"kind": "synthetic", "name": "branin", "noise_variance": 0.01}
/// `default_seed` is used by GP-sample descriptors without a seed.
inline Task make_task(const nlohmann::json& desc, std::uint64_t default_seed = 0) {
  const std::string kind = desc.at("kind").get<std::string>();
  std::optional<double> noise;
  if (desc.contains("noise_variance")) noise = desc.at("noise_variance").get<double>();
  const Eigen::Index budget = desc.value("oracle_budget", kDefaultOracleBudget);
  if (kind == "gp_sample") {
    const int dim = desc.at("dimension").get<int>();
    const std::uint64_t seed = desc.contains("seed") ? desc.at("seed").get<std::uint64_t>() : default_seed;
    return make_gp_sample_task(dim, seed, noise, budget);
  }
  if (kind == "synthetic") {
    const SyntheticFunction fn = synthetic_from_string(desc.at("name").get<std::string>());
    return make_synthetic_task(fn, noise.value_or(kDefaultSyntheticNoise), budget);
  }
  throw std::invalid_argument("unknown task kind '" + kind + "'");
}

/// Full descriptor including bounds and generator parameters.
inline nlohmann::json describe(const Task& task) {
  nlohmann::json j = task.descriptor;
  j["task"] = task.name;
  j["dimension"] = task.dim();
  j["bounds"] = {{"lower", std::vector<double>(task.bounds.lower.data(), task.bounds.lower.data() + task.dim())},
                 {"upper", std::vector<double>(task.bounds.upper.data(), task.bounds.upper.data() + task.dim())}};
  if (task.kernel_params) {
    const KernelParams& p = *task.kernel_params;
    j["kernel"] = {{"length_scales", std::vector<double>(p.length_scales.data(), p.length_scales.data() + p.dim())},
                   {"output_scale", p.output_scale},
                   {"noise_variance", p.noise_variance}};
  }
  return j;
}

}  // namespace jesbo
