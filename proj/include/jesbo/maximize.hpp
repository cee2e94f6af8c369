// Derivative-free box maximization: a scrambled Sobol grid followed by
// rounds of coordinate-wise golden-section refinement from the best point.
#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <random>
#include <vector>

#include <boost/random/sobol.hpp>

#include "jesbo/common.hpp"

namespace jesbo {

/// `count` points of a Sobol sequence in [0,1]^dim with a random
/// Cranley-Patterson shift. Returned column-wise (dim x count). For a fixed
/// seed, shorter sequences are prefixes of longer ones.
inline Matrix scrambled_sobol(Eigen::Index dim, Eigen::Index count, std::uint64_t seed) {
  boost::random::sobol engine(static_cast<std::size_t>(dim));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  Vector shift(dim);
  for (Eigen::Index d = 0; d < dim; ++d) shift[d] = uniform(rng);

  const double scale = 1.0 / (static_cast<double>(boost::random::sobol::max()) + 1.0);
  Matrix pts(dim, count);
  for (Eigen::Index i = 0; i < count; ++i) {
    for (Eigen::Index d = 0; d < dim; ++d) {
      // boost's engine omits the leading all-zero point; restore it so that
      // every power-of-two prefix is a full net.
      const double raw = i == 0 ? 0.0 : static_cast<double>(engine()) * scale;
      double u = raw + shift[d];
      pts(d, i) = u - std::floor(u);
    }
  }
  return pts;
}

inline Matrix sobol_in_box(const Bounds& bounds, Eigen::Index count, std::uint64_t seed) {
  Matrix pts = scrambled_sobol(bounds.dim(), count, seed);
  const Vector range = bounds.range();
  for (Eigen::Index i = 0; i < count; ++i)
    pts.col(i) = bounds.lower + (pts.col(i).array() * range.array()).matrix();
  return pts;
}

struct MaximizeOptions {
  Eigen::Index grid_size = 2000;
  int refine_iters = 10;
  int line_evals = 16;       // golden-section evaluations per coordinate line
  double initial_step = 0;   // fraction of the range; 0 derives it from the grid spacing
  double shrink = 0.5;       // window shrink per refinement round
};

struct MaximizeResult {
  Vector x;
  double value;
  double best_grid_value;
  Eigen::Index best_grid_index;
};

template <class F>
concept PointFunction = requires(const F& f, const Vector& x) {
  { f(x) } -> std::convertible_to<double>;
};

template <class F>
concept BatchFunction = requires(const F& f, const Matrix& pts) {
  { f(pts) } -> std::convertible_to<Vector>;
};

namespace detail {

// Golden-section search for the maximum of g on [lo, hi]; endpoints are
// probed as well so that boundary maxima are found exactly.
template <class G>
std::pair<double, double> golden_line(const G& g, double lo, double hi, double x0, double f0, int evals) {
  constexpr double kInvPhi = 0.6180339887498949;
  double best_t = x0;
  double best_f = f0;
  auto consider = [&](double t, double v) {
    if (v > best_f) {
      best_f = v;
      best_t = t;
    }
  };
  if (hi <= lo) return {best_t, best_f};
  consider(lo, g(lo));
  consider(hi, g(hi));
  double a = lo;
  double b = hi;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = g(c);
  double fd = g(d);
  consider(c, fc);
  consider(d, fd);
  for (int k = 4; k < evals; ++k) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = g(c);
      consider(c, fc);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = g(d);
      consider(d, fd);
    }
  }
  return {best_t, best_f};
}

}  // namespace detail

/// Refine `start` in place by coordinate-wise golden-section rounds; never
/// returns a point worse than the start.
template <PointFunction F>
MaximizeResult refine_coordinatewise(const F& f, const Bounds& bounds, Vector start, double start_value,
                                     int rounds, double step_fraction, int line_evals = 16, double shrink = 0.5) {
  Vector x = std::move(start);
  double fx = start_value;
  const Vector range = bounds.range();
  double step = step_fraction;
  for (int r = 0; r < rounds; ++r) {
    for (Eigen::Index d = 0; d < bounds.dim(); ++d) {
      if (range[d] <= 0.0) continue;
      const double lo = std::max(bounds.lower[d], x[d] - step * range[d]);
      const double hi = std::min(bounds.upper[d], x[d] + step * range[d]);
      Vector probe = x;
      auto line = [&](double t) {
        probe[d] = t;
        return static_cast<double>(f(probe));
      };
      const auto [t, v] = detail::golden_line(line, lo, hi, x[d], fx, line_evals);
      if (v > fx) {
        x[d] = t;
        fx = v;
      }
    }
    step *= shrink;
  }
  return {std::move(x), fx, fx, -1};
}

/// Maximize over the box: evaluate a scrambled Sobol grid (plus any extra
/// candidates, which are appended after the grid), take the best point (lowest
/// index wins ties) and refine it. `batch` evaluates all columns at once; it
/// only ranks the grid, so it may approximate `f`.
template <PointFunction F, BatchFunction B>
MaximizeResult maximize_on_box(const F& f, const B& batch, const Bounds& bounds, const MaximizeOptions& opts,
                               std::uint64_t seed, const Matrix* extra = nullptr) {
  const Eigen::Index grid = std::max<Eigen::Index>(1, opts.grid_size);
  const Eigen::Index n_extra = extra ? extra->cols() : 0;
  Matrix pts(bounds.dim(), grid + n_extra);
  pts.leftCols(grid) = sobol_in_box(bounds, grid, seed);
  if (n_extra > 0) pts.rightCols(n_extra) = *extra;

  const Vector values = batch(pts);
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;

  const double step = opts.initial_step > 0.0
                          ? opts.initial_step
                          : std::min(0.5, 1.0 / std::pow(static_cast<double>(grid), 1.0 / bounds.dim()));
  // The batch evaluator may be a cheaper screening approximation of f;
  // refinement starts from the exact value at the selected point.
  const Vector start = pts.col(best);
  const double start_value = static_cast<double>(f(start));
  MaximizeResult res =
      refine_coordinatewise(f, bounds, start, start_value, opts.refine_iters, step, opts.line_evals, opts.shrink);
  res.best_grid_value = start_value;
  res.best_grid_index = best;
  return res;
}

/// Convenience overload that evaluates the grid point by point.
template <PointFunction F>
MaximizeResult maximize_on_box(const F& f, const Bounds& bounds, const MaximizeOptions& opts, std::uint64_t seed,
                               const Matrix* extra = nullptr) {
  auto batch = [&f](const Matrix& pts) {
    Vector v(pts.cols());
    for (Eigen::Index i = 0; i < pts.cols(); ++i) v[i] = f(Vector(pts.col(i)));
    return v;
  };
  return maximize_on_box(f, batch, bounds, opts, seed, extra);
}

}  // namespace jesbo
