// Approximate Thompson sampling of optimum pairs (x*, f*).
//
// The SE kernel is approximated by random Fourier features
//   phi(x) = sqrt(2 sigma^2 / F) cos(W x + b),  W_f ~ N(0, diag(theta^-2)),
//   b_f ~ U[0, 2 pi),
// so that E[phi(x)^T phi(x')] = k(x, x'). A sample path is the Bayesian
// linear model f(x) = phi(x)^T w with w ~ N(0, I), drawn from its exact
// posterior given the data, and maximized on a dense grid plus refinement.
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include "jesbo/gp.hpp"
#include "jesbo/maximize.hpp"

namespace jesbo {

namespace detail {

/// In-place cosine over a contiguous array, written branch-free so the loop
/// vectorizes. Cody-Waite reduction by pi/2 followed by the Cephes minimax
/// polynomials on [-pi/4, pi/4]; agrees with std::cos to about 1 ulp for
/// |x| < 1e5, which covers RFF arguments by a wide margin.
inline void cos_inplace(double* v, Eigen::Index n) {
  constexpr double kTwoOverPi = 0.63661977236758134308;
  constexpr double kPio2Hi = 1.57079625129699707031e0;
  constexpr double kPio2Mid = 7.54978941586159635335e-8;
  constexpr double kPio2Lo = 5.39030285815811905290e-15;
  constexpr double kRound = 6755399441055744.0;  // 1.5 * 2^52: add/subtract rounds to integer
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = v[i];
    const double q = (x * kTwoOverPi + kRound) - kRound;
    const double r = ((x - q * kPio2Hi) - q * kPio2Mid) - q * kPio2Lo;
    const double z = r * r;
    const double s =
        r + r * z *
                (((((1.58962301576546568060e-10 * z - 2.50507477628578072866e-8) * z + 2.75573136213857245213e-6) * z -
                   1.98412698295895385996e-4) * z + 8.33333333332211858878e-3) * z - 1.66666666666666307295e-1);
    const double c =
        1.0 - 0.5 * z +
        z * z *
            (((((-1.13585365213876817300e-11 * z + 2.08757008419747316778e-9) * z - 2.75573141792967388112e-7) * z +
               2.48015872888517045348e-5) * z - 1.38888888888730564116e-3) * z + 4.16666666666665929218e-2);
    // Quadrant m = q mod 4 taken in {-2,...,2}; the weights below are exact
    // integer polynomials selecting +-c or +-s without branches.
    const double m = q - 4.0 * ((q * 0.25 + kRound) - kRound);
    const double m2 = m * m;
    const double wc = (6.0 - 7.0 * m2 + m2 * m2) / 6.0;
    const double ws = (m * m2 - 4.0 * m) / 3.0;
    v[i] = wc * c + ws * s;
  }
}

/// Single-precision counterpart of cos_inplace (Cephes cosf/sinf
/// polynomials), about 1e-7 absolute accuracy for |x| < 1e3. Used only to
/// rank grid points before double-precision refinement.
inline void cos_inplace(float* v, Eigen::Index n) {
  constexpr float kTwoOverPi = 0.636619772367581f;
  constexpr float kPio2Hi = 1.5703125f;
  constexpr float kPio2Mid = 4.837512969970703125e-4f;
  constexpr float kPio2Lo = 7.54978995489188216e-8f;
  constexpr float kRound = 12582912.0f;  // 1.5 * 2^23
  for (Eigen::Index i = 0; i < n; ++i) {
    const float x = v[i];
    const float q = (x * kTwoOverPi + kRound) - kRound;
    const float r = ((x - q * kPio2Hi) - q * kPio2Mid) - q * kPio2Lo;
    const float z = r * r;
    const float s = r + r * z * ((-1.9515295891e-4f * z + 8.3321608736e-3f) * z - 1.6666654611e-1f);
    const float c = 1.0f - 0.5f * z + z * z * ((2.443315711809948e-5f * z - 1.388731625493765e-3f) * z +
                                                4.166664568298827e-2f);
    const float m = q - 4.0f * ((q * 0.25f + kRound) - kRound);
    const float m2 = m * m;
    const float wc = (6.0f - 7.0f * m2 + m2 * m2) / 6.0f;
    const float ws = (m * m2 - 4.0f * m) / 3.0f;
    v[i] = wc * c + ws * s;
  }
}

}  // namespace detail

struct RFFBasis {
  Matrix weights;  // F x D spectral frequencies
  Vector phases;   // F
  double amplitude = 0.0;
  double output_scale = 0.0;

  Eigen::Index n_features() const { return weights.rows(); }
  Eigen::Index dim() const { return weights.cols(); }

  Vector features(const Vector& x) const {
    check_dim(x, dim(), "RFFBasis::features");
    Vector out = weights * x + phases;
    detail::cos_inplace(out.data(), out.size());
    return amplitude * out;
  }

  /// Features of every column of `points` (D x m), returned F x m.
  Matrix features_batch(const Matrix& points) const {
    Matrix arg = weights * points;
    arg.colwise() += phases;
    detail::cos_inplace(arg.data(), arg.size());
    return amplitude * arg;
  }
};

inline RFFBasis draw_rff_basis(const KernelParams& params, Eigen::Index n_features, std::uint64_t seed) {
  if (n_features < 1) throw std::invalid_argument("draw_rff_basis: need at least one feature");
  params.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 2.0 * std::numbers::pi);

  RFFBasis basis;
  const Eigen::Index dim = params.dim();
  basis.weights.resize(n_features, dim);
  basis.phases.resize(n_features);
  for (Eigen::Index f = 0; f < n_features; ++f) {
    for (Eigen::Index d = 0; d < dim; ++d) basis.weights(f, d) = normal(rng) / params.length_scales[d];
    basis.phases[f] = uniform(rng);
  }
  basis.output_scale = params.output_scale;
  basis.amplitude = std::sqrt(2.0 * params.output_scale / static_cast<double>(n_features));
  return basis;
}

struct SamplePath {
  RFFBasis basis;
  Vector theta_weights;

  double operator()(const Vector& x) const { return basis.features(x).dot(theta_weights); }

  /// Path values at the columns of `points`, one point at a time so the
  /// F-length feature buffer stays in cache.
  Vector values(const Matrix& points) const {
    if (points.rows() != basis.dim()) throw std::invalid_argument("SamplePath::values: dimension mismatch");
    const Eigen::Index n_feat = basis.n_features();
    const Vector scaled = basis.amplitude * theta_weights;
    Vector arg(n_feat);
    Vector out(points.cols());
    for (Eigen::Index j = 0; j < points.cols(); ++j) {
      arg = basis.phases;
      for (Eigen::Index d = 0; d < basis.dim(); ++d) arg += points(d, j) * basis.weights.col(d);
      detail::cos_inplace(arg.data(), n_feat);
      out[j] = arg.dot(scaled);
    }
    return out;
  }
};

/// Draw w from the posterior of y = phi(x)^T w + eps, w ~ N(0, I),
/// eps ~ N(0, noise_variance). Uses the n x n (function-space) update
///   w = w0 + Phi^T (Phi Phi^T + N)^{-1} (y - Phi w0 - eps0)
/// when n <= F and the F x F weight-space posterior otherwise.
inline SamplePath draw_sample_path(const RFFBasis& basis, const std::vector<Observation>& data,
                                   double noise_variance, std::uint64_t seed) {
  const Eigen::Index n_feat = basis.n_features();
  if (n_feat < 1) throw std::invalid_argument("draw_sample_path: empty basis");
  if (noise_variance < 0.0) throw std::invalid_argument("draw_sample_path: negative noise variance");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  SamplePath path{basis, Vector(n_feat)};
  for (Eigen::Index f = 0; f < n_feat; ++f) path.theta_weights[f] = normal(rng);
  if (data.empty()) return path;

  const auto n = static_cast<Eigen::Index>(data.size());
  Matrix inputs(basis.dim(), n);
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    inputs.col(i) = data[static_cast<std::size_t>(i)].x;
    y[i] = data[static_cast<std::size_t>(i)].y;
  }
  const Matrix phi = basis.features_batch(inputs);  // F x n

  for (double level = kJitterStart; level <= kJitterMax * (1.0 + 1e-9); level *= 10.0) {
    const double noise = std::max(noise_variance, level * basis.output_scale);
    if (n <= n_feat) {
      Matrix gram = phi.transpose() * phi;
      gram.diagonal().array() += noise;
      Eigen::LLT<Matrix> llt(gram);
      if (llt.info() != Eigen::Success) continue;
      Vector resid = y - phi.transpose() * path.theta_weights;
      for (Eigen::Index i = 0; i < n; ++i) resid[i] -= std::sqrt(noise_variance) * normal(rng);
      path.theta_weights += phi * llt.solve(resid);
      return path;
    }
    Matrix precision = phi * phi.transpose() / noise;
    precision.diagonal().array() += 1.0;
    Eigen::LLT<Matrix> llt(precision);
    if (llt.info() != Eigen::Success) continue;
    const Vector mean = llt.solve(phi * y / noise);
    // path.theta_weights holds a standard normal draw; map it through L^{-T}.
    path.theta_weights = mean + llt.matrixU().solve(path.theta_weights);
    return path;
  }
  throw std::runtime_error("draw_sample_path: feature Gram matrix is not positive definite after jitter escalation");
}

struct OptPair {
  Vector x_star;
  double f_star;
};

struct SamplerConfig {
  Eigen::Index n_features = 1024;
  Eigen::Index grid_size = 0;  // 0: max(2000, 500 D)
  int refine_iters = 5;
  int line_evals = 12;

  Eigen::Index grid_for(Eigen::Index dim) const {
    return grid_size > 0 ? grid_size : std::max<Eigen::Index>(2000, 500 * dim);
  }
};

/// Single-precision copy of a sample path for ranking many grid points.
/// Agrees with the double-precision path to roughly 1e-5 of its scale.
class PathScreen {
 public:
  explicit PathScreen(const SamplePath& path)
      : weights_(path.basis.weights.cast<float>()),
        phases_(path.basis.phases.cast<float>()),
        scaled_((path.basis.amplitude * path.theta_weights).cast<float>()) {}

  Vector operator()(const Matrix& points) const {
    if (points.rows() != weights_.cols()) throw std::invalid_argument("PathScreen: dimension mismatch");
    Eigen::VectorXf arg(weights_.rows());
    Vector out(points.cols());
    for (Eigen::Index j = 0; j < points.cols(); ++j) {
      arg = phases_;
      for (Eigen::Index d = 0; d < weights_.cols(); ++d) arg += static_cast<float>(points(d, j)) * weights_.col(d);
      detail::cos_inplace(arg.data(), arg.size());
      out[j] = static_cast<double>(arg.dot(scaled_));
    }
    return out;
  }

 private:
  Eigen::MatrixXf weights_;
  Eigen::VectorXf phases_;
  Eigen::VectorXf scaled_;
};

/// Argmax of a sample path over a scrambled grid plus `extra` candidates
/// (typically the training inputs), refined coordinate-wise. The grid is
/// ranked in single precision; the selected point and everything after it
/// are evaluated in double precision.
inline OptPair maximize_path(const SamplePath& path, const Bounds& bounds, Eigen::Index grid_size, int refine_iters,
                             std::uint64_t seed, const Matrix* extra = nullptr, int line_evals = 12) {
  if (grid_size < 1) throw std::invalid_argument("maximize_path: grid_size must be >= 1");
  MaximizeOptions opts;
  opts.grid_size = grid_size;
  opts.refine_iters = refine_iters;
  opts.line_evals = line_evals;
  const PathScreen batch(path);
  const MaximizeResult res = maximize_on_box(path, batch, bounds, opts, seed, extra);
  return {res.x, res.value};
}

/// Draw L opt-pairs, each from a fresh basis and sample path.
inline std::vector<OptPair> sample_opt_pairs(const GPPosterior& posterior, const Bounds& bounds, int count,
                                             const SamplerConfig& config, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("sample_opt_pairs: need at least one pair");
  check_dim(bounds.lower, posterior.dim(), "sample_opt_pairs");
  const KernelParams& params = posterior.params();
  const Matrix& inputs = posterior.inputs();
  const Matrix* extra = inputs.cols() > 0 ? &inputs : nullptr;
  const Vector range = bounds.range();

  std::vector<OptPair> pairs;
  pairs.reserve(static_cast<std::size_t>(count));
  for (int l = 0; l < count; ++l) {
    const auto ul = static_cast<std::uint64_t>(l);
    const RFFBasis basis = draw_rff_basis(params, config.n_features, derive_seed(seed, ul, 1));
    const SamplePath path = draw_sample_path(basis, posterior.data(), params.noise_variance, derive_seed(seed, ul, 2));
    OptPair pair = maximize_path(path, bounds, config.grid_for(bounds.dim()), config.refine_iters,
                                 derive_seed(seed, ul, 3), extra, config.line_evals);
    // A pair on top of a training input would make the rank-1 extension singular.
    for (Eigen::Index i = 0; i < inputs.cols(); ++i) {
      if (((pair.x_star - inputs.col(i)).array().abs() <= 1e-9).all()) {
        for (Eigen::Index d = 0; d < pair.x_star.size(); ++d) {
          const double delta = 1e-6 * range[d];
          pair.x_star[d] += (pair.x_star[d] + delta <= bounds.upper[d]) ? delta : -delta;
        }
        pair.f_star = path(pair.x_star);
        break;
      }
    }
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

}  // namespace jesbo
