// Gaussian process regression with a squared-exponential ARD kernel.
//
// A GPPosterior holds the lower Cholesky factor L of K_n + diag(noise), the
// whitened targets z = L^{-1} y and the weight vector alpha = L^{-T} z. Every
// observation carries its own noise variance so that fantasized noiseless
// points can sit next to ordinary noisy data. Diagonal entries are floored at
// a jitter level (1e-10 sigma^2, escalated x10 up to 1e-4 sigma^2 when the
// factorization fails).
//
// Posteriors are immutable values; rank_one_extend returns a new posterior
// whose factor is the old one with a single appended row.
#pragma once

#include <atomic>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "jesbo/common.hpp"

namespace jesbo {

inline constexpr double kJitterStart = 1e-10;
inline constexpr double kJitterMax = 1e-4;

struct KernelParams {
  Vector length_scales;
  double output_scale = 1.0;
  double noise_variance = 0.0;

  KernelParams() = default;
  KernelParams(Vector theta, double sigma2, double noise)
      : length_scales(std::move(theta)), output_scale(sigma2), noise_variance(noise) {
    validate();
  }

  static KernelParams isotropic(Eigen::Index dim, double theta, double sigma2, double noise) {
    return {Vector::Constant(dim, theta), sigma2, noise};
  }

  Eigen::Index dim() const { return length_scales.size(); }

  void validate() const {
    if (length_scales.size() == 0) throw std::invalid_argument("KernelParams: empty length scales");
    if ((length_scales.array() <= 0.0).any() || !length_scales.allFinite())
      throw std::invalid_argument("KernelParams: length scales must be positive");
    if (!(output_scale > 0.0) || !std::isfinite(output_scale))
      throw std::invalid_argument("KernelParams: output scale must be positive");
    if (!(noise_variance >= 0.0) || !std::isfinite(noise_variance))
      throw std::invalid_argument("KernelParams: noise variance must be non-negative");
  }

  bool operator==(const KernelParams& o) const {
    return length_scales == o.length_scales && output_scale == o.output_scale && noise_variance == o.noise_variance;
  }
};

/// k(x, x2) = sigma^2 exp(-1/2 sum_d ((x_d - x2_d) / theta_d)^2)
inline double kernel_eval(const KernelParams& params, const Vector& x, const Vector& x2) {
  check_dim(x, params.dim(), "kernel_eval");
  check_dim(x2, params.dim(), "kernel_eval");
  const double r2 = ((x - x2).array() / params.length_scales.array()).square().sum();
  return params.output_scale * std::exp(-0.5 * r2);
}

/// Cross-covariance between the columns of `a` (D x n) and `b` (D x m).
inline Matrix kernel_matrix(const KernelParams& params, const Matrix& a, const Matrix& b) {
  const Vector inv = params.length_scales.cwiseInverse();
  const Matrix sa = inv.asDiagonal() * a;
  const Matrix sb = inv.asDiagonal() * b;
  const Vector na = sa.colwise().squaredNorm().transpose();
  const Vector nb = sb.colwise().squaredNorm().transpose();
  Matrix r2 = -2.0 * sa.transpose() * sb;
  r2.colwise() += na;
  r2.rowwise() += nb.transpose();
  return params.output_scale * (-0.5 * r2.array().max(0.0)).exp().matrix();
}

struct Observation {
  Vector x;
  double y = 0.0;
  double noise_variance = 0.0;
};

struct Prediction {
  double mean;
  double var_f;
  double var_y;
};

class GPPosterior;
GPPosterior fit_posterior(std::vector<Observation> data, const KernelParams& params);
GPPosterior rank_one_extend(const GPPosterior& posterior, const Observation& obs);

/// Number of times a negative predictive variance was clamped to zero.
inline std::atomic<std::size_t>& variance_clamp_count() {
  static std::atomic<std::size_t> count{0};
  return count;
}

class GPPosterior {
 public:
  const KernelParams& params() const { return params_; }
  const std::vector<Observation>& data() const { return data_; }
  const Matrix& chol_factor() const { return chol_; }
  const Vector& alpha() const { return alpha_; }
  const Vector& whitened_targets() const { return z_; }
  const Matrix& inputs() const { return inputs_; }
  const Vector& diagonal_noise() const { return diag_noise_; }
  /// Absolute jitter floor applied to the Gram diagonal.
  double jitter() const { return jitter_; }
  Eigen::Index dim() const { return params_.dim(); }
  std::size_t size() const { return data_.size(); }

  Vector kernel_vector(const Vector& x) const { return kernel_matrix(params_, inputs_, x); }

  /// L^{-1} k for a column (or block of columns) of cross-covariances.
  Matrix whiten(const Matrix& k) const {
    if (chol_.rows() == 0) return Matrix(0, k.cols());
    return chol_.triangularView<Eigen::Lower>().solve(k);
  }

  Prediction predict(const Vector& x) const {
    check_dim(x, dim(), "predict");
    double mean = 0.0;
    double var = params_.output_scale;
    if (!data_.empty()) {
      const Vector w = whiten(kernel_vector(x));
      mean = w.dot(z_);
      var -= w.squaredNorm();
    }
    var = clamp_variance(var);
    return {mean, var, var + params_.noise_variance};
  }

  double mean(const Vector& x) const {
    check_dim(x, dim(), "mean");
    if (data_.empty()) return 0.0;
    return kernel_vector(x).dot(alpha_);
  }

  /// Posterior means at the columns of `points` (D x m).
  Vector mean_batch(const Matrix& points) const {
    if (data_.empty()) return Vector::Zero(points.cols());
    return kernel_matrix(params_, points, inputs_) * alpha_;
  }

  /// Means and f-variances at the columns of `points`; also returns the
  /// whitened cross-covariances L^{-1} K(X, points) for reuse.
  void predict_batch(const Matrix& points, Vector& mean, Vector& var_f, Matrix* whitened = nullptr) const {
    const Eigen::Index m = points.cols();
    var_f = Vector::Constant(m, params_.output_scale);
    if (data_.empty()) {
      mean = Vector::Zero(m);
      if (whitened) *whitened = Matrix(0, m);
      return;
    }
    Matrix w = whiten(kernel_matrix(params_, inputs_, points));
    mean = w.transpose() * z_;
    var_f -= w.colwise().squaredNorm().transpose();
    for (Eigen::Index i = 0; i < m; ++i) var_f[i] = clamp_variance(var_f[i]);
    if (whitened) *whitened = std::move(w);
  }

 private:
  friend GPPosterior fit_posterior(std::vector<Observation> data, const KernelParams& params);
  friend GPPosterior rank_one_extend(const GPPosterior& posterior, const Observation& obs);

  static double clamp_variance(double v) {
    if (v < 0.0) {
      variance_clamp_count().fetch_add(1, std::memory_order_relaxed);
      return 0.0;
    }
    return v;
  }

  KernelParams params_;
  std::vector<Observation> data_;
  Matrix inputs_;  // D x n
  Matrix chol_;
  Vector z_;
  Vector alpha_;
  Vector diag_noise_;
  double jitter_ = 0.0;
};

inline GPPosterior fit_posterior(std::vector<Observation> data, const KernelParams& params) {
  params.validate();
  const auto n = static_cast<Eigen::Index>(data.size());
  const Eigen::Index dim = params.dim();
  GPPosterior post;
  post.params_ = params;
  post.inputs_.resize(dim, n);
  Vector y(n);
  Vector noise(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Observation& o = data[static_cast<std::size_t>(i)];
    check_dim(o.x, dim, "fit_posterior");
    if (!(o.noise_variance >= 0.0)) throw std::invalid_argument("fit_posterior: negative observation noise");
    post.inputs_.col(i) = o.x;
    y[i] = o.y;
    noise[i] = o.noise_variance;
  }
  post.data_ = std::move(data);

  const Matrix gram = kernel_matrix(params, post.inputs_, post.inputs_);
  for (double level = kJitterStart; level <= kJitterMax * (1.0 + 1e-9); level *= 10.0) {
    const double floor = level * params.output_scale;
    Vector diag = noise.cwiseMax(floor);
    Matrix a = gram;
    a.diagonal() += diag;
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() != Eigen::Success || !llt.matrixLLT().allFinite()) continue;
    post.chol_ = llt.matrixL();
    post.diag_noise_ = std::move(diag);
    post.jitter_ = floor;
    if (n > 0) {
      post.z_ = post.chol_.triangularView<Eigen::Lower>().solve(y);
      post.alpha_ = post.chol_.transpose().triangularView<Eigen::Upper>().solve(post.z_);
    } else {
      post.z_.resize(0);
      post.alpha_.resize(0);
    }
    return post;
  }
  throw std::runtime_error("fit_posterior: Gram matrix is not positive definite after jitter escalation to " +
                           std::to_string(kJitterMax) + " * output_scale (" + std::to_string(n) + " points)");
}

/// Append one observation in O(n^2): the factor gains the row
/// [v^T, d] with v = L^{-1} k_n(x), d^2 = k(x,x) + noise - |v|^2.
inline GPPosterior rank_one_extend(const GPPosterior& posterior, const Observation& obs) {
  const KernelParams& params = posterior.params_;
  check_dim(obs.x, params.dim(), "rank_one_extend");
  if (!(obs.noise_variance >= 0.0)) throw std::invalid_argument("rank_one_extend: negative observation noise");

  const Eigen::Index n = posterior.chol_.rows();
  const Vector v = posterior.whiten(posterior.kernel_vector(obs.x));
  const double base = params.output_scale - v.squaredNorm();

  double noise = std::max(obs.noise_variance, posterior.jitter_);
  double d2 = base + noise;
  const double max_floor = kJitterMax * params.output_scale;
  while (!(d2 > 0.0) || d2 < 1e-14 * params.output_scale) {
    if (noise >= max_floor) {
      throw std::runtime_error("rank_one_extend: extended Gram matrix is not positive definite (Schur complement " +
                               std::to_string(base) + ")");
    }
    noise = std::min(noise * 10.0, max_floor);
    d2 = base + noise;
  }
  const double d = std::sqrt(d2);

  GPPosterior out;
  out.params_ = params;
  out.data_ = posterior.data_;
  out.data_.push_back(obs);
  out.inputs_.resize(params.dim(), n + 1);
  out.inputs_.leftCols(n) = posterior.inputs_;
  out.inputs_.col(n) = obs.x;
  out.chol_ = Matrix::Zero(n + 1, n + 1);
  out.chol_.topLeftCorner(n, n) = posterior.chol_;
  out.chol_.block(n, 0, 1, n) = v.transpose();
  out.chol_(n, n) = d;
  out.diag_noise_.resize(n + 1);
  out.diag_noise_.head(n) = posterior.diag_noise_;
  out.diag_noise_[n] = noise;
  out.jitter_ = posterior.jitter_;
  out.z_.resize(n + 1);
  out.z_.head(n) = posterior.z_;
  out.z_[n] = (obs.y - v.dot(posterior.z_)) / d;
  out.alpha_ = out.chol_.transpose().triangularView<Eigen::Upper>().solve(out.z_);
  return out;
}

inline double log_marginal_likelihood(std::vector<Observation> data, const KernelParams& params) {
  if (data.empty()) return 0.0;
  const GPPosterior post = fit_posterior(std::move(data), params);
  const double n = static_cast<double>(post.size());
  const double log_det = 2.0 * post.chol_factor().diagonal().array().log().sum();
  return -0.5 * post.whitened_targets().squaredNorm() - 0.5 * log_det - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

}  // namespace jesbo
