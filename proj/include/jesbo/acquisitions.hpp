// Acquisition functions: Joint Entropy Search (JES), max-value entropy
// search (MES) and expected improvement (EI). Maximization convention
// throughout; information-theoretic values are in nats.
//
// JES averages, over L sampled opt-pairs (x*_l, f*_l), the entropy drop of
// y(x) from (a) conditioning the GP on the noiseless observation
// (x*_l, f*_l) and (b) truncating the conditioned f(x) above at f*_l,
// with (b) moment-matched:
//   JES(x) = H[s_n(x) + s_e] - 1/L sum_l H[s_e + var_T(f*_l; m_l(x), s_l(x))].
#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "jesbo/gauss_math.hpp"
#include "jesbo/gp.hpp"
#include "jesbo/maximize.hpp"
#include "jesbo/rff.hpp"

namespace jesbo {

// ---------------------------------------------------------------------------
// Expected improvement

inline double expected_improvement_from(double mean, double var_f, double incumbent) {
  const double s = std::sqrt(std::max(var_f, 0.0));
  const double diff = mean - incumbent;
  if (s < 1e-12) return std::max(diff, 0.0);
  const double z = diff / s;
  const auto [pdf, cdf] = std_normal(z);
  return std::max(0.0, diff * cdf + s * pdf);
}

inline double expected_improvement(const GPPosterior& posterior, const Vector& x, double incumbent) {
  const Prediction p = posterior.predict(x);
  return expected_improvement_from(p.mean, p.var_f, incumbent);
}

/// Best posterior mean over the observed inputs (the EI incumbent under noise).
inline double ei_incumbent(const GPPosterior& posterior) {
  if (posterior.size() == 0) return 0.0;
  return posterior.mean_batch(posterior.inputs()).maxCoeff();
}

// ---------------------------------------------------------------------------
// Max-value entropy search

inline double mes_from(double mean, double var_f, const std::vector<double>& f_star_samples) {
  if (f_star_samples.empty()) throw std::invalid_argument("mes: need at least one f* sample");
  const double s = std::sqrt(std::max(var_f, 0.0));
  if (s <= 0.0) return 0.0;
  double total = 0.0;
  for (const double f_star : f_star_samples) {
    const double gamma = (std::max(f_star, mean + 1e-8 * s) - mean) / s;
    const auto [pdf, cdf] = std_normal(gamma);
    total += gamma * pdf / (2.0 * cdf) - std::log(cdf);
  }
  return std::max(0.0, total / static_cast<double>(f_star_samples.size()));
}

inline double mes(const GPPosterior& posterior, const Vector& x, const std::vector<double>& f_star_samples) {
  const Prediction p = posterior.predict(x);
  return mes_from(p.mean, p.var_f, f_star_samples);
}

// ---------------------------------------------------------------------------
// Joint entropy search

struct EnsembleMember {
  OptPair pair;
  GPPosterior posterior;
};

/// L copies of a base posterior, each extended by one fantasized noiseless
/// opt-pair. The appended Cholesky rows are packed column-wise so that all
/// members can be evaluated from a single whitened base cross-covariance.
class ConditionedEnsemble {
 public:
  const GPPosterior& base() const { return base_; }
  const std::vector<EnsembleMember>& members() const { return members_; }
  double noise_variance() const { return noise_variance_; }
  std::size_t size() const { return members_.size(); }

  /// Noise variance used inside entropies; floored at the jitter so that
  /// noiseless models keep finite entropies.
  double entropy_noise() const { return std::max(noise_variance_, base_.jitter()); }

  const Matrix& appended_rows() const { return rows_; }
  const Vector& appended_diag() const { return diag_; }
  const Vector& appended_targets() const { return z_last_; }
  const Matrix& x_stars() const { return x_stars_; }
  const Vector& f_stars() const { return f_stars_; }

 private:
  friend ConditionedEnsemble build_conditioned_ensemble(const GPPosterior&, const std::vector<OptPair>&);

  GPPosterior base_;
  std::vector<EnsembleMember> members_;
  double noise_variance_ = 0.0;
  Matrix rows_;     // n x L, v_l = L^{-1} k_n(x*_l)
  Vector diag_;     // L
  Vector z_last_;   // L
  Matrix x_stars_;  // D x L
  Vector f_stars_;  // L
};

inline ConditionedEnsemble build_conditioned_ensemble(const GPPosterior& posterior, const std::vector<OptPair>& pairs) {
  if (pairs.empty()) throw std::invalid_argument("build_conditioned_ensemble: need at least one opt-pair");
  ConditionedEnsemble ens;
  ens.base_ = posterior;
  ens.noise_variance_ = posterior.params().noise_variance;
  const auto n = static_cast<Eigen::Index>(posterior.size());
  const auto count = static_cast<Eigen::Index>(pairs.size());
  ens.rows_.resize(n, count);
  ens.diag_.resize(count);
  ens.z_last_.resize(count);
  ens.x_stars_.resize(posterior.dim(), count);
  ens.f_stars_.resize(count);
  ens.members_.reserve(pairs.size());
  for (Eigen::Index l = 0; l < count; ++l) {
    const OptPair& pair = pairs[static_cast<std::size_t>(l)];
    GPPosterior member = rank_one_extend(posterior, Observation{pair.x_star, pair.f_star, posterior.jitter()});
    const Matrix& chol = member.chol_factor();
    ens.rows_.col(l) = chol.block(n, 0, 1, n).transpose();
    ens.diag_[l] = chol(n, n);
    ens.z_last_[l] = member.whitened_targets()[n];
    ens.x_stars_.col(l) = pair.x_star;
    ens.f_stars_[l] = pair.f_star;
    ens.members_.push_back({pair, std::move(member)});
  }
  return ens;
}

/// JES value with its two parts: entropy drop from conditioning on the
/// opt-pairs and the further drop from truncating at f*.
struct JesTerms {
  double value;
  double conditioning;
  double truncation;
};

namespace detail {

inline double truncated_variance(double mean, double var, double upper) {
  if (!(var > 0.0)) return 0.0;
  return std::min(var, truncated_moments(mean, var, upper).variance);
}

}  // namespace detail

/// Evaluate JES terms at the columns of `points` (D x m).
inline std::vector<JesTerms> jes_terms_batch(const ConditionedEnsemble& ens, const Matrix& points) {
  const GPPosterior& base = ens.base();
  const Eigen::Index m = points.cols();
  const auto count = static_cast<Eigen::Index>(ens.size());
  Vector mean;
  Vector var;
  Matrix whitened;
  base.predict_batch(points, mean, var, &whitened);

  Matrix cross = kernel_matrix(base.params(), ens.x_stars(), points);  // L x m
  if (base.size() > 0) cross.noalias() -= ens.appended_rows().transpose() * whitened;
  cross.array().colwise() /= ens.appended_diag().array();

  const double noise = ens.entropy_noise();
  const double inv_l = 1.0 / static_cast<double>(count);
  std::vector<JesTerms> out(static_cast<std::size_t>(m));
  for (Eigen::Index j = 0; j < m; ++j) {
    const double h_base = gaussian_entropy(var[j] + noise);
    double h_cond = 0.0;
    double h_trunc = 0.0;
    for (Eigen::Index l = 0; l < count; ++l) {
      const double u = cross(l, j);
      const double m_l = mean[j] + u * ens.appended_targets()[l];
      const double s_l = std::max(0.0, var[j] - u * u);
      h_cond += gaussian_entropy(s_l + noise);
      h_trunc += gaussian_entropy(detail::truncated_variance(m_l, s_l, ens.f_stars()[l]) + noise);
    }
    h_cond *= inv_l;
    h_trunc *= inv_l;
    out[static_cast<std::size_t>(j)] = {h_base - h_trunc, h_base - h_cond, h_cond - h_trunc};
  }
  return out;
}

inline JesTerms jes_terms(const ConditionedEnsemble& ens, const Vector& x) {
  check_dim(x, ens.base().dim(), "jes");
  return jes_terms_batch(ens, x).front();
}

inline double jes(const ConditionedEnsemble& ens, const Vector& x) { return jes_terms(ens, x).value; }

inline Vector jes_batch(const ConditionedEnsemble& ens, const Matrix& points) {
  const std::vector<JesTerms> terms = jes_terms_batch(ens, points);
  Vector v(points.cols());
  for (Eigen::Index j = 0; j < points.cols(); ++j) v[j] = terms[static_cast<std::size_t>(j)].value;
  return v;
}

// ---------------------------------------------------------------------------
// Acquisition objects averaged over hyperparameter sets, with batch support.

class JesAcquisition {
 public:
  explicit JesAcquisition(std::vector<ConditionedEnsemble> ensembles) : ensembles_(std::move(ensembles)) {
    if (ensembles_.empty()) throw std::invalid_argument("JesAcquisition: no ensembles");
  }
  double operator()(const Vector& x) const { return operator()(Matrix(x))[0]; }
  Vector operator()(const Matrix& points) const {
    Vector total = Vector::Zero(points.cols());
    for (const auto& e : ensembles_) total += jes_batch(e, points);
    return total / static_cast<double>(ensembles_.size());
  }
  const std::vector<ConditionedEnsemble>& ensembles() const { return ensembles_; }

 private:
  std::vector<ConditionedEnsemble> ensembles_;
};

class MesAcquisition {
 public:
  struct Component {
    GPPosterior posterior;
    std::vector<double> f_stars;
  };
  explicit MesAcquisition(std::vector<Component> components) : components_(std::move(components)) {
    if (components_.empty()) throw std::invalid_argument("MesAcquisition: no components");
  }
  double operator()(const Vector& x) const { return operator()(Matrix(x))[0]; }
  Vector operator()(const Matrix& points) const {
    Vector total = Vector::Zero(points.cols());
    Vector mean;
    Vector var;
    for (const auto& c : components_) {
      c.posterior.predict_batch(points, mean, var);
      for (Eigen::Index j = 0; j < points.cols(); ++j) total[j] += mes_from(mean[j], var[j], c.f_stars);
    }
    return total / static_cast<double>(components_.size());
  }

 private:
  std::vector<Component> components_;
};

class EiAcquisition {
 public:
  struct Component {
    GPPosterior posterior;
    double incumbent;
  };
  explicit EiAcquisition(std::vector<Component> components) : components_(std::move(components)) {
    if (components_.empty()) throw std::invalid_argument("EiAcquisition: no components");
  }
  double operator()(const Vector& x) const { return operator()(Matrix(x))[0]; }
  Vector operator()(const Matrix& points) const {
    Vector total = Vector::Zero(points.cols());
    Vector mean;
    Vector var;
    for (const auto& c : components_) {
      c.posterior.predict_batch(points, mean, var);
      for (Eigen::Index j = 0; j < points.cols(); ++j)
        total[j] += expected_improvement_from(mean[j], var[j], c.incumbent);
    }
    return total / static_cast<double>(components_.size());
  }

 private:
  std::vector<Component> components_;
};

/// Argmax of an acquisition over a scrambled grid plus local refinement.
template <class Acq>
MaximizeResult optimize_acquisition(const Acq& acq, const Bounds& bounds, Eigen::Index grid_size, int refine_iters,
                                    std::uint64_t seed) {
  if (grid_size < 1) throw std::invalid_argument("optimize_acquisition: grid_size must be >= 1");
  MaximizeOptions opts;
  opts.grid_size = grid_size;
  opts.refine_iters = refine_iters;
  if constexpr (BatchFunction<Acq>) {
    auto point = [&acq](const Vector& x) { return static_cast<double>(acq(x)); };
    auto batch = [&acq](const Matrix& pts) -> Vector { return acq(pts); };
    return maximize_on_box(point, batch, bounds, opts, seed);
  } else {
    return maximize_on_box(acq, bounds, opts, seed);
  }
}

}  // namespace jesbo
