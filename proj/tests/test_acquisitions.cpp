#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "jesbo/acquisitions.hpp"
#include "oracles.hpp"

using namespace jesbo;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

Vector random_point(std::mt19937_64& rng, Eigen::Index dim) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vector x(dim);
  for (auto& v : x) v = u(rng);
  return x;
}

GPPosterior model_posterior(std::mt19937_64& rng, const KernelParams& p, int n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix x(p.dim(), n);
  for (Eigen::Index i = 0; i < n; ++i) x.col(i) = random_point(rng, p.dim());
  const Vector f = oracle::gp_prior_draw(x, p.length_scales, p.output_scale, rng);
  std::vector<Observation> data;
  for (int i = 0; i < n; ++i) data.push_back({x.col(i), f[i] + std::sqrt(p.noise_variance) * normal(rng), p.noise_variance});
  return fit_posterior(data, p);
}

SamplerConfig fast_sampler() {
  SamplerConfig cfg;
  cfg.n_features = 256;
  cfg.grid_size = 300;
  cfg.refine_iters = 2;
  return cfg;
}

}  // namespace

// ---------------------------------------------------------------------------
// EI

TEST(ExpectedImprovement, Examples) {
  EXPECT_NEAR(expected_improvement_from(1.5, 1.0, 1.5), 0.3989423, 1e-7);
  EXPECT_EQ(expected_improvement_from(-10.0, 1e-26, 0.0), 0.0);
  EXPECT_NEAR(expected_improvement_from(2.0, 1e-26, 0.0), 2.0, 1e-15);
}

TEST(ExpectedImprovement, MatchesMonteCarlo) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int i = 0; i < 5; ++i) {
    const double m = u(rng), s = 0.2 + std::abs(u(rng)), inc = u(rng);
    EXPECT_NEAR(expected_improvement_from(m, s * s, inc), oracle::expected_improvement_mc(m, s, inc, 400000, i), 5e-3);
  }
}

TEST(ExpectedImprovement, PosteriorWrapperAndIncumbent) {
  const KernelParams p = KernelParams::isotropic(1, 0.2, 1.0, 0.01);
  const GPPosterior post = fit_posterior({{vec({0.2}), 1.0, 0.01}, {vec({0.8}), -1.0, 0.01}}, p);
  EXPECT_NEAR(ei_incumbent(post), post.mean(vec({0.2})), 1e-12);
  const Prediction pr = post.predict(vec({0.5}));
  EXPECT_DOUBLE_EQ(expected_improvement(post, vec({0.5}), 0.3), expected_improvement_from(pr.mean, pr.var_f, 0.3));
  EXPECT_EQ(ei_incumbent(fit_posterior({}, p)), 0.0);
}

// ---------------------------------------------------------------------------
// MES

TEST(MaxValueEntropySearch, Examples) {
  EXPECT_NEAR(mes_from(0.0, 1.0, {40.0}), 0.0, 1e-10);
  EXPECT_NEAR(mes_from(0.0, 1.0, {0.0, 0.0}), 0.6931472, 1e-7);
  EXPECT_NEAR(mes_from(1.0, 4.0, {1.0 + 2.0 * 0.7}), mes_from(0.0, 1.0, {0.7}), 1e-14);
  EXPECT_THROW(mes_from(0.0, 1.0, {}), std::invalid_argument);
}

TEST(MaxValueEntropySearch, ClipsSamplesBelowMean) {
  const double v = mes_from(0.0, 1.0, {-3.0});
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_GE(v, 0.0);
}

TEST(MaxValueEntropySearch, MatchesQuadratureEntropyDrop) {
  // 1-D, 5-point noiseless posterior and a single f* sample: MES is the
  // exact entropy drop of f(x) under truncation at f*.
  const KernelParams p = KernelParams::isotropic(1, 0.15, 1.0, 0.0);
  std::vector<Observation> data;
  for (double x : {0.05, 0.3, 0.5, 0.7, 0.9}) data.push_back({vec({x}), std::sin(7.0 * x), 0.0});
  const GPPosterior post = fit_posterior(data, p);
  const double f_star = 1.2;
  for (double x : {0.15, 0.4, 0.62, 0.99}) {
    const Prediction pr = post.predict(vec({x}));
    const double exact = gaussian_entropy(pr.var_f) - oracle::truncated_normal_entropy_quadrature(pr.mean, pr.var_f, f_star);
    EXPECT_NEAR(mes(post, vec({x}), {f_star}), exact, 1e-6) << "x=" << x;
  }
}

// ---------------------------------------------------------------------------
// Conditioned ensemble

TEST(ConditionedEnsemble, PinsOptPairAndShrinksVariance) {
  std::mt19937_64 rng(2);
  const KernelParams p = KernelParams::isotropic(2, 0.2, 10.0, 0.01);
  const GPPosterior base = model_posterior(rng, p, 8);
  const ConditionedEnsemble ens = build_conditioned_ensemble(base, {{vec({0.31, 0.77}), 4.0}});
  ASSERT_EQ(ens.size(), 1u);
  const GPPosterior& member = ens.members()[0].posterior;
  EXPECT_LE(member.predict(vec({0.31, 0.77})).var_f, 10.0 * base.jitter());
  for (int t = 0; t < 100; ++t) {
    const Vector x = random_point(rng, 2);
    EXPECT_LE(member.predict(x).var_f, base.predict(x).var_f + 1e-10);
  }
  EXPECT_THROW(build_conditioned_ensemble(base, {}), std::invalid_argument);
}

TEST(ConditionedEnsemble, Deterministic) {
  std::mt19937_64 rng(3);
  const KernelParams p = KernelParams::isotropic(2, 0.2, 1.0, 0.01);
  const GPPosterior base = model_posterior(rng, p, 6);
  const auto pairs = sample_opt_pairs(base, Bounds::unit_cube(2), 5, fast_sampler(), 9);
  const ConditionedEnsemble a = build_conditioned_ensemble(base, pairs);
  const ConditionedEnsemble b = build_conditioned_ensemble(base, sample_opt_pairs(base, Bounds::unit_cube(2), 5, fast_sampler(), 9));
  EXPECT_EQ(a.appended_rows(), b.appended_rows());
  EXPECT_EQ(a.appended_targets(), b.appended_targets());
  EXPECT_EQ(a.f_stars(), b.f_stars());
}

// ---------------------------------------------------------------------------
// JES

TEST(JointEntropySearch, ValueAtPinnedPoint) {
  std::mt19937_64 rng(4);
  const KernelParams p = KernelParams::isotropic(2, 0.2, 1.0, 0.01);
  const GPPosterior base = model_posterior(rng, p, 5);
  const Vector xs = vec({0.45, 0.55});
  const ConditionedEnsemble ens = build_conditioned_ensemble(base, {{xs, 2.5}});
  const double s_n = base.predict(xs).var_f;
  EXPECT_NEAR(jes(ens, xs), 0.5 * std::log((s_n + 0.01) / 0.01), 1e-6);
}

TEST(JointEntropySearch, NothingLeftToLearnAtKnownPoint) {
  const KernelParams p = KernelParams::isotropic(1, 0.2, 1.0, 0.01);
  const GPPosterior base = fit_posterior({{vec({0.5}), 0.0, 1e-10}}, p);
  const ConditionedEnsemble ens = build_conditioned_ensemble(base, {{vec({0.1}), 50.0}, {vec({0.9}), 60.0}});
  EXPECT_NEAR(jes(ens, vec({0.5})), 0.0, 1e-6);
}

TEST(JointEntropySearch, FastPathMatchesMemberPosteriors) {
  std::mt19937_64 rng(5);
  const KernelParams p(vec({0.2, 0.35, 0.5}), 2.0, 0.05);
  const GPPosterior base = model_posterior(rng, p, 12);
  const auto pairs = sample_opt_pairs(base, Bounds::unit_cube(3), 8, fast_sampler(), 1);
  const ConditionedEnsemble ens = build_conditioned_ensemble(base, pairs);
  for (int t = 0; t < 30; ++t) {
    const Vector x = random_point(rng, 3);
    const double noise = ens.entropy_noise();
    double h = 0.0;
    for (const auto& m : ens.members()) {
      const Prediction pr = m.posterior.predict(x);
      const double vt = pr.var_f > 0 ? std::min(pr.var_f, truncated_moments(pr.mean, pr.var_f, m.pair.f_star).variance) : 0.0;
      h += gaussian_entropy(vt + noise) / static_cast<double>(ens.size());
    }
    const double expected = gaussian_entropy(base.predict(x).var_f + noise) - h;
    EXPECT_NEAR(jes(ens, x), expected, 1e-9);
  }
}

TEST(JointEntropySearch, BatchMatchesPointwise) {
  std::mt19937_64 rng(6);
  const KernelParams p = KernelParams::isotropic(2, 0.3, 1.0, 0.01);
  const GPPosterior base = model_posterior(rng, p, 7);
  const ConditionedEnsemble ens =
      build_conditioned_ensemble(base, sample_opt_pairs(base, Bounds::unit_cube(2), 6, fast_sampler(), 2));
  Matrix pts(2, 25);
  for (Eigen::Index j = 0; j < 25; ++j) pts.col(j) = random_point(rng, 2);
  const Vector batch = jes_batch(ens, pts);
  for (Eigen::Index j = 0; j < 25; ++j) EXPECT_NEAR(batch[j], jes(ens, pts.col(j)), 1e-12);
}

TEST(JointEntropySearch, NonNegativeAndDecomposes) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> dim_d(1, 4);
  std::uniform_int_distribution<int> n_d(0, 15);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    const Eigen::Index dim = dim_d(rng);
    Vector theta(dim);
    for (auto& t : theta) t = 0.1 + 0.6 * u(rng);
    const KernelParams p(theta, 0.5 + 5.0 * u(rng), trial % 4 == 0 ? 0.0 : std::pow(10.0, -3.0 + 3.0 * u(rng)));
    const GPPosterior base = model_posterior(rng, p, n_d(rng));
    std::vector<OptPair> pairs;
    if (trial % 2 == 0) {
      pairs = sample_opt_pairs(base, Bounds::unit_cube(dim), 4, fast_sampler(), static_cast<std::uint64_t>(trial));
    } else {
      // Arbitrary pairs, including f* below the posterior mean.
      for (int l = 0; l < 4; ++l) pairs.push_back({random_point(rng, dim), 2.0 * normal(rng)});
    }
    const ConditionedEnsemble ens = build_conditioned_ensemble(base, pairs);
    Matrix pts(dim, 25);
    for (Eigen::Index j = 0; j < 25; ++j) pts.col(j) = random_point(rng, dim);
    pts.col(0) = pairs[0].x_star;
    for (const JesTerms& t : jes_terms_batch(ens, pts)) {
      EXPECT_GE(t.value, -1e-9);
      EXPECT_GE(t.conditioning, -1e-9);
      EXPECT_GE(t.truncation, -1e-9);
      EXPECT_NEAR(t.value, t.conditioning + t.truncation, 1e-12);
    }
  }
}

TEST(JointEntropySearch, ArgmaxScaleInvariant) {
  std::mt19937_64 rng(8);
  const KernelParams p = KernelParams::isotropic(2, 0.2, 1.0, 0.01);
  const GPPosterior base = model_posterior(rng, p, 6);
  const JesAcquisition acq({build_conditioned_ensemble(base, sample_opt_pairs(base, Bounds::unit_cube(2), 10, fast_sampler(), 3))});
  const MaximizeResult a = optimize_acquisition(acq, Bounds::unit_cube(2), 500, 5, 11);
  for (double c : {0.5, 3.7, 1000.0}) {
    auto scaled = [&](const Matrix& pts) -> Vector { return c * acq(pts); };
    auto point = [&](const Vector& x) { return c * acq(x); };
    MaximizeOptions opts;
    opts.grid_size = 500;
    opts.refine_iters = 5;
    const MaximizeResult b = maximize_on_box(point, scaled, Bounds::unit_cube(2), opts, 11);
    EXPECT_LT((a.x - b.x).norm(), 1e-9) << "scale " << c;
  }
}

TEST(JointEntropySearch, ConditioningLocalTruncationGlobal) {
  // One-dimensional setup with a few observations on the left and one
  // opt-pair: the conditioning drop peaks at x*, while far from x* (and from
  // the data) only the truncation term is left.
  const KernelParams p = KernelParams::isotropic(1, 0.08, 1.0, 0.01);
  std::vector<Observation> data;
  for (double x : {0.05, 0.15, 0.3}) data.push_back({vec({x}), std::sin(10.0 * x), 0.01});
  const GPPosterior base = fit_posterior(data, p);
  const double x_star = 0.55;
  const ConditionedEnsemble ens = build_conditioned_ensemble(base, {{vec({x_star}), 1.5}});
  Matrix grid(1, 401);
  for (Eigen::Index j = 0; j < 401; ++j) grid(0, j) = j / 400.0;
  const auto terms = jes_terms_batch(ens, grid);
  Eigen::Index best = 0;
  for (Eigen::Index j = 1; j < 401; ++j)
    if (terms[j].conditioning > terms[best].conditioning) best = j;
  EXPECT_NEAR(grid(0, best), x_star, 0.02);
  for (Eigen::Index j = 0; j < 401; ++j) {
    if (std::abs(grid(0, j) - x_star) > 0.3 && grid(0, j) > 0.6) {
      EXPECT_GT(terms[j].truncation, terms[j].conditioning);
      EXPECT_GT(terms[j].truncation, 1e-3);
    }
  }
}

// ---------------------------------------------------------------------------
// Acquisition objects and optimization

TEST(AcquisitionObjects, BatchMatchesPointwiseAndAveragesSets) {
  std::mt19937_64 rng(9);
  const KernelParams p1 = KernelParams::isotropic(2, 0.2, 1.0, 0.01);
  const KernelParams p2 = KernelParams::isotropic(2, 0.4, 2.0, 0.05);
  const GPPosterior a = model_posterior(rng, p1, 6);
  std::vector<Observation> data = a.data();
  for (auto& o : data) o.noise_variance = 0.05;
  const GPPosterior b = fit_posterior(data, p2);
  const EiAcquisition ei({{a, 0.1}, {b, 0.2}});
  const MesAcquisition me({{a, {1.0, 1.5}}, {b, {2.0}}});
  const Vector x = random_point(rng, 2);
  EXPECT_NEAR(ei(x), 0.5 * (expected_improvement(a, x, 0.1) + expected_improvement(b, x, 0.2)), 1e-14);
  EXPECT_NEAR(me(x), 0.5 * (mes(a, x, {1.0, 1.5}) + mes(b, x, {2.0})), 1e-14);
  Matrix pts(2, 3);
  for (Eigen::Index j = 0; j < 3; ++j) pts.col(j) = random_point(rng, 2);
  const Vector vb = ei(pts);
  for (Eigen::Index j = 0; j < 3; ++j) EXPECT_NEAR(vb[j], ei(Vector(pts.col(j))), 1e-14);
}

TEST(OptimizeAcquisition, Examples) {
  const Bounds b = Bounds::unit_cube(2);
  auto constant = [](const Vector&) { return 0.25; };
  const MaximizeResult c = optimize_acquisition(constant, b, 100, 5, 1);
  EXPECT_TRUE(b.contains(c.x));
  EXPECT_EQ(c.value, 0.25);

  const Vector centre = vec({0.62, 0.28});
  auto bowl = [&](const Vector& x) { return -(x - centre).squaredNorm(); };
  const MaximizeResult q = optimize_acquisition(bowl, b, 300, 10, 2);
  EXPECT_LT((q.x - centre).cwiseAbs().maxCoeff(), 1e-3);

  auto wavy = [](const Vector& x) { return std::sin(9.0 * x[0]) * std::sin(5.0 * x[1]); };
  EXPECT_GE(optimize_acquisition(wavy, b, 50, 20, 3).value, optimize_acquisition(wavy, b, 50, 0, 3).value);
  EXPECT_THROW(optimize_acquisition(wavy, b, 0, 0, 3), std::invalid_argument);
}
