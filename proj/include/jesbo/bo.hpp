// The Bayesian optimization loop: low-discrepancy initial design, periodic
// hyperparameter refresh, gamma-exploit branching and acquisition-driven
// queries, with the posterior-mean argmax as recommendation.
#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "jesbo/acquisitions.hpp"
#include "jesbo/benchmarks.hpp"
#include "jesbo/gp.hpp"
#include "jesbo/hyperfit.hpp"
#include "jesbo/maximize.hpp"
#include "jesbo/rff.hpp"

namespace jesbo {

enum class AcquisitionKind { Jes, Mes, Ei, Random };
enum class Branch { Init, Exploit, Acquire };

inline std::string to_string(AcquisitionKind kind) {
  switch (kind) {
    case AcquisitionKind::Jes: return "JES";
    case AcquisitionKind::Mes: return "MES";
    case AcquisitionKind::Ei: return "EI";
    case AcquisitionKind::Random: return "RANDOM";
  }
  return "UNKNOWN";
}

inline AcquisitionKind acquisition_from_string(const std::string& name) {
  for (auto k : {AcquisitionKind::Jes, AcquisitionKind::Mes, AcquisitionKind::Ei, AcquisitionKind::Random})
    if (to_string(k) == name) return k;
  throw std::invalid_argument("unknown acquisition '" + name + "'");
}

inline std::string to_string(Branch b) {
  switch (b) {
    case Branch::Init: return "init";
    case Branch::Exploit: return "exploit";
    case Branch::Acquire: return "acquisition";
  }
  return "unknown";
}

inline std::string to_string(HyperMode m) {
  switch (m) {
    case HyperMode::Fixed: return "FIXED";
    case HyperMode::Map: return "MAP";
    case HyperMode::Ensemble: return "ENSEMBLE";
  }
  return "UNKNOWN";
}

inline HyperMode hyper_mode_from_string(const std::string& name) {
  for (auto m : {HyperMode::Fixed, HyperMode::Map, HyperMode::Ensemble})
    if (to_string(m) == name) return m;
  throw std::invalid_argument("unknown hyperparameter mode '" + name + "'");
}

struct BOConfig {
  AcquisitionKind acquisition = AcquisitionKind::Jes;
  int n_init = 0;   // M; 0 means D + 1
  int n_iters = 0;  // N; 0 means 50 D
  int n_mc_samples = 100;  // L
  double gamma = 0.0;
  HyperMode hyper_mode = HyperMode::Fixed;
  int hyper_refresh_every = 5;
  int n_hyper_sets = 1;  // S
  std::optional<KernelParams> fixed_params;  // defaults to the task's generator parameters
  SamplerConfig sampler;
  Eigen::Index acq_grid_size = 2000;
  int acq_refine_iters = 5;
  Eigen::Index rec_grid_size = 4000;
  int rec_refine_iters = 10;

  int init_for(Eigen::Index dim) const { return n_init > 0 ? n_init : static_cast<int>(dim) + 1; }
  int iters_for(Eigen::Index dim) const { return n_iters > 0 ? n_iters : 50 * static_cast<int>(dim); }

  void validate() const {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("BOConfig: gamma must lie in [0, 1]");
    if (n_init < 0) throw std::invalid_argument("BOConfig: n_init must be >= 1 (or 0 for the default)");
    if (n_iters < 0) throw std::invalid_argument("BOConfig: n_iters must be >= 1 (or 0 for the default)");
    if (n_mc_samples < 1) throw std::invalid_argument("BOConfig: n_mc_samples must be >= 1");
    if (n_hyper_sets < 1) throw std::invalid_argument("BOConfig: n_hyper_sets must be >= 1");
    if (hyper_refresh_every < 1) throw std::invalid_argument("BOConfig: hyper_refresh_every must be >= 1");
    if (acq_grid_size < 1 || rec_grid_size < 1) throw std::invalid_argument("BOConfig: grid sizes must be >= 1");
  }
};

struct TraceRow {
  int iteration = 0;
  Vector x;
  double y = 0.0;
  Branch branch = Branch::Init;
  Vector recommendation;
  double simple_regret = 0.0;
  double inference_regret = 0.0;
  double acq_time_ms = 0.0;
};

struct Trace {
  std::vector<TraceRow> rows;
  Vector final_recommendation;
  int n_init = 0;
  std::vector<std::string> warnings;
};

/// EXPLOIT iff draw < gamma.
inline Branch gamma_branch(double draw, double gamma) { return draw < gamma ? Branch::Exploit : Branch::Acquire; }

/// Argmax of the posterior mean over a scrambled grid plus the training inputs.
inline Vector recommend(const GPPosterior& posterior, const Bounds& bounds, Eigen::Index grid_size, int refine_iters,
                        std::uint64_t seed) {
  MaximizeOptions opts;
  opts.grid_size = grid_size;
  opts.refine_iters = refine_iters;
  auto point = [&posterior](const Vector& x) { return posterior.mean(x); };
  auto batch = [&posterior](const Matrix& pts) { return posterior.mean_batch(pts); };
  const Matrix& inputs = posterior.inputs();
  return maximize_on_box(point, batch, bounds, opts, seed, inputs.cols() > 0 ? &inputs : nullptr).x;
}

namespace detail {

enum Stream : std::uint64_t { kInit = 1, kGamma, kRandom, kNoise, kHyper, kPairs, kAcq, kRec };

// Model-space view of the data: outputs shifted/scaled by the current
// standardization, every observation carrying the set's noise variance.
struct ModelState {
  std::vector<KernelParams> sets;
  double shift = 0.0;
  double scale = 1.0;

  std::vector<Observation> model_data(const std::vector<Observation>& raw, const KernelParams& params) const {
    std::vector<Observation> out;
    out.reserve(raw.size());
    for (const auto& o : raw) out.push_back({o.x, (o.y - shift) / scale, params.noise_variance});
    return out;
  }
};

inline std::vector<int> split_samples(int total, int sets) {
  std::vector<int> counts(static_cast<std::size_t>(sets), total / sets);
  for (int i = 0; i < total % sets; ++i) ++counts[static_cast<std::size_t>(i)];
  for (auto& c : counts) c = std::max(c, 1);
  return counts;
}

}  // namespace detail

inline Trace run_bo(const Task& task, const BOConfig& config, std::uint64_t seed) {
  config.validate();
  const Bounds& bounds = task.bounds;
  const Eigen::Index dim = bounds.dim();
  const int n_init = config.init_for(dim);
  const int n_iters = config.iters_for(dim);

  HyperFitConfig hyper;
  hyper.mode = config.hyper_mode;
  hyper.n_sets = config.n_hyper_sets;
  if (config.hyper_mode == HyperMode::Fixed) {
    hyper.fixed = config.fixed_params ? config.fixed_params : task.kernel_params;
    if (!hyper.fixed) throw std::invalid_argument("run_bo: FIXED hyperparameters requested but none available");
    check_dim(hyper.fixed->length_scales, dim, "run_bo fixed parameters");
  }

  std::mt19937_64 gamma_rng(derive_seed(seed, detail::kGamma));
  std::mt19937_64 random_rng(derive_seed(seed, detail::kRandom));
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  Trace trace;
  trace.n_init = n_init;
  std::vector<Observation> raw;
  double best_noiseless = -std::numeric_limits<double>::infinity();

  auto evaluate = [&](const Vector& x, int iteration) {
    try {
      const double y = observe(task, x, derive_seed(seed, detail::kNoise, static_cast<std::uint64_t>(iteration)));
      best_noiseless = std::max(best_noiseless, task.noiseless_eval(x));
      return y;
    } catch (const std::exception& e) {
      throw std::runtime_error("run_bo: objective evaluation failed at iteration " + std::to_string(iteration) +
                               ": " + e.what());
    }
  };
  auto record = [&](int iteration, const Vector& x, double y, Branch branch, Vector rec, double ms) {
    const Regrets r = regrets(task, best_noiseless, rec);
    trace.rows.push_back({iteration, x, y, branch, std::move(rec), r.simple, r.inference, ms});
  };

  const Matrix design = sobol_in_box(bounds, n_init, derive_seed(seed, detail::kInit));
  for (int i = 0; i < n_init; ++i) {
    const Vector x = design.col(i);
    const double y = evaluate(x, i);
    raw.push_back({x, y, task.noise_variance});
    std::size_t best = 0;
    for (std::size_t j = 1; j < raw.size(); ++j)
      if (raw[j].y > raw[best].y) best = j;
    record(i, x, y, Branch::Init, raw[best].x, 0.0);
  }

  detail::ModelState model;
  for (int t = 0; t < n_iters; ++t) {
    const int iteration = n_init + t;
    const auto ut = static_cast<std::uint64_t>(iteration);

    if (model.sets.empty() || (config.hyper_mode != HyperMode::Fixed && t % config.hyper_refresh_every == 0)) {
      if (config.hyper_mode == HyperMode::Fixed) {
        model.sets = {*hyper.fixed};
      } else {
        double mean = 0.0;
        for (const auto& o : raw) mean += o.y;
        mean /= static_cast<double>(raw.size());
        double var = 0.0;
        for (const auto& o : raw) var += (o.y - mean) * (o.y - mean);
        var /= static_cast<double>(std::max<std::size_t>(1, raw.size() - 1));
        model.shift = mean;
        model.scale = var > 1e-24 ? std::sqrt(var) : 1.0;
        std::vector<Observation> standardized = model.model_data(raw, KernelParams::isotropic(dim, 1.0, 1.0, 0.0));
        HyperFitResult fit = fit_hyperparameters(standardized, bounds, hyper, derive_seed(seed, detail::kHyper, ut));
        model.sets = std::move(fit.sets);
        for (auto& w : fit.warnings) trace.warnings.push_back("iteration " + std::to_string(iteration) + ": " + w);
      }
    }

    std::vector<GPPosterior> posteriors;
    posteriors.reserve(model.sets.size());
    for (const auto& params : model.sets) posteriors.push_back(fit_posterior(model.model_data(raw, params), params));

    const Branch branch = gamma_branch(uniform(gamma_rng), config.gamma);
    const auto start = std::chrono::steady_clock::now();
    Vector x;
    if (branch == Branch::Exploit) {
      x = recommend(posteriors.front(), bounds, config.rec_grid_size, config.rec_refine_iters,
                    derive_seed(seed, detail::kRec, ut));
    } else {
      const std::uint64_t acq_seed = derive_seed(seed, detail::kAcq, ut);
      switch (config.acquisition) {
        case AcquisitionKind::Random: {
          x.resize(dim);
          for (Eigen::Index d = 0; d < dim; ++d)
            x[d] = bounds.lower[d] + uniform(random_rng) * (bounds.upper[d] - bounds.lower[d]);
          break;
        }
        case AcquisitionKind::Ei: {
          std::vector<EiAcquisition::Component> parts;
          for (const auto& p : posteriors) parts.push_back({p, ei_incumbent(p)});
          x = optimize_acquisition(EiAcquisition(std::move(parts)), bounds, config.acq_grid_size,
                                   config.acq_refine_iters, acq_seed)
                  .x;
          break;
        }
        case AcquisitionKind::Jes:
        case AcquisitionKind::Mes: {
          const std::vector<int> counts = detail::split_samples(config.n_mc_samples, static_cast<int>(posteriors.size()));
          std::vector<ConditionedEnsemble> ensembles;
          std::vector<MesAcquisition::Component> mes_parts;
          for (std::size_t s = 0; s < posteriors.size(); ++s) {
            const std::vector<OptPair> pairs = sample_opt_pairs(posteriors[s], bounds, counts[s], config.sampler,
                                                                derive_seed(seed, detail::kPairs, ut * 1024 + s));
            if (config.acquisition == AcquisitionKind::Jes) {
              ensembles.push_back(build_conditioned_ensemble(posteriors[s], pairs));
            } else {
              std::vector<double> f_stars;
              f_stars.reserve(pairs.size());
              for (const auto& p : pairs) f_stars.push_back(p.f_star);
              mes_parts.push_back({posteriors[s], std::move(f_stars)});
            }
          }
          if (config.acquisition == AcquisitionKind::Jes) {
            x = optimize_acquisition(JesAcquisition(std::move(ensembles)), bounds, config.acq_grid_size,
                                     config.acq_refine_iters, acq_seed)
                    .x;
          } else {
            x = optimize_acquisition(MesAcquisition(std::move(mes_parts)), bounds, config.acq_grid_size,
                                     config.acq_refine_iters, acq_seed)
                    .x;
          }
          break;
        }
      }
    }
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    x = bounds.clamp(x);

    const double y = evaluate(x, iteration);
    raw.push_back({x, y, task.noise_variance});
    const KernelParams& map = model.sets.front();
    const GPPosterior updated =
        rank_one_extend(posteriors.front(), Observation{x, (y - model.shift) / model.scale, map.noise_variance});
    Vector rec = recommend(updated, bounds, config.rec_grid_size, config.rec_refine_iters,
                           derive_seed(seed, detail::kRec, ut + 1));
    record(iteration, x, y, branch, std::move(rec), ms);
  }
  trace.final_recommendation = trace.rows.back().recommendation;
  return trace;
}

}  // namespace jesbo
