// Experiment harness: JSON experiment configs, parallel execution of
// (task, acquisition, seed) runs, CSV results, log-regret summaries, and the
// moment-matching vs Monte Carlo truncation-entropy study.
#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <nlohmann/json.hpp>

#include "jesbo/bo.hpp"
#include "jesbo/gauss_math.hpp"

namespace jesbo {

inline constexpr const char* kResultHeader =
    "task,acq,seed,iteration,branch,x,y,simple_regret,inference_regret,acq_time_ms";
inline constexpr int kResultSchemaVersion = 1;
inline constexpr double kRegretFloor = 1e-10;

inline std::string format_double(double v) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(n));
}

// ---------------------------------------------------------------------------
// Configuration

struct RunSpec {
  nlohmann::json task;
  AcquisitionKind acquisition;
  std::uint64_t seed;
  BOConfig bo;
};

struct ExperimentConfig {
  std::vector<nlohmann::json> tasks;
  std::vector<AcquisitionKind> acquisitions;
  std::vector<std::uint64_t> seeds;
  nlohmann::json bo_overrides = nlohmann::json::object();
  int workers = 1;
  std::string output;

  void validate() const {
    if (tasks.empty()) throw std::invalid_argument("experiment config: no tasks");
    if (acquisitions.empty()) throw std::invalid_argument("experiment config: no acquisitions");
    if (seeds.empty()) throw std::invalid_argument("experiment config: no seeds");
    if (workers < 1) throw std::invalid_argument("experiment config: workers must be >= 1");
  }
};

/// Apply JSON overrides onto a BOConfig. Unknown keys are rejected.
inline void apply_overrides(BOConfig& cfg, const nlohmann::json& j) {
  for (const auto& [key, value] : j.items()) {
    if (key == "acquisition") cfg.acquisition = acquisition_from_string(value.get<std::string>());
    else if (key == "n_init") cfg.n_init = value.get<int>();
    else if (key == "n_iters") cfg.n_iters = value.get<int>();
    else if (key == "n_mc_samples") cfg.n_mc_samples = value.get<int>();
    else if (key == "gamma") cfg.gamma = value.get<double>();
    else if (key == "hyper_mode") cfg.hyper_mode = hyper_mode_from_string(value.get<std::string>());
    else if (key == "hyper_refresh_every") cfg.hyper_refresh_every = value.get<int>();
    else if (key == "n_hyper_sets") cfg.n_hyper_sets = value.get<int>();
    else if (key == "rff_features") cfg.sampler.n_features = value.get<Eigen::Index>();
    else if (key == "path_grid_size") cfg.sampler.grid_size = value.get<Eigen::Index>();
    else if (key == "path_refine_iters") cfg.sampler.refine_iters = value.get<int>();
    else if (key == "acq_grid_size") cfg.acq_grid_size = value.get<Eigen::Index>();
    else if (key == "acq_refine_iters") cfg.acq_refine_iters = value.get<int>();
    else if (key == "rec_grid_size") cfg.rec_grid_size = value.get<Eigen::Index>();
    else if (key == "rec_refine_iters") cfg.rec_refine_iters = value.get<int>();
    else if (key == "fixed_params") {
      const auto ls = value.at("length_scales").get<std::vector<double>>();
      cfg.fixed_params = KernelParams(Eigen::Map<const Vector>(ls.data(), static_cast<Eigen::Index>(ls.size())),
                                      value.at("output_scale").get<double>(), value.at("noise_variance").get<double>());
    } else {
      throw std::invalid_argument("unknown BO config key '" + key + "'");
    }
  }
  cfg.validate();
}

inline ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
  ExperimentConfig cfg;
  for (const auto& t : j.at("tasks")) cfg.tasks.push_back(t);
  for (const auto& a : j.at("acquisitions")) cfg.acquisitions.push_back(acquisition_from_string(a.get<std::string>()));
  const auto& seeds = j.at("seeds");
  if (seeds.is_array()) {
    for (const auto& s : seeds) cfg.seeds.push_back(s.get<std::uint64_t>());
  } else {
    const auto start = seeds.value("start", std::uint64_t{0});
    const auto count = seeds.at("count").get<std::uint64_t>();
    for (std::uint64_t s = 0; s < count; ++s) cfg.seeds.push_back(start + s);
  }
  if (j.contains("bo")) cfg.bo_overrides = j.at("bo");
  cfg.workers = j.value("workers", 1);
  cfg.output = j.value("output", std::string());
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path + "'");
  return parse_experiment_config(nlohmann::json::parse(in));
}

/// Runs in deterministic (task, acquisition, seed) order.
inline std::vector<RunSpec> expand_runs(const ExperimentConfig& cfg) {
  std::vector<RunSpec> runs;
  for (const auto& task : cfg.tasks) {
    for (const auto acq : cfg.acquisitions) {
      for (const auto seed : cfg.seeds) {
        BOConfig bo;
        apply_overrides(bo, cfg.bo_overrides);
        if (task.contains("bo")) apply_overrides(bo, task.at("bo"));
        bo.acquisition = acq;
        runs.push_back({task, acq, seed, bo});
      }
    }
  }
  return runs;
}

// ---------------------------------------------------------------------------
// Results

struct ResultRow {
  std::string task;
  std::string acq;
  std::uint64_t seed = 0;
  int iteration = 0;
  std::string branch;
  Vector x;
  double y = 0.0;
  double simple_regret = 0.0;
  double inference_regret = 0.0;
  double acq_time_ms = 0.0;

  std::string to_csv(bool with_timing = true) const {
    std::string xs;
    for (Eigen::Index d = 0; d < x.size(); ++d) {
      if (d > 0) xs += ';';
      xs += format_double(x[d]);
    }
    std::string line = task + ',' + acq + ',' + std::to_string(seed) + ',' + std::to_string(iteration) + ',' +
                       branch + ',' + xs + ',' + format_double(y) + ',' + format_double(simple_regret) + ',' +
                       format_double(inference_regret) + ',';
    if (with_timing) line += format_double(acq_time_ms);
    return line;
  }
};

inline std::vector<ResultRow> to_rows(const std::string& task, AcquisitionKind acq, std::uint64_t seed,
                                      const Trace& trace) {
  std::vector<ResultRow> rows;
  rows.reserve(trace.rows.size());
  for (const auto& r : trace.rows)
    rows.push_back({task, to_string(acq), seed, r.iteration, to_string(r.branch), r.x, r.y, r.simple_regret,
                    r.inference_regret, r.acq_time_ms});
  return rows;
}

struct RunFailure {
  std::string task;
  std::string acq;
  std::uint64_t seed;
  std::string error;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;
  std::vector<RunFailure> failures;
  std::size_t n_runs = 0;
};

/// Execute all runs on a pool of `workers` threads. Rows come back in run
/// order regardless of completion order.
inline ExperimentResult execute_runs(const std::vector<RunSpec>& runs, int workers) {
  std::vector<std::optional<std::vector<ResultRow>>> results(runs.size());
  std::vector<std::optional<RunFailure>> failures(runs.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&]() {
    for (std::size_t i = next.fetch_add(1); i < runs.size(); i = next.fetch_add(1)) {
      const RunSpec& run = runs[i];
      std::string task_name = run.task.value("kind", std::string("task"));
      try {
        const Task task = make_task(run.task, run.seed);
        task_name = task.name;
        const Trace trace = run_bo(task, run.bo, run.seed);
        results[i] = to_rows(task.name, run.acquisition, run.seed, trace);
      } catch (const std::exception& e) {
        failures[i] = RunFailure{task_name, to_string(run.acquisition), run.seed, e.what()};
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(workers, static_cast<int>(runs.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  ExperimentResult out;
  out.n_runs = runs.size();
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (results[i]) out.rows.insert(out.rows.end(), results[i]->begin(), results[i]->end());
    if (failures[i]) out.failures.push_back(*failures[i]);
  }
  return out;
}

inline void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write results to '" + path + "'");
  out << kResultHeader << '\n';
  for (const auto& r : rows) out << r.to_csv() << '\n';
}

inline std::string failure_manifest_path(const std::string& csv_path) { return csv_path + ".failures.json"; }

/// Run an experiment and write its CSV. On any failure the successful rows
/// are still written, together with a JSON failure manifest next to the CSV.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::string& out_path) {
  cfg.validate();
  ExperimentResult res = execute_runs(expand_runs(cfg), cfg.workers);
  write_results_csv(out_path, res.rows);
  if (!res.failures.empty()) {
    nlohmann::json manifest = {{"schema_version", kResultSchemaVersion},
                               {"n_runs", res.n_runs},
                               {"n_failed", res.failures.size()},
                               {"failures", nlohmann::json::array()}};
    for (const auto& f : res.failures)
      manifest["failures"].push_back({{"task", f.task}, {"acq", f.acq}, {"seed", f.seed}, {"error", f.error}});
    std::ofstream(failure_manifest_path(out_path)) << manifest.dump(2) << '\n';
  }
  return res;
}

// ---------------------------------------------------------------------------
// Summaries

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline double parse_number(const std::string& s, std::size_t line, const char* column) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw std::runtime_error("malformed CSV at line " + std::to_string(line) + ": bad " + column + " value '" + s + "'");
  return v;
}

}  // namespace detail

inline std::vector<ResultRow> read_results_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open results '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("malformed CSV at line 1: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kResultHeader) throw std::runtime_error("malformed CSV at line 1: unexpected header '" + line + "'");
  std::vector<ResultRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = detail::split(line, ',');
    if (f.size() != 10)
      throw std::runtime_error("malformed CSV at line " + std::to_string(lineno) + ": expected 10 fields, got " +
                               std::to_string(f.size()));
    ResultRow r;
    r.task = f[0];
    r.acq = f[1];
    r.seed = static_cast<std::uint64_t>(detail::parse_number(f[2], lineno, "seed"));
    r.iteration = static_cast<int>(detail::parse_number(f[3], lineno, "iteration"));
    r.branch = f[4];
    const auto xs = detail::split(f[5], ';');
    r.x.resize(static_cast<Eigen::Index>(xs.size()));
    for (std::size_t d = 0; d < xs.size(); ++d) r.x[static_cast<Eigen::Index>(d)] = detail::parse_number(xs[d], lineno, "x");
    r.y = detail::parse_number(f[6], lineno, "y");
    r.simple_regret = detail::parse_number(f[7], lineno, "simple_regret");
    r.inference_regret = detail::parse_number(f[8], lineno, "inference_regret");
    r.acq_time_ms = f[9].empty() ? 0.0 : detail::parse_number(f[9], lineno, "acq_time_ms");
    rows.push_back(std::move(r));
  }
  return rows;
}

struct LogStats {
  double mean = 0.0;
  double median = 0.0;
  double std_err = 0.0;
};

/// Mean, median and standard error of ln(max(r, floor)).
inline LogStats log_regret_stats(std::vector<double> regrets) {
  if (regrets.empty()) return {};
  for (auto& r : regrets) r = std::log(std::max(r, kRegretFloor));
  const double n = static_cast<double>(regrets.size());
  double mean = 0.0;
  for (double v : regrets) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : regrets) ss += (v - mean) * (v - mean);
  const double se = regrets.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  std::sort(regrets.begin(), regrets.end());
  const std::size_t mid = regrets.size() / 2;
  const double median = regrets.size() % 2 ? regrets[mid] : 0.5 * (regrets[mid - 1] + regrets[mid]);
  return {mean, median, se};
}

/// Group rows by `group_keys` (subset of task, acq, seed, iteration, branch)
/// and summarize log simple/inference regret per group.
inline nlohmann::json summarize_rows(const std::vector<ResultRow>& rows,
                                     const std::vector<std::string>& group_keys = {"task", "acq", "iteration"}) {
  for (const auto& k : group_keys)
    if (k != "task" && k != "acq" && k != "seed" && k != "iteration" && k != "branch")
      throw std::invalid_argument("summarize: unknown group key '" + k + "'");

  auto key_of = [&](const ResultRow& r) {
    std::vector<std::string> key;
    for (const auto& k : group_keys) {
      if (k == "task") key.push_back(r.task);
      else if (k == "acq") key.push_back(r.acq);
      else if (k == "seed") key.push_back(std::to_string(r.seed));
      else if (k == "iteration") key.push_back(std::to_string(r.iteration));
      else key.push_back(r.branch);
    }
    return key;
  };
  // Natural ordering: numeric keys compare numerically.
  auto less = [&](const std::vector<std::string>& a, const std::vector<std::string>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i] == b[i]) continue;
      if (group_keys[i] == "iteration" || group_keys[i] == "seed") return std::stoll(a[i]) < std::stoll(b[i]);
      return a[i] < b[i];
    }
    return false;
  };
  std::map<std::vector<std::string>, std::pair<std::vector<double>, std::vector<double>>, decltype(less)> groups(less);
  std::map<std::pair<std::string, std::string>, std::map<std::uint64_t, int>> init_counts;
  for (const auto& r : rows) {
    auto& g = groups[key_of(r)];
    g.first.push_back(r.simple_regret);
    g.second.push_back(r.inference_regret);
    auto& per_seed = init_counts[{r.task, r.acq}];
    if (r.branch == "init") ++per_seed[r.seed];
    else per_seed.try_emplace(r.seed, 0);
  }

  nlohmann::json out;
  out["metadata"] = {{"schema_version", kResultSchemaVersion},
                     {"regret_floor", kRegretFloor},
                     {"log_base", "e"},
                     {"group_keys", group_keys}};
  nlohmann::json n_init = nlohmann::json::array();
  for (const auto& [key, per_seed] : init_counts) {
    int m = 0;
    for (const auto& [seed, c] : per_seed) m = std::max(m, c);
    n_init.push_back({{"task", key.first}, {"acq", key.second}, {"n_init", m}});
  }
  out["n_init"] = n_init;
  nlohmann::json groups_json = nlohmann::json::array();
  for (const auto& [key, values] : groups) {
    nlohmann::json g;
    for (std::size_t i = 0; i < group_keys.size(); ++i) {
      if (group_keys[i] == "iteration" || group_keys[i] == "seed") g[group_keys[i]] = std::stoll(key[i]);
      else g[group_keys[i]] = key[i];
    }
    g["n"] = values.first.size();
    const LogStats s = log_regret_stats(values.first);
    const LogStats inf = log_regret_stats(values.second);
    g["simple"] = {{"mean", s.mean}, {"median", s.median}, {"se", s.std_err}};
    g["inference"] = {{"mean", inf.mean}, {"median", inf.median}, {"se", inf.std_err}};
    groups_json.push_back(std::move(g));
  }
  out["groups"] = std::move(groups_json);
  return out;
}

inline nlohmann::json summarize(const std::string& csv_path,
                                const std::vector<std::string>& group_keys = {"task", "acq", "iteration"}) {
  return summarize_rows(read_results_csv(csv_path), group_keys);
}

// ---------------------------------------------------------------------------
// Moment-matching approximation study

struct ApproxCell {
  double noise_ratio;
  double quantile;
  double mm_reduction;
  double mc_reduction;
  double std_err;
  double ratio;
};

inline constexpr const char* kApproxHeader = "noise_ratio,quantile,mm_reduction,mc_reduction,std_err,ratio";

/// For each (noise ratio r, truncation quantile q): total variance 1 split
/// into var_f = 1 - r and var_noise = r, f truncated above so that mass q is
/// retained. Compares the entropy reduction of y = f + eps from truncation,
/// moment-matched vs Monte Carlo.
inline ApproxCell approx_cell(double noise_ratio, double quantile, std::size_t n_mc, std::uint64_t seed) {
  if (!(noise_ratio > 0.0 && noise_ratio < 1.0)) throw std::invalid_argument("approx_study: noise ratio must be in (0,1)");
  if (!(quantile > 0.0 && quantile < 1.0)) throw std::invalid_argument("approx_study: quantile must be in (0,1)");
  const double var_f = 1.0 - noise_ratio;
  const double var_noise = noise_ratio;
  const double upper = std::sqrt(var_f) * boost::math::quantile(boost::math::normal(), quantile);
  const double h_prior = gaussian_entropy(var_f + var_noise);
  const double mm = h_prior - gaussian_entropy(truncated_moments(0.0, var_f, upper).variance + var_noise);
  const EntropyEstimate mc = mc_truncation_entropy(0.0, var_f, var_noise, upper, n_mc, seed);
  const double mc_red = h_prior - mc.entropy;
  return {noise_ratio, quantile, mm, mc_red, mc.std_err, mm / mc_red};
}

inline std::vector<ApproxCell> approx_study(const std::vector<double>& noise_ratios, const std::vector<double>& quantiles,
                                            std::size_t n_mc, std::uint64_t seed) {
  std::vector<ApproxCell> cells;
  for (std::size_t i = 0; i < noise_ratios.size(); ++i)
    for (std::size_t j = 0; j < quantiles.size(); ++j)
      cells.push_back(approx_cell(noise_ratios[i], quantiles[j], n_mc, derive_seed(seed, i, j)));
  return cells;
}

inline void write_approx_csv(const std::string& path, const std::vector<ApproxCell>& cells) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write approx study to '" + path + "'");
  out << kApproxHeader << '\n';
  for (const auto& c : cells)
    out << format_double(c.noise_ratio) << ',' << format_double(c.quantile) << ',' << format_double(c.mm_reduction)
        << ',' << format_double(c.mc_reduction) << ',' << format_double(c.std_err) << ',' << format_double(c.ratio)
        << '\n';
}

}  // namespace jesbo
