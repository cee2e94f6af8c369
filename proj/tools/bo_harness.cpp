// Command-line experiment runner.
//
//   bo_harness run --config exp.json --out results.csv [--workers N]
//   bo_harness approx-study --out approx.csv [--n-mc N] [--seed S]
//   bo_harness summarize --in results.csv --out summary.json [--group task,acq,iteration]
//   bo_harness list-tasks
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "jesbo/jesbo.hpp"

namespace {

int default_workers() {
  if (const char* env = std::getenv("BO_WORKERS")) {
    try {
      return std::max(1, std::stoi(env));
    } catch (const std::exception&) {
      std::cerr << "warning: ignoring invalid BO_WORKERS='" << env << "'\n";
    }
  }
  return 1;
}

int cmd_run(const std::string& config_path, std::string out, int workers, bool workers_set) {
  jesbo::ExperimentConfig cfg = jesbo::load_experiment_config(config_path);
  if (workers_set) cfg.workers = workers;
  else if (std::getenv("BO_WORKERS")) cfg.workers = default_workers();
  if (out.empty()) out = cfg.output;
  if (out.empty()) throw std::invalid_argument("no output path: pass --out or set \"output\" in the config");
  const jesbo::ExperimentResult res = jesbo::run_experiment(cfg, out);
  std::cerr << "wrote " << res.rows.size() << " rows from " << res.n_runs - res.failures.size() << "/" << res.n_runs
            << " runs to " << out << '\n';
  if (!res.failures.empty()) {
    for (const auto& f : res.failures)
      std::cerr << "run failed: " << f.task << " " << f.acq << " seed " << f.seed << ": " << f.error << '\n';
    std::cerr << "failure manifest: " << jesbo::failure_manifest_path(out) << '\n';
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian optimization experiment harness (JES, MES, EI)"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run tasks x acquisitions x seeds from a JSON config");
  std::string config_path;
  std::string run_out;
  int workers = 1;
  run->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--out", run_out, "Output CSV path");
  auto* workers_opt = run->add_option("--workers", workers, "Parallel workers (default: $BO_WORKERS or 1)")
                          ->check(CLI::PositiveNumber);

  auto* approx = app.add_subcommand("approx-study", "Moment matching vs Monte Carlo truncation entropy grid");
  std::string approx_out;
  std::size_t n_mc = 200000;
  std::uint64_t approx_seed = 0;
  std::vector<double> ratios{1e-3, 1e-2, 0.1, 0.5};
  std::vector<double> quantiles{1e-6, 1e-4, 1e-2, 0.5};
  approx->add_option("--out", approx_out, "Output CSV path")->required();
  approx->add_option("--n-mc", n_mc, "Monte Carlo samples per cell")->check(CLI::Range(1000ul, 100000000ul));
  approx->add_option("--seed", approx_seed, "Random seed");
  approx->add_option("--ratios", ratios, "Noise variance ratios in (0,1)")->delimiter(',');
  approx->add_option("--quantiles", quantiles, "Truncation quantiles in (0,1)")->delimiter(',');

  auto* summ = app.add_subcommand("summarize", "Summarize a results CSV into log-regret statistics (JSON)");
  std::string summ_in;
  std::string summ_out;
  std::vector<std::string> group{"task", "acq", "iteration"};
  summ->add_option("--in", summ_in, "Results CSV")->required()->check(CLI::ExistingFile);
  summ->add_option("--out", summ_out, "Output JSON path")->required();
  summ->add_option("--group", group, "Group keys")->delimiter(',');

  auto* list = app.add_subcommand("list-tasks", "Print the built-in task descriptors as JSON");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config_path, run_out, workers, workers_opt->count() > 0);
    if (*approx) {
      const auto cells = jesbo::approx_study(ratios, quantiles, n_mc, approx_seed);
      jesbo::write_approx_csv(approx_out, cells);
      std::cerr << "wrote " << cells.size() << " cells to " << approx_out << '\n';
      return 0;
    }
    if (*summ) {
      const nlohmann::json summary = jesbo::summarize(summ_in, group);
      std::ofstream out(summ_out);
      if (!out) throw std::runtime_error("cannot write '" + summ_out + "'");
      out << summary.dump(2) << '\n';
      return 0;
    }
    if (*list) {
      nlohmann::json tasks = nlohmann::json::array();
      for (int d : {2, 4, 6, 12}) {
        const jesbo::KernelParams p = jesbo::gp_sample_params(d);
        tasks.push_back({{"kind", "gp_sample"},
                         {"dimension", d},
                         {"kernel", {{"length_scale", p.length_scales[0]},
                                     {"output_scale", p.output_scale},
                                     {"noise_variance", p.noise_variance}}},
                         {"bounds", {{"lower", std::vector<double>(d, 0.0)}, {"upper", std::vector<double>(d, 1.0)}}}});
      }
      for (auto fn : {jesbo::SyntheticFunction::Branin, jesbo::SyntheticFunction::Hartmann3,
                      jesbo::SyntheticFunction::Hartmann6, jesbo::SyntheticFunction::Levy8,
                      jesbo::SyntheticFunction::Michalewicz10}) {
        const jesbo::Bounds b = jesbo::synthetic_bounds(fn);
        tasks.push_back({{"kind", "synthetic"},
                         {"name", jesbo::to_string(fn)},
                         {"dimension", b.dim()},
                         {"noise_variance", jesbo::kDefaultSyntheticNoise},
                         {"bounds", {{"lower", std::vector<double>(b.lower.data(), b.lower.data() + b.dim())},
                                     {"upper", std::vector<double>(b.upper.data(), b.upper.data() + b.dim())}}}});
      }
      std::cout << tasks.dump(2) << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
