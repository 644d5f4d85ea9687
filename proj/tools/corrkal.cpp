// Command-line harness for the correlated-noise identification experiments.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "corrkal/errors.hpp"
#include "corrkal/experiment.hpp"
#include "corrkal/text.hpp"

namespace {

constexpr int kExitError = 1;
constexpr int kExitDiverged = 3;

struct CommonOptions {
  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::optional<double> rho;
  std::string algo;
  unsigned jobs = 1;
  std::string out;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool with_jobs) {
  auto* config = cmd->add_option("--config", o.config, "experiment config file")->check(CLI::ExistingFile);
  cmd->add_option("--preset", o.preset, "bundled experiment")
      ->check(CLI::IsMember({"ex1", "ex2"}))
      ->excludes(config);
  cmd->add_option("--seed", o.seed, "RNG seed (default: CORRKAL_SEED or 1)");
  cmd->add_option("--rho", o.rho, "correlation coefficient")->check(CLI::Range(-1.0, 1.0));
  cmd->add_option("--algo", o.algo, "kf-cn-rgels | skf | aug-kf")
      ->check(CLI::IsMember({"kf-cn-rgels", "skf", "aug-kf"}));
  if (with_jobs) cmd->add_option("--jobs", o.jobs, "parallel runs")->check(CLI::PositiveNumber);
}

corrkal::ExperimentConfig resolve(const CommonOptions& o, bool sweep) {
  corrkal::ExperimentConfig cfg;
  if (!o.config.empty()) {
    cfg = corrkal::load_config(o.config);
  } else {
    cfg = corrkal::preset_config(o.preset.empty() ? "ex1" : o.preset);
    cfg.seed = corrkal::default_seed();
  }
  if (o.seed) {
    cfg.seed = *o.seed;
    if (sweep) cfg.run.seed_list = {*o.seed};
  }
  if (o.rho) {
    cfg.noise.rho = *o.rho;
    if (sweep) cfg.run.rho_list = {*o.rho};
  }
  if (!o.algo.empty()) {
    cfg.run.algorithm = corrkal::parse_algorithm(o.algo);
    if (sweep) cfg.run.algorithms = {cfg.run.algorithm};
  }
  cfg.validate();
  return cfg;
}

void print_matrix(const char* label, const Eigen::MatrixXd& m) {
  std::cout << label << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::cout << "  ";
    for (Eigen::Index j = 0; j < m.cols(); ++j) std::cout << ' ' << corrkal::text::format_fixed(m(i, j), 6);
    std::cout << '\n';
  }
}

void print_outcome(const corrkal::IdentifyOutcome& o) {
  std::cout << corrkal::to_string(o.tag.algorithm) << ": ";
  if (o.diverged) {
    std::cout << "DIVERGED (" << o.message << ")\n";
    return;
  }
  std::cout << "theta = " << corrkal::text::format_vector(o.result->theta_final);
  if (o.delta_pct) std::cout << "  delta = " << corrkal::text::format_fixed(*o.delta_pct, 4) << '%';
  if (o.rmse_x1) std::cout << "  rmse_x1 = " << corrkal::text::format_fixed(*o.rmse_x1, 6);
  std::cout << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint state and parameter estimation under correlated noise"};
  app.require_subcommand(1);

  CommonOptions sim_o, id_o, cmp_o, sweep_o;
  std::string id_data, cmp_data, analyze_runs, analyze_out;

  auto* sim = app.add_subcommand("simulate", "simulate a dataset");
  add_common(sim, sim_o, false);
  sim->add_option("--out", sim_o.out, "dataset CSV path")->required();

  auto* identify = app.add_subcommand("identify", "run one identification on a dataset");
  add_common(identify, id_o, false);
  identify->add_option("--data", id_data, "dataset CSV")->required()->check(CLI::ExistingFile);
  identify->add_option("--out", id_o.out, "output directory")->required();

  auto* compare = app.add_subcommand("compare", "run all three algorithms on one dataset");
  add_common(compare, cmp_o, false);
  compare->add_option("--data", cmp_data, "dataset CSV")->required()->check(CLI::ExistingFile);
  compare->add_option("--out", cmp_o.out, "output directory")->required();

  auto* sweep = app.add_subcommand("sweep", "every (algorithm, rho, seed) combination");
  add_common(sweep, sweep_o, true);
  sweep->add_option("--out", sweep_o.out, "output directory")->required();

  auto* analyze = app.add_subcommand("analyze", "covariance tables and plot data from stored runs");
  analyze->add_option("runs", analyze_runs, "sweep root or single run directory")->required();
  analyze->add_option("--out", analyze_out, "output directory (default: <runs>/analysis)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      const auto cfg = resolve(sim_o, false);
      const auto summary = corrkal::cmd_simulate(cfg, sim_o.out);
      std::cout << "wrote " << sim_o.out << " (L = " << summary.length << ", rho = "
                << corrkal::text::format_double(cfg.noise.rho) << ", seed = " << cfg.seed << ")\n";
      print_matrix("empirical U:", summary.empirical_u);
      print_matrix("theoretical U:", summary.theoretical_u);
      return 0;
    }
    if (identify->parsed()) {
      const auto cfg = resolve(id_o, false);
      std::optional<corrkal::NoiseSpec> assumed;
      if (!id_o.config.empty() || id_o.rho) assumed = cfg.noise;
      const auto outcome = corrkal::cmd_identify(cfg, id_data, id_o.out, assumed);
      print_outcome(outcome);
      return outcome.diverged ? kExitDiverged : 0;
    }
    if (compare->parsed()) {
      const auto cfg = resolve(cmp_o, false);
      std::optional<corrkal::NoiseSpec> assumed;
      if (!cmp_o.config.empty() || cmp_o.rho) assumed = cfg.noise;
      bool diverged = false;
      for (const auto& o : corrkal::cmd_compare(cfg, cmp_data, cmp_o.out, assumed)) {
        print_outcome(o);
        diverged = diverged || o.diverged;
      }
      return diverged ? kExitDiverged : 0;
    }
    if (sweep->parsed()) {
      const auto cfg = resolve(sweep_o, true);
      const auto outcome = corrkal::cmd_sweep(cfg, sweep_o.out, sweep_o.jobs);
      std::cout << "sweep: " << outcome.runs.size() << " runs, " << outcome.diverged << " diverged, results in "
                << sweep_o.out << '\n';
      return outcome.diverged ? kExitDiverged : 0;
    }
    if (analyze->parsed()) {
      const std::string out = analyze_out.empty() ? analyze_runs + "/analysis" : analyze_out;
      const auto outcome = corrkal::cmd_analyze(analyze_runs, out);
      std::cout << "analyzed " << outcome.runs << " runs:";
      for (const auto& p : outcome.written) std::cout << ' ' << p.string();
      std::cout << '\n';
      return 0;
    }
  } catch (const corrkal::DivergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitDiverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return 0;
}
