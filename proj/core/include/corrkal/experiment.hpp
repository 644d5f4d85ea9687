#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "corrkal/model.hpp"
#include "corrkal/noise.hpp"
#include "corrkal/rgels.hpp"
#include "corrkal/simulate.hpp"

namespace corrkal {

struct RunSettings {
  Eigen::Index length = 5000;
  double p0 = 1e6;
  double theta0 = 1e-6;
  Algorithm algorithm = Algorithm::kKfCnRgels;
  std::vector<Algorithm> algorithms;  ///< sweep set; empty means {algorithm}
  std::vector<double> rho_list;
  std::vector<std::uint64_t> seed_list;
  double u_lo = -0.8;
  double u_hi = 1.0;
  GammaSource gamma_source = GammaSource::kDecorrelated;
  bool use_vstar_variance = false;
  double divergence_threshold = 1e6;
};

/**
 * Everything a run needs. Text form:
 *
 *   preset = ex1            # optional, must come first; later keys override it
 *   [model]  n, n_J, f, g, d, J
 *   [noise]  q_diag, r, rho, u_mode, seed
 *   [run]    L, p0, theta0, algorithm, algorithms, rho_list, seed_list,
 *            u_lo, u_hi, gamma_source, use_vstar_variance, divergence_threshold
 *
 * Arrays are bracketed comma lists. '#' and ';' start comments.
 */
struct ExperimentConfig {
  std::string preset = "custom";
  ObserverCanonicalModel model;
  NoiseSpec noise;
  std::uint64_t seed = 1;
  RunSettings run;

  /// Throws ConfigError on anything inconsistent: dimensions, L, empty lists, bad bounds.
  void validate() const;
  std::vector<Algorithm> sweep_algorithms() const;
  RgelsOptions rgels_options(Algorithm algorithm) const;
};

/// "ex1" or "ex2". Throws ConfigError otherwise.
ExperimentConfig preset_config(std::string_view name);

ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string render_config(const ExperimentConfig& cfg);

/// CORRKAL_SEED if set (throws ConfigError when malformed), else 1.
std::uint64_t default_seed();

/// The PRBS draws from its own stream so that input and noise stay independent.
std::uint64_t input_seed(std::uint64_t seed) noexcept;

/// PRBS input plus correlated noise at the given rho and seed.
Dataset make_dataset(const ExperimentConfig& cfg, double rho, std::uint64_t seed);

/// `<preset>_<algo>_rho<value>_seed<value>`
std::string run_dir_name(std::string_view preset, Algorithm algorithm, double rho, std::uint64_t seed);

struct SimulateSummary {
  Eigen::Index length = 0;
  Eigen::MatrixXd empirical_u;
  Eigen::MatrixXd theoretical_u;
};

SimulateSummary cmd_simulate(const ExperimentConfig& cfg, const std::filesystem::path& out_path);

/// Provenance attached to every table row.
struct RunTag {
  Algorithm algorithm = Algorithm::kKfCnRgels;
  std::optional<double> rho;
  std::optional<std::uint64_t> seed;
  UMode mode = UMode::kEquicorrelated;
};

struct IdentifyOutcome {
  RunTag tag;
  bool diverged = false;
  std::string message;                ///< divergence reason
  std::optional<JointRunResult> result;
  std::optional<double> delta_pct;    ///< only with ground truth
  std::optional<double> rmse_x1;
};

/**
 * Runs one identification and writes theta_trace.csv, filter_trace.csv,
 * summary.csv and covariance.csv into out_dir. A diverged run still writes
 * summary.csv (status = diverged) and returns diverged = true.
 */
IdentifyOutcome identify_dataset(const Dataset& data, const NoiseSpec& assumed, const ExperimentConfig& cfg,
                                 Algorithm algorithm, const std::filesystem::path& out_dir);

/// Loads the dataset. Assumed noise: `assumed` if given, else the dataset's recorded noise, else cfg.noise.
IdentifyOutcome cmd_identify(const ExperimentConfig& cfg, const std::filesystem::path& dataset_path,
                             const std::filesystem::path& out_dir,
                             const std::optional<NoiseSpec>& assumed = std::nullopt);

/// All three algorithms on one dataset: one subdirectory each plus compare.csv.
std::vector<IdentifyOutcome> cmd_compare(const ExperimentConfig& cfg, const std::filesystem::path& dataset_path,
                                         const std::filesystem::path& out_dir,
                                         const std::optional<NoiseSpec>& assumed = std::nullopt);

struct SweepOutcome {
  std::vector<IdentifyOutcome> runs;  ///< ordered by (algorithm, rho, seed)
  std::size_t diverged = 0;
};

/**
 * Every (algorithm, rho, seed) combination, each in its own run directory,
 * then runs.csv and aggregate.csv at out_dir. All rho values are checked for
 * admissibility before any run starts.
 */
SweepOutcome cmd_sweep(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, unsigned jobs = 1);

struct AnalyzeOutcome {
  std::size_t runs = 0;
  std::vector<std::filesystem::path> written;
};

/// Reads run directories under run_dir (or run_dir itself) and writes table1.csv, fig1.csv, fig4.csv, delta_curves.csv.
AnalyzeOutcome cmd_analyze(const std::filesystem::path& run_dir, const std::filesystem::path& out_dir);

}  // namespace corrkal
