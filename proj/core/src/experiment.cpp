#include "corrkal/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

#include "corrkal/analysis.hpp"
#include "corrkal/errors.hpp"
#include "corrkal/text.hpp"

namespace corrkal {

namespace fs = std::filesystem;

namespace {

std::string join(const std::vector<std::string>& cells) {
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) line += ',';
    line += cells[i];
  }
  return line;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  return os;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name, const fs::path& origin) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw ParseError("'" + origin.string() + "' has no column '" + std::string(name) + "'", 1);
    }
    return static_cast<std::size_t>(it - header.begin());
  }
  bool has(std::string_view name) const { return std::find(header.begin(), header.end(), name) != header.end(); }
};

CsvTable read_csv(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open '" + path.string() + "'");
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    for (auto cell : text::split(line, ',')) cells.emplace_back(text::trim(cell));
    if (table.header.empty()) {
      table.header = std::move(cells);
    } else {
      if (cells.size() != table.header.size()) {
        throw ParseError("'" + path.string() + "': expected " + std::to_string(table.header.size()) +
                             " fields, got " + std::to_string(cells.size()),
                         line_no);
      }
      table.rows.push_back(std::move(cells));
    }
  }
  if (table.header.empty()) throw ParseError("'" + path.string() + "' is empty", line_no);
  return table;
}

std::vector<std::string> parameter_names(Eigen::Index n, Eigen::Index n_j) {
  std::vector<std::string> names;
  for (Eigen::Index i = 1; i <= n; ++i) names.push_back("f" + std::to_string(i));
  for (Eigen::Index i = 1; i <= n; ++i) names.push_back("g" + std::to_string(i));
  names.emplace_back("d");
  for (Eigen::Index i = 1; i <= n_j; ++i) names.push_back("J" + std::to_string(i));
  return names;
}

const std::vector<std::string> kTagColumns{"algorithm", "rho", "seed", "mode"};

std::vector<std::string> tag_cells(const RunTag& tag) {
  return {std::string(to_string(tag.algorithm)), tag.rho ? text::format_double(*tag.rho) : "",
          tag.seed ? std::to_string(*tag.seed) : "", std::string(to_string(tag.mode))};
}

std::vector<std::uint64_t> parse_seed_list(std::string_view token) {
  std::vector<std::uint64_t> seeds;
  std::string_view body = text::trim(token);
  if (body.size() >= 2 && body.front() == '[' && body.back() == ']') body = body.substr(1, body.size() - 2);
  if (text::trim(body).empty()) return seeds;
  for (auto item : text::split(body, ',')) {
    const long long value = text::parse_int(item);
    if (value < 0) throw std::invalid_argument("seeds must be >= 0");
    seeds.push_back(static_cast<std::uint64_t>(value));
  }
  return seeds;
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

bool parse_bool(std::string_view token) {
  const auto t = text::trim(token);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw std::invalid_argument("expected true or false");
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

void ExperimentConfig::validate() const {
  try {
    model.validate();
    noise.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::domain_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  const Eigen::Index n = model.order();
  if (noise.q_diag.size() != n) {
    throw ConfigError("config: q_diag has " + std::to_string(noise.q_diag.size()) + " entries but the model has n = " +
                      std::to_string(n));
  }
  if (run.length <= 0) throw ConfigError("config: run length L must be > 0");
  if (!(run.p0 > 0.0)) throw ConfigError("config: p0 must be > 0");
  if (!(run.u_lo < run.u_hi)) throw ConfigError("config: PRBS levels need u_lo < u_hi");
  if (!(run.divergence_threshold > 0.0)) throw ConfigError("config: divergence_threshold must be > 0");
  if (run.seed_list.empty()) throw ConfigError("config: seed_list is empty");
  if (run.rho_list.empty()) throw ConfigError("config: rho_list is empty");
  for (double rho : run.rho_list) {
    if (!(std::abs(rho) <= 1.0)) throw ConfigError("config: rho_list entry " + text::format_double(rho) + " outside [-1, 1]");
  }
}

std::vector<Algorithm> ExperimentConfig::sweep_algorithms() const {
  std::vector<Algorithm> algos = run.algorithms.empty() ? std::vector<Algorithm>{run.algorithm} : run.algorithms;
  std::sort(algos.begin(), algos.end());
  algos.erase(std::unique(algos.begin(), algos.end()), algos.end());
  return algos;
}

RgelsOptions ExperimentConfig::rgels_options(Algorithm algorithm) const {
  RgelsOptions opt;
  opt.algorithm = algorithm;
  opt.p0 = run.p0;
  opt.theta0 = run.theta0;
  opt.noise_order = model.noise_order();
  opt.gamma_source = run.gamma_source;
  opt.use_vstar_variance = run.use_vstar_variance;
  opt.divergence_threshold = run.divergence_threshold;
  return opt;
}

ExperimentConfig preset_config(std::string_view name) {
  ExperimentConfig cfg;
  cfg.preset = std::string(name);
  cfg.noise.rho = 0.5;
  cfg.noise.mode = UMode::kEquicorrelated;
  cfg.run.seed_list = {1, 2, 3, 4, 5};
  if (name == "ex1") {
    cfg.model.f = Eigen::Vector2d(-0.05, -0.35);
    cfg.model.g = Eigen::Vector2d(2.0, 3.0);
    cfg.model.d = 1.3;
    cfg.model.j = Eigen::Vector2d(0.0505, 0.0139);
    cfg.noise.q_diag = Eigen::Vector2d(0.07 * 0.07, 0.01 * 0.01);
    cfg.noise.r = 0.8 * 0.8;
    cfg.run.rho_list = {0.0, 0.3, 0.5, 0.9};
  } else if (name == "ex2") {
    cfg.model.f = Eigen::Vector2d(-0.11, -0.15);
    cfg.model.g = Eigen::Vector2d(1.9, 1.6);
    cfg.model.d = 1.9;
    cfg.model.j = Eigen::Vector2d(0.1069, -0.0143);
    cfg.noise.q_diag = Eigen::Vector2d(0.6, 0.4);
    cfg.noise.r = 1.6;
    cfg.run.rho_list = {-0.5, -0.3, 0.0, 0.3, 0.5, 0.75};
  } else {
    throw ConfigError("unknown preset '" + std::string(name) + "' (expected ex1 or ex2)");
  }
  return cfg;
}

ExperimentConfig parse_config(std::string_view text_in) {
  ExperimentConfig cfg;
  cfg.preset = "custom";
  cfg.seed = default_seed();
  cfg.run.seed_list = {cfg.seed};
  cfg.run.rho_list = {0.0};
  bool preset_allowed = true;
  std::optional<long long> declared_n;
  std::optional<long long> declared_nj;
  std::string section;

  std::size_t line_no = 0;
  for (auto raw : text::split(text_in, '\n')) {
    ++line_no;
    std::string_view line = raw;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    line = text::trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError("malformed section header", line_no);
      section = std::string(text::trim(line.substr(1, line.size() - 2)));
      if (section != "model" && section != "noise" && section != "run") {
        throw ParseError("unknown section [" + section + "]", line_no);
      }
      preset_allowed = false;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected key = value", line_no);
    const std::string key(text::trim(line.substr(0, eq)));
    const std::string_view value = text::trim(line.substr(eq + 1));

    try {
      if (section.empty()) {
        if (key != "preset") throw ParseError("key '" + key + "' outside a section", line_no);
        if (!preset_allowed) throw ParseError("preset must come before other settings", line_no);
        const std::uint64_t seed = cfg.seed;
        cfg = preset_config(value);
        cfg.seed = seed;
        preset_allowed = false;
        continue;
      }
      preset_allowed = false;
      if (section == "model") {
        if (key == "n") declared_n = text::parse_int(value);
        else if (key == "n_J") declared_nj = text::parse_int(value);
        else if (key == "f") cfg.model.f = text::parse_vector(value);
        else if (key == "g") cfg.model.g = text::parse_vector(value);
        else if (key == "d") cfg.model.d = text::parse_double(value);
        else if (key == "J") cfg.model.j = text::parse_vector(value);
        else throw ParseError("unknown key '" + key + "' in [model]", line_no);
      } else if (section == "noise") {
        if (key == "q_diag") cfg.noise.q_diag = text::parse_vector(value);
        else if (key == "r") cfg.noise.r = text::parse_double(value);
        else if (key == "rho") cfg.noise.rho = text::parse_double(value);
        else if (key == "u_mode") cfg.noise.mode = parse_u_mode(value);
        else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(text::parse_int(value));
        else throw ParseError("unknown key '" + key + "' in [noise]", line_no);
      } else {
        if (key == "L") cfg.run.length = text::parse_int(value);
        else if (key == "p0") cfg.run.p0 = text::parse_double(value);
        else if (key == "theta0") cfg.run.theta0 = text::parse_double(value);
        else if (key == "algorithm") cfg.run.algorithm = parse_algorithm(value);
        else if (key == "algorithms") {
          cfg.run.algorithms.clear();
          std::string_view body = value;
          if (body.size() >= 2 && body.front() == '[' && body.back() == ']') body = body.substr(1, body.size() - 2);
          for (auto item : text::split(body, ',')) {
            if (!text::trim(item).empty()) cfg.run.algorithms.push_back(parse_algorithm(text::trim(item)));
          }
        } else if (key == "rho_list") cfg.run.rho_list = to_std(text::parse_vector(value));
        else if (key == "seed_list") cfg.run.seed_list = parse_seed_list(value);
        else if (key == "u_lo") cfg.run.u_lo = text::parse_double(value);
        else if (key == "u_hi") cfg.run.u_hi = text::parse_double(value);
        else if (key == "gamma_source") {
          if (value == "decorrelated") cfg.run.gamma_source = GammaSource::kDecorrelated;
          else if (value == "raw") cfg.run.gamma_source = GammaSource::kRaw;
          else throw ParseError("gamma_source must be decorrelated or raw", line_no);
        } else if (key == "use_vstar_variance") cfg.run.use_vstar_variance = parse_bool(value);
        else if (key == "divergence_threshold") cfg.run.divergence_threshold = text::parse_double(value);
        else throw ParseError("unknown key '" + key + "' in [run]", line_no);
      }
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError("bad value for '" + key + "': " + e.what(), line_no);
    }
  }

  if (declared_n && *declared_n != cfg.model.order()) {
    throw ConfigError("config: n = " + std::to_string(*declared_n) + " but f has " +
                      std::to_string(cfg.model.order()) + " entries");
  }
  if (declared_nj && *declared_nj != cfg.model.noise_order()) {
    throw ConfigError("config: n_J = " + std::to_string(*declared_nj) + " but J has " +
                      std::to_string(cfg.model.noise_order()) + " entries");
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read config '" + path.string() + "'");
  std::stringstream buffer;
  buffer << is.rdbuf();
  return parse_config(buffer.str());
}

std::string render_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  const auto& r = cfg.run;
  os << "[model]\n"
     << "n = " << cfg.model.order() << '\n'
     << "n_J = " << cfg.model.noise_order() << '\n'
     << "f = " << text::format_vector(cfg.model.f) << '\n'
     << "g = " << text::format_vector(cfg.model.g) << '\n'
     << "d = " << text::format_double(cfg.model.d) << '\n'
     << "J = " << text::format_vector(cfg.model.j) << "\n\n"
     << "[noise]\n"
     << "q_diag = " << text::format_vector(cfg.noise.q_diag) << '\n'
     << "r = " << text::format_double(cfg.noise.r) << '\n'
     << "rho = " << text::format_double(cfg.noise.rho) << '\n'
     << "u_mode = " << to_string(cfg.noise.mode) << '\n'
     << "seed = " << cfg.seed << "\n\n"
     << "[run]\n"
     << "L = " << r.length << '\n'
     << "p0 = " << text::format_double(r.p0) << '\n'
     << "theta0 = " << text::format_double(r.theta0) << '\n'
     << "algorithm = " << to_string(r.algorithm) << '\n';
  if (!r.algorithms.empty()) {
    os << "algorithms = [";
    for (std::size_t i = 0; i < r.algorithms.size(); ++i) os << (i ? ", " : "") << to_string(r.algorithms[i]);
    os << "]\n";
  }
  os << "rho_list = " << text::format_vector(Eigen::Map<const Eigen::VectorXd>(r.rho_list.data(),
                                                                               static_cast<Eigen::Index>(r.rho_list.size())))
     << '\n';
  os << "seed_list = [";
  for (std::size_t i = 0; i < r.seed_list.size(); ++i) os << (i ? ", " : "") << r.seed_list[i];
  os << "]\n"
     << "u_lo = " << text::format_double(r.u_lo) << '\n'
     << "u_hi = " << text::format_double(r.u_hi) << '\n'
     << "gamma_source = " << (r.gamma_source == GammaSource::kRaw ? "raw" : "decorrelated") << '\n'
     << "use_vstar_variance = " << (r.use_vstar_variance ? "true" : "false") << '\n'
     << "divergence_threshold = " << text::format_double(r.divergence_threshold) << '\n';
  return os.str();
}

std::uint64_t default_seed() {
  const char* env = std::getenv("CORRKAL_SEED");
  if (env == nullptr || *env == '\0') return 1;
  try {
    const long long value = text::parse_int(env);
    if (value < 0) throw std::invalid_argument("negative");
    return static_cast<std::uint64_t>(value);
  } catch (const std::invalid_argument&) {
    throw ConfigError("CORRKAL_SEED='" + std::string(env) + "' is not a non-negative integer");
  }
}

std::uint64_t input_seed(std::uint64_t seed) noexcept {
  // splitmix64 finaliser
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Dataset make_dataset(const ExperimentConfig& cfg, double rho, std::uint64_t seed) {
  NoiseSpec noise = cfg.noise;
  noise.rho = rho;
  const Eigen::VectorXd u = prbs_input(cfg.run.length, cfg.run.u_lo, cfg.run.u_hi, input_seed(seed));
  Dataset ds = simulate(cfg.model, noise, u, seed);
  ds.meta.preset = cfg.preset;
  return ds;
}

std::string run_dir_name(std::string_view preset, Algorithm algorithm, double rho, std::uint64_t seed) {
  return std::string(preset) + "_" + std::string(to_string(algorithm)) + "_rho" + text::format_double(rho) + "_seed" +
         std::to_string(seed);
}

// ---------------------------------------------------------------------------
// Commands

SimulateSummary cmd_simulate(const ExperimentConfig& cfg, const fs::path& out_path) {
  cfg.validate();
  const JointCovariance u = build_joint_covariance(cfg.noise);
  const Dataset ds = make_dataset(cfg, cfg.noise.rho, cfg.seed);
  save_dataset(ds, out_path);

  const Eigen::Index n = ds.state_dim();
  Eigen::MatrixXd samples(n + 1, ds.length());
  samples.topRows(n) = ds.w;
  samples.row(n) = ds.v.transpose();
  SimulateSummary summary;
  summary.length = ds.length();
  summary.empirical_u = samples * samples.transpose() / static_cast<double>(ds.length());
  summary.theoretical_u = u.matrix();
  return summary;
}

namespace {

void write_identify_files(const Dataset& data, const NoiseSpec& assumed, const IdentifyOutcome& out,
                          const fs::path& out_dir) {
  fs::create_directories(out_dir);
  const Eigen::Index n = data.state_dim();
  const Eigen::Index L = data.length();
  const JointRunResult& res = *out.result;
  const Eigen::Index n_s = res.theta_trace.rows();
  const Eigen::Index n_j = n_s - 2 * n - 1;
  const auto names = parameter_names(n, n_j);

  {
    auto os = open_out(out_dir / "theta_trace.csv");
    std::vector<std::string> header{"t"};
    header.insert(header.end(), names.begin(), names.end());
    if (res.delta_trace) header.emplace_back("delta_theta");
    os << join(header) << '\n';
    for (Eigen::Index t = 0; t < L; ++t) {
      std::vector<std::string> cells{std::to_string(t)};
      for (Eigen::Index i = 0; i < n_s; ++i) cells.push_back(text::format_double(res.theta_trace(i, t)));
      if (res.delta_trace) cells.push_back(text::format_double((*res.delta_trace)(t)));
      os << join(cells) << '\n';
    }
  }
  {
    auto os = open_out(out_dir / "filter_trace.csv");
    std::vector<std::string> header{"t"};
    for (Eigen::Index i = 1; i <= n; ++i) header.push_back("xhat" + std::to_string(i));
    for (Eigen::Index i = 1; i <= n; ++i) header.push_back("K" + std::to_string(i));
    header.emplace_back("innovation");
    header.emplace_back("trace_P");
    os << join(header) << '\n';
    for (Eigen::Index t = 0; t < L; ++t) {
      std::vector<std::string> cells{std::to_string(t)};
      for (Eigen::Index i = 0; i < n; ++i) cells.push_back(text::format_double(res.x_hat(i, t)));
      for (Eigen::Index i = 0; i < n; ++i) cells.push_back(text::format_double(res.gains(i, t)));
      cells.push_back(text::format_double(res.innovations(t)));
      cells.push_back(text::format_double(res.trace_P(t)));
      os << join(cells) << '\n';
    }
  }
  {
    // Long format so that analyze can rebuild any matrix without knowing n up front.
    const JointCovariance u = build_joint_covariance(assumed);
    const Eigen::MatrixXd Q_bar = u.Q() - res.T * u.S().transpose();
    auto os = open_out(out_dir / "covariance.csv");
    os << "quantity,i,j,value\n";
    auto emit = [&os](std::string_view name, const Eigen::MatrixXd& m) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
          os << name << ',' << i + 1 << ',' << j + 1 << ',' << text::format_double(m(i, j)) << '\n';
        }
      }
    };
    emit("P_pred", res.P_pred_final);
    emit("Q", u.Q());
    emit("Qbar", Q_bar);
    emit("S", u.S());
    emit("T", res.T);
    emit("R", Eigen::MatrixXd::Constant(1, 1, u.R()));
  }
}

void write_summary(const IdentifyOutcome& out, Eigen::Index n, Eigen::Index n_j, bool has_truth,
                   const fs::path& out_dir) {
  fs::create_directories(out_dir);
  auto os = open_out(out_dir / "summary.csv");
  std::vector<std::string> header = kTagColumns;
  header.emplace_back("status");
  const auto names = parameter_names(n, n_j);
  header.insert(header.end(), names.begin(), names.end());
  if (has_truth) {
    header.emplace_back("delta_pct");
    header.emplace_back("rmse_x1");
  }
  os << join(header) << '\n';

  std::vector<std::string> cells = tag_cells(out.tag);
  cells.emplace_back(out.diverged ? "diverged" : "ok");
  for (Eigen::Index i = 0; i < n + n + 1 + n_j; ++i) {
    cells.push_back(out.result ? text::format_double(out.result->theta_final(i)) : "nan");
  }
  if (has_truth) {
    cells.push_back(out.delta_pct ? text::format_fixed(*out.delta_pct, 4) : "nan");
    cells.push_back(out.rmse_x1 ? text::format_double(*out.rmse_x1) : "nan");
  }
  os << join(cells) << '\n';
}

}  // namespace

IdentifyOutcome identify_dataset(const Dataset& data, const NoiseSpec& assumed, const ExperimentConfig& cfg,
                                 Algorithm algorithm, const fs::path& out_dir) {
  data.validate();
  const Eigen::Index n = data.state_dim();
  if (cfg.model.order() != n && !data.meta.model) {
    throw DimensionError("dataset has n = " + std::to_string(n) + " but the config model has n = " +
                         std::to_string(cfg.model.order()));
  }
  if (assumed.q_diag.size() != n) {
    throw DimensionError("assumed q_diag has " + std::to_string(assumed.q_diag.size()) +
                         " entries, dataset has n = " + std::to_string(n));
  }
  const JointCovariance u = build_joint_covariance(assumed);
  const Eigen::Index n_j = data.meta.model ? data.meta.model->noise_order() : cfg.model.noise_order();

  IdentifyOutcome out;
  out.tag.algorithm = algorithm;
  out.tag.rho = assumed.rho;
  out.tag.seed = data.meta.seed;
  out.tag.mode = assumed.mode;

  RgelsOptions opt = cfg.rgels_options(algorithm);
  opt.noise_order = n_j;
  try {
    out.result = run_joint(data, AssumedNoise{u.Q(), u.R(), u.S()}, opt);
  } catch (const DivergenceError& e) {
    out.diverged = true;
    out.message = e.what();
  } catch (const NumericalError& e) {
    out.diverged = true;
    out.message = e.what();
  }
  const bool has_truth = data.meta.model.has_value();
  if (out.result) {
    if (out.result->delta_trace) out.delta_pct = 100.0 * (*out.result->delta_trace)(data.length() - 1);
    out.rmse_x1 = out.result->rmse_x1;
    write_identify_files(data, assumed, out, out_dir);
  }
  write_summary(out, n, n_j, has_truth, out_dir);
  return out;
}

IdentifyOutcome cmd_identify(const ExperimentConfig& cfg, const fs::path& dataset_path, const fs::path& out_dir,
                             const std::optional<NoiseSpec>& assumed) {
  if (!fs::exists(dataset_path)) throw ConfigError("dataset '" + dataset_path.string() + "' does not exist");
  const Dataset data = load_dataset(dataset_path);
  const NoiseSpec noise = assumed ? *assumed : data.meta.noise.value_or(cfg.noise);
  return identify_dataset(data, noise, cfg, cfg.run.algorithm, out_dir);
}

std::vector<IdentifyOutcome> cmd_compare(const ExperimentConfig& cfg, const fs::path& dataset_path,
                                         const fs::path& out_dir, const std::optional<NoiseSpec>& assumed) {
  if (!fs::exists(dataset_path)) throw ConfigError("dataset '" + dataset_path.string() + "' does not exist");
  const Dataset data = load_dataset(dataset_path);
  const NoiseSpec noise = assumed ? *assumed : data.meta.noise.value_or(cfg.noise);
  std::vector<IdentifyOutcome> outcomes;
  for (Algorithm a : {Algorithm::kKfCnRgels, Algorithm::kSkf, Algorithm::kAugKf}) {
    outcomes.push_back(identify_dataset(data, noise, cfg, a, out_dir / std::string(to_string(a))));
  }

  auto os = open_out(out_dir / "compare.csv");
  std::vector<std::string> header = kTagColumns;
  header.insert(header.end(), {"status", "delta_pct", "rmse_x1"});
  os << join(header) << '\n';
  for (const auto& o : outcomes) {
    auto cells = tag_cells(o.tag);
    cells.emplace_back(o.diverged ? "diverged" : "ok");
    cells.push_back(o.delta_pct ? text::format_fixed(*o.delta_pct, 4) : "");
    cells.push_back(o.rmse_x1 ? text::format_double(*o.rmse_x1) : "");
    os << join(cells) << '\n';
  }
  return outcomes;
}

SweepOutcome cmd_sweep(const ExperimentConfig& cfg, const fs::path& out_dir, unsigned jobs) {
  cfg.validate();
  {
    std::string problems;
    for (double rho : cfg.run.rho_list) {
      NoiseSpec spec = cfg.noise;
      spec.rho = rho;
      try {
        build_joint_covariance(spec);
      } catch (const PsdError& e) {
        problems += "\n  rho = " + text::format_double(rho) + ": " + e.what();
      }
    }
    if (!problems.empty()) throw ConfigError("sweep rejected, inadmissible correlation:" + problems);
  }

  struct Job {
    Algorithm algorithm;
    double rho;
    std::uint64_t seed;
  };
  std::vector<double> rhos = cfg.run.rho_list;
  std::sort(rhos.begin(), rhos.end());
  rhos.erase(std::unique(rhos.begin(), rhos.end()), rhos.end());
  std::vector<std::uint64_t> seeds = cfg.run.seed_list;
  std::sort(seeds.begin(), seeds.end());
  seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());

  std::vector<Job> queue;
  for (Algorithm a : cfg.sweep_algorithms()) {
    for (double rho : rhos) {
      for (std::uint64_t seed : seeds) queue.push_back({a, rho, seed});
    }
  }

  SweepOutcome sweep;
  sweep.runs.resize(queue.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t k = next++; k < queue.size(); k = next++) {
      try {
        const Job& job = queue[k];
        const Dataset data = make_dataset(cfg, job.rho, job.seed);
        NoiseSpec noise = cfg.noise;
        noise.rho = job.rho;
        sweep.runs[k] = identify_dataset(data, noise, cfg, job.algorithm,
                                         out_dir / run_dir_name(cfg.preset, job.algorithm, job.rho, job.seed));
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = queue.size();
      }
    }
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(queue.size())));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < workers; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);

  const Eigen::Index n = cfg.model.order();
  const Eigen::Index n_j = cfg.model.noise_order();
  const auto names = parameter_names(n, n_j);
  {
    auto os = open_out(out_dir / "runs.csv");
    std::vector<std::string> header = kTagColumns;
    header.insert(header.end(), {"status", "delta_pct", "rmse_x1"});
    header.insert(header.end(), names.begin(), names.end());
    os << join(header) << '\n';
    for (const auto& run : sweep.runs) {
      auto cells = tag_cells(run.tag);
      cells.emplace_back(run.diverged ? "diverged" : "ok");
      cells.push_back(run.delta_pct ? text::format_fixed(*run.delta_pct, 4) : "nan");
      cells.push_back(run.rmse_x1 ? text::format_double(*run.rmse_x1) : "nan");
      for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(names.size()); ++i) {
        cells.push_back(run.result ? text::format_double(run.result->theta_final(i)) : "nan");
      }
      os << join(cells) << '\n';
      if (run.diverged) ++sweep.diverged;
    }
  }
  {
    auto os = open_out(out_dir / "aggregate.csv");
    os << "algorithm,rho,seeds,mode,runs,diverged,mean_delta_pct,std_delta_pct,mean_rmse_x1\n";
    std::string seed_cell;
    for (std::size_t i = 0; i < seeds.size(); ++i) seed_cell += (i ? ";" : "") + std::to_string(seeds[i]);
    for (std::size_t k = 0; k < sweep.runs.size(); k += seeds.size()) {
      std::vector<double> deltas;
      std::vector<double> rmses;
      std::size_t diverged = 0;
      for (std::size_t s = 0; s < seeds.size(); ++s) {
        const auto& run = sweep.runs[k + s];
        if (run.diverged) {
          ++diverged;
          continue;
        }
        if (run.delta_pct) deltas.push_back(*run.delta_pct);
        if (run.rmse_x1) rmses.push_back(*run.rmse_x1);
      }
      auto mean = [](const std::vector<double>& xs) {
        double sum = 0.0;
        for (double x : xs) sum += x;
        return xs.empty() ? std::nan("") : sum / static_cast<double>(xs.size());
      };
      const double m = mean(deltas);
      double var = 0.0;
      for (double x : deltas) var += (x - m) * (x - m);
      const double sd = deltas.size() > 1 ? std::sqrt(var / static_cast<double>(deltas.size() - 1)) : 0.0;
      const auto& tag = sweep.runs[k].tag;
      os << to_string(tag.algorithm) << ',' << text::format_double(*tag.rho) << ',' << seed_cell << ','
         << to_string(tag.mode) << ',' << seeds.size() << ',' << diverged << ',' << text::format_fixed(m, 4) << ','
         << text::format_fixed(sd, 4) << ',' << text::format_double(mean(rmses)) << '\n';
    }
  }
  return sweep;
}

// ---------------------------------------------------------------------------
// Analysis of stored runs

namespace {

struct StoredRun {
  fs::path dir;
  std::vector<std::string> tag;  // algorithm, rho, seed, mode
  Algorithm algorithm;
  double rho = 0.0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::optional<double> rmse_x1;
};

Eigen::MatrixXd read_quantity(const CsvTable& table, std::string_view name, const fs::path& origin) {
  const auto qi = table.column("quantity", origin);
  const auto ii = table.column("i", origin);
  const auto ji = table.column("j", origin);
  const auto vi = table.column("value", origin);
  long long rows = 0;
  long long cols = 0;
  for (const auto& r : table.rows) {
    if (r[qi] != name) continue;
    rows = std::max(rows, text::parse_int(r[ii]));
    cols = std::max(cols, text::parse_int(r[ji]));
  }
  if (rows == 0) throw ParseError("'" + origin.string() + "' lacks quantity '" + std::string(name) + "'", 1);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rows, cols);
  for (const auto& r : table.rows) {
    if (r[qi] != name) continue;
    m(text::parse_int(r[ii]) - 1, text::parse_int(r[ji]) - 1) = text::parse_double(r[vi]);
  }
  return m;
}

}  // namespace

AnalyzeOutcome cmd_analyze(const fs::path& run_dir, const fs::path& out_dir) {
  if (!fs::exists(run_dir)) throw ConfigError("run directory '" + run_dir.string() + "' does not exist");
  if (!fs::is_directory(run_dir)) throw ConfigError("'" + run_dir.string() + "' is not a directory");

  std::vector<fs::path> dirs;
  if (fs::exists(run_dir / "summary.csv")) {
    dirs.push_back(run_dir);
  } else {
    for (const auto& entry : fs::directory_iterator(run_dir)) {
      if (entry.is_directory() && fs::exists(entry.path() / "summary.csv")) dirs.push_back(entry.path());
    }
  }
  if (dirs.empty()) {
    throw ConfigError("no runs to analyze: no summary.csv in '" + run_dir.string() + "' or its subdirectories");
  }

  std::vector<StoredRun> runs;
  for (const auto& dir : dirs) {
    const fs::path summary_path = dir / "summary.csv";
    const CsvTable summary = read_csv(summary_path);
    if (summary.rows.empty()) throw ConfigError("'" + summary_path.string() + "' has no rows");
    const auto& row = summary.rows.front();
    StoredRun run;
    run.dir = dir;
    for (const auto& col : kTagColumns) run.tag.push_back(row[summary.column(col, summary_path)]);
    run.algorithm = parse_algorithm(run.tag[0]);
    run.rho = run.tag[1].empty() ? 0.0 : text::parse_double(run.tag[1]);
    run.seed = run.tag[2].empty() ? 0 : static_cast<std::uint64_t>(text::parse_int(run.tag[2]));
    run.ok = row[summary.column("status", summary_path)] == "ok";
    if (summary.has("rmse_x1") && run.ok) run.rmse_x1 = text::parse_double(row[summary.column("rmse_x1", summary_path)]);
    runs.push_back(std::move(run));
  }
  std::sort(runs.begin(), runs.end(), [](const StoredRun& a, const StoredRun& b) {
    return std::tie(a.algorithm, a.rho, a.seed, a.dir) < std::tie(b.algorithm, b.rho, b.seed, b.dir);
  });

  AnalyzeOutcome outcome;
  outcome.runs = runs.size();
  fs::create_directories(out_dir);
  const std::string tag_header = join(kTagColumns);

  auto table1 = open_out(out_dir / "table1.csv");
  auto fig1 = open_out(out_dir / "fig1.csv");
  auto curves = open_out(out_dir / "delta_curves.csv");
  table1 << tag_header << ",trace\n";
  fig1 << tag_header << ",S,P,P0\n";
  curves << tag_header << ",t,delta\n";

  constexpr int kFig1Steps = 10;
  for (const auto& run : runs) {
    if (!run.ok) continue;
    const fs::path cov_path = run.dir / "covariance.csv";
    if (!fs::exists(cov_path)) throw ConfigError("run '" + run.dir.string() + "' is missing covariance.csv");
    const CsvTable cov = read_csv(cov_path);
    const Eigen::MatrixXd P = read_quantity(cov, "P_pred", cov_path);
    const Eigen::VectorXd S = read_quantity(cov, "S", cov_path).col(0);
    const Eigen::MatrixXd Q_bar = read_quantity(cov, "Qbar", cov_path);
    const double R = read_quantity(cov, "R", cov_path)(0, 0);
    const std::string tag = join(run.tag);

    table1 << tag << ',' << text::format_double(state_noise_cross_cov(S, P).trace) << '\n';
    const auto curve = measurement_covariance_curve(Q_bar(0, 0), R, S(0), kFig1Steps);
    const auto& last = curve.back();
    fig1 << tag << ',' << text::format_double(last.S) << ',' << text::format_double(last.P) << ','
         << text::format_double(last.P0) << '\n';

    const fs::path trace_path = run.dir / "theta_trace.csv";
    if (!fs::exists(trace_path)) throw ConfigError("run '" + run.dir.string() + "' is missing theta_trace.csv");
    const CsvTable trace = read_csv(trace_path);
    if (trace.has("delta_theta")) {
      const auto ti = trace.column("t", trace_path);
      const auto di = trace.column("delta_theta", trace_path);
      for (const auto& r : trace.rows) curves << tag << ',' << r[ti] << ',' << r[di] << '\n';
    }
  }

  auto fig4 = open_out(out_dir / "fig4.csv");
  fig4 << "algorithm,rho,seeds,mode,runs,rmse\n";
  for (std::size_t k = 0; k < runs.size();) {
    std::size_t end = k;
    std::vector<double> values;
    std::string seeds;
    while (end < runs.size() && runs[end].algorithm == runs[k].algorithm && runs[end].rho == runs[k].rho) {
      if (runs[end].rmse_x1) {
        values.push_back(*runs[end].rmse_x1);
        seeds += (seeds.empty() ? "" : ";") + runs[end].tag[2];
      }
      ++end;
    }
    if (!values.empty()) {
      double sum = 0.0;
      for (double v : values) sum += v;
      fig4 << runs[k].tag[0] << ',' << runs[k].tag[1] << ',' << seeds << ',' << runs[k].tag[3] << ',' << values.size()
           << ',' << text::format_double(sum / static_cast<double>(values.size())) << '\n';
    }
    k = end;
  }

  outcome.written = {out_dir / "table1.csv", out_dir / "fig1.csv", out_dir / "fig4.csv", out_dir / "delta_curves.csv"};
  return outcome;
}

}  // namespace corrkal
