#include "corrkal/simulate.hpp"

#include <fstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "corrkal/errors.hpp"
#include "corrkal/text.hpp"

namespace corrkal {

namespace {

std::vector<std::string> column_names(Eigen::Index n) {
  std::vector<std::string> names{"t", "u", "y"};
  for (Eigen::Index i = 1; i <= n; ++i) names.push_back("x" + std::to_string(i));
  for (Eigen::Index i = 1; i <= n; ++i) names.push_back("w" + std::to_string(i));
  names.emplace_back("v");
  names.emplace_back("vstar");
  return names;
}

void write_meta(std::ostream& os, const DatasetMeta& meta) {
  if (!meta.preset.empty()) os << "# preset=" << meta.preset << '\n';
  if (meta.model) {
    const auto& m = *meta.model;
    os << "# n=" << m.order() << '\n'
       << "# n_J=" << m.noise_order() << '\n'
       << "# f=" << text::format_vector(m.f) << '\n'
       << "# g=" << text::format_vector(m.g) << '\n'
       << "# d=" << text::format_double(m.d) << '\n'
       << "# J=" << text::format_vector(m.j) << '\n';
  }
  if (meta.noise) {
    const auto& s = *meta.noise;
    os << "# q_diag=" << text::format_vector(s.q_diag) << '\n'
       << "# r=" << text::format_double(s.r) << '\n'
       << "# rho=" << text::format_double(s.rho) << '\n'
       << "# u_mode=" << to_string(s.mode) << '\n';
  }
  if (meta.seed) os << "# seed=" << *meta.seed << '\n';
  for (const auto& [key, value] : meta.extra) os << "# " << key << '=' << value << '\n';
}

DatasetMeta read_meta(const std::unordered_map<std::string, std::pair<std::string, std::size_t>>& kv) {
  DatasetMeta meta;
  auto get = [&](const std::string& key) -> const std::pair<std::string, std::size_t>* {
    const auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };
  auto parse = [&](const std::string& key, auto&& fn) {
    const auto* entry = get(key);
    try {
      return fn(entry->first);
    } catch (const std::invalid_argument& e) {
      throw ParseError("bad metadata value for '" + key + "': " + e.what(), entry->second);
    }
  };

  if (get("f") && get("g") && get("d")) {
    ObserverCanonicalModel m;
    m.f = parse("f", text::parse_vector);
    m.g = parse("g", text::parse_vector);
    m.d = parse("d", text::parse_double);
    m.j = get("J") ? parse("J", text::parse_vector) : Eigen::VectorXd(0);
    try {
      m.validate();
    } catch (const DimensionError& e) {
      throw ParseError(std::string("inconsistent model metadata: ") + e.what(), get("f")->second);
    }
    if (get("n") && parse("n", text::parse_int) != m.order()) {
      throw ParseError("metadata n disagrees with length of f", get("n")->second);
    }
    if (get("n_J") && parse("n_J", text::parse_int) != m.noise_order()) {
      throw ParseError("metadata n_J disagrees with length of J", get("n_J")->second);
    }
    meta.model = std::move(m);
  }
  if (get("q_diag") && get("r") && get("rho")) {
    NoiseSpec s;
    s.q_diag = parse("q_diag", text::parse_vector);
    s.r = parse("r", text::parse_double);
    s.rho = parse("rho", text::parse_double);
    if (get("u_mode")) {
      try {
        s.mode = parse_u_mode(get("u_mode")->first);
      } catch (const ConfigError& e) {
        throw ParseError(e.what(), get("u_mode")->second);
      }
    }
    meta.noise = std::move(s);
  }
  if (get("seed")) meta.seed = static_cast<std::uint64_t>(parse("seed", text::parse_int));
  if (get("preset")) meta.preset = get("preset")->first;

  static const char* kKnown[] = {"f", "g", "d", "J", "n", "n_J", "q_diag", "r", "rho", "u_mode", "seed", "preset"};
  for (const auto& [key, value] : kv) {
    bool known = false;
    for (const char* k : kKnown) known = known || key == k;
    if (!known) meta.extra.emplace(key, value.first);
  }
  return meta;
}

}  // namespace

void Dataset::validate() const {
  const Eigen::Index L = u.size();
  if (L == 0) {
    throw DimensionError("dataset is empty");
  }
  if (y.size() != L || x.cols() != L || w.cols() != L || v.size() != L || v_star.size() != L) {
    throw DimensionError("dataset sequences have different lengths");
  }
  if (x.rows() != w.rows() || x.rows() < 1) {
    throw DimensionError("dataset state and process-noise dimensions disagree");
  }
}

Eigen::VectorXd colour_measurement_noise(const Eigen::VectorXd& v, const Eigen::VectorXd& j) {
  Eigen::VectorXd out = v;
  for (Eigen::Index t = 0; t < v.size(); ++t) {
    for (Eigen::Index i = 1; i <= j.size() && i <= t; ++i) {
      out(t) += j(i - 1) * v(t - i);
    }
  }
  return out;
}

Dataset simulate_with_noise(const ObserverCanonicalModel& model, const Eigen::VectorXd& u,
                            const Eigen::MatrixXd& w, const Eigen::VectorXd& v) {
  model.validate();
  const Eigen::Index n = model.order();
  const Eigen::Index L = u.size();
  if (L < 1) {
    throw DimensionError("simulate: input length must be >= 1");
  }
  if (w.rows() != n || w.cols() != L || v.size() != L) {
    throw DimensionError("simulate: noise sequences do not match model order and input length");
  }
  const Eigen::MatrixXd F = build_F(model.f);

  Dataset ds;
  ds.u = u;
  ds.w = w;
  ds.v = v;
  ds.v_star = colour_measurement_noise(v, model.j);
  ds.x.resize(n, L);
  ds.y.resize(L);

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  for (Eigen::Index t = 0; t < L; ++t) {
    ds.x.col(t) = x;
    ds.y(t) = x(0) + model.d * u(t) + ds.v_star(t);
    x = F * x + model.g * u(t) + w.col(t);
  }
  ds.meta.model = model;
  return ds;
}

Dataset simulate(const ObserverCanonicalModel& model, const NoiseSpec& noise, const Eigen::VectorXd& u,
                 std::uint64_t seed) {
  model.validate();
  if (noise.q_diag.size() != model.order()) {
    throw DimensionError("noise q_diag length does not match model order");
  }
  const JointCovariance cov = build_joint_covariance(noise);
  const NoiseSequences draws = sample_correlated(cov, u.size(), seed);
  Dataset ds = simulate_with_noise(model, u, draws.w, draws.v);
  ds.meta.noise = noise;
  ds.meta.seed = seed;
  return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  ds.validate();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  }
  write_meta(os, ds.meta);

  const Eigen::Index n = ds.state_dim();
  const auto names = column_names(n);
  for (std::size_t i = 0; i < names.size(); ++i) {
    os << (i ? "," : "") << names[i];
  }
  os << '\n';
  for (Eigen::Index t = 0; t < ds.length(); ++t) {
    os << t << ',' << text::format_double(ds.u(t)) << ',' << text::format_double(ds.y(t));
    for (Eigen::Index i = 0; i < n; ++i) os << ',' << text::format_double(ds.x(i, t));
    for (Eigen::Index i = 0; i < n; ++i) os << ',' << text::format_double(ds.w(i, t));
    os << ',' << text::format_double(ds.v(t)) << ',' << text::format_double(ds.v_star(t)) << '\n';
  }
  if (!os) {
    throw std::runtime_error("write to '" + path.string() + "' failed");
  }
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) {
    throw ParseError("cannot open dataset '" + path.string() + "'", 0);
  }

  std::unordered_map<std::string, std::pair<std::string, std::size_t>> kv;
  std::vector<std::string> header;
  std::size_t header_line = 0;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;

  while (std::getline(is, line)) {
    ++line_no;
    const std::string_view view = text::trim(line);
    if (view.empty()) continue;
    if (view.front() == '#') {
      if (!header.empty()) {
        throw ParseError("metadata line after column header", line_no);
      }
      const std::string_view body = text::trim(view.substr(1));
      const auto eq = body.find('=');
      if (eq == std::string_view::npos) {
        throw ParseError("metadata line is not key=value", line_no);
      }
      kv[std::string(text::trim(body.substr(0, eq)))] = {std::string(text::trim(body.substr(eq + 1))), line_no};
      continue;
    }
    if (header.empty()) {
      for (auto name : text::split(view, ',')) header.emplace_back(text::trim(name));
      header_line = line_no;
      continue;
    }
    const auto fields = text::split(view, ',');
    if (fields.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " fields, found " +
                           std::to_string(fields.size()),
                       line_no);
    }
    std::vector<double> row(fields.size());
    for (std::size_t i = 0; i < fields.size(); ++i) {
      try {
        row[i] = text::parse_double(fields[i]);
      } catch (const std::invalid_argument& e) {
        throw ParseError("column '" + header[i] + "': " + e.what(), line_no);
      }
    }
    rows.push_back(std::move(row));
  }
  if (header.empty()) {
    throw ParseError("dataset has no column header", line_no);
  }

  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < header.size(); ++i) index[header[i]] = i;
  Eigen::Index n = 0;
  while (index.count("x" + std::to_string(n + 1))) ++n;
  if (n == 0) {
    throw ParseError("missing column 'x1'", header_line);
  }
  for (const auto& name : column_names(n)) {
    if (!index.count(name)) {
      throw ParseError("missing column '" + name + "'", header_line);
    }
  }
  if (rows.empty()) {
    throw ParseError("dataset has no rows (L = 0)", header_line);
  }

  const auto L = static_cast<Eigen::Index>(rows.size());
  Dataset ds;
  ds.u.resize(L);
  ds.y.resize(L);
  ds.v.resize(L);
  ds.v_star.resize(L);
  ds.x.resize(n, L);
  ds.w.resize(n, L);
  for (Eigen::Index t = 0; t < L; ++t) {
    const auto& row = rows[static_cast<std::size_t>(t)];
    ds.u(t) = row[index["u"]];
    ds.y(t) = row[index["y"]];
    ds.v(t) = row[index["v"]];
    ds.v_star(t) = row[index["vstar"]];
    for (Eigen::Index i = 0; i < n; ++i) {
      ds.x(i, t) = row[index["x" + std::to_string(i + 1)]];
      ds.w(i, t) = row[index["w" + std::to_string(i + 1)]];
    }
  }
  ds.meta = read_meta(kv);
  if (ds.meta.model && ds.meta.model->order() != n) {
    throw ParseError("metadata model order disagrees with the number of state columns", header_line);
  }
  return ds;
}

}  // namespace corrkal
