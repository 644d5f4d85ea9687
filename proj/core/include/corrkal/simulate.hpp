#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "corrkal/model.hpp"
#include "corrkal/noise.hpp"

namespace corrkal {

/// Provenance carried in the dataset file header.
struct DatasetMeta {
  std::optional<ObserverCanonicalModel> model;  ///< ground truth; absent for external data
  std::optional<NoiseSpec> noise;
  std::optional<std::uint64_t> seed;
  std::string preset;
  std::map<std::string, std::string> extra;
};

struct Dataset {
  Eigen::VectorXd u;
  Eigen::VectorXd y;
  Eigen::MatrixXd x;  ///< n x L true states
  Eigen::MatrixXd w;  ///< n x L process noise
  Eigen::VectorXd v;
  Eigen::VectorXd v_star;
  DatasetMeta meta;

  Eigen::Index length() const noexcept { return u.size(); }
  Eigen::Index state_dim() const noexcept { return x.rows(); }

  /// Throws DimensionError if sequence lengths disagree or L == 0.
  void validate() const;
};

/// v*(t) = v(t) + sum_i J_i v(t-i), zero pre-history.
Eigen::VectorXd colour_measurement_noise(const Eigen::VectorXd& v, const Eigen::VectorXd& j);

/// Runs the recursion from x(0) = 0 with the supplied noise sequences.
Dataset simulate_with_noise(const ObserverCanonicalModel& model, const Eigen::VectorXd& u,
                            const Eigen::MatrixXd& w, const Eigen::VectorXd& v);

/// Draws correlated noise from the spec and simulates. Metadata records model, noise and seed.
Dataset simulate(const ObserverCanonicalModel& model, const NoiseSpec& noise, const Eigen::VectorXd& u,
                 std::uint64_t seed);

/// CSV with '#'-prefixed key=value header lines, then `t,u,y,x1..xn,w1..wn,v,vstar`.
void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace corrkal
