#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string_view>
#include <utility>

namespace corrkal {

/// How the off-diagonal entries of the joint covariance U are filled.
enum class UMode {
  /// Every pair of channels (w_1..w_n, v) has correlation rho.
  kEquicorrelated,
  /// Only the w_i / v pairs are correlated; Q stays diagonal.
  kWvOnly,
};

std::string_view to_string(UMode mode) noexcept;
UMode parse_u_mode(std::string_view text);

/// Per-channel noise variances and the process/measurement correlation coefficient.
struct NoiseSpec {
  Eigen::VectorXd q_diag;  ///< variances of w_1..w_n
  double r = 1.0;          ///< variance of v
  double rho = 0.0;        ///< correlation coefficient in [-1, 1]
  UMode mode = UMode::kEquicorrelated;

  void validate() const;
};

/// (n+1)x(n+1) covariance of [w_1..w_n, v].
class JointCovariance {
 public:
  explicit JointCovariance(Eigen::MatrixXd u);

  const Eigen::MatrixXd& matrix() const noexcept { return u_; }
  Eigen::Index state_dim() const noexcept { return u_.rows() - 1; }
  Eigen::MatrixXd Q() const { return u_.topLeftCorner(state_dim(), state_dim()); }
  Eigen::VectorXd S() const { return u_.topRightCorner(state_dim(), 1); }
  double R() const { return u_(state_dim(), state_dim()); }

 private:
  Eigen::MatrixXd u_;
};

/// S_i = rho * sqrt(q_i) * sqrt(r).
Eigen::VectorXd cross_covariance(const NoiseSpec& spec);

/// Builds U in the spec's mode. Throws PsdError naming the admissible rho range if U is indefinite.
JointCovariance build_joint_covariance(const NoiseSpec& spec);

/// Closed interval of rho for which build_joint_covariance succeeds with the given variances.
std::pair<double, double> admissible_rho_range(const Eigen::VectorXd& q_diag, UMode mode);

struct PsdReport {
  bool ok = false;
  double min_eigenvalue = 0.0;
};

/// ok iff min eigenvalue >= -1e-10 * (1 + max |eigenvalue|). Throws DimensionError on non-symmetric input.
PsdReport psd_check(const Eigen::MatrixXd& m);

struct NoiseSequences {
  Eigen::MatrixXd w;  ///< n x L
  Eigen::VectorXd v;  ///< L
};

/**
 * Draws L samples of [w; v] ~ N(0, U) through the correlating filter V Λ^{1/2}
 * taken from U = V Λ V'. Eigenvalues in (-1e-10 λ_max, 0) are clamped to zero;
 * anything more negative is rejected.
 */
NoiseSequences sample_correlated(const JointCovariance& u, Eigen::Index length, std::uint64_t seed);

/// Two-level maximal-length sequence from a 16-bit LFSR (period 65535); bit 0 -> lo, 1 -> hi.
Eigen::VectorXd prbs_input(Eigen::Index length, double lo, double hi, std::uint64_t seed);

}  // namespace corrkal
