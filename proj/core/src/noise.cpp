#include "corrkal/noise.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <string>

#include "corrkal/errors.hpp"

namespace corrkal {

namespace {

constexpr double kSymmetryTol = 1e-9;
constexpr double kPsdRelTol = 1e-10;

std::string describe_range(const std::pair<double, double>& range) {
  std::ostringstream os;
  os << "[" << range.first << ", " << range.second << "]";
  return os.str();
}

}  // namespace

std::string_view to_string(UMode mode) noexcept {
  switch (mode) {
    case UMode::kEquicorrelated:
      return "equicorrelated";
    case UMode::kWvOnly:
      return "wv_only";
  }
  return "unknown";
}

UMode parse_u_mode(std::string_view text) {
  if (text == "equicorrelated") return UMode::kEquicorrelated;
  if (text == "wv_only") return UMode::kWvOnly;
  throw ConfigError("unknown u_mode '" + std::string(text) + "' (expected equicorrelated|wv_only)");
}

void NoiseSpec::validate() const {
  if (q_diag.size() < 1) {
    throw DimensionError("q_diag must have at least one entry");
  }
  if ((q_diag.array() < 0.0).any() || !q_diag.allFinite()) {
    throw ConfigError("q_diag entries must be finite and >= 0");
  }
  if (!(r > 0.0) || !std::isfinite(r)) {
    throw ConfigError("measurement variance r must be > 0");
  }
  if (!(std::abs(rho) <= 1.0)) {
    throw ConfigError("rho must lie in [-1, 1]");
  }
}

JointCovariance::JointCovariance(Eigen::MatrixXd u) : u_(std::move(u)) {
  if (u_.rows() != u_.cols() || u_.rows() < 2) {
    throw DimensionError("joint covariance must be square with at least 2 channels");
  }
}

Eigen::VectorXd cross_covariance(const NoiseSpec& spec) {
  spec.validate();
  return spec.rho * spec.q_diag.array().sqrt() * std::sqrt(spec.r);
}

std::pair<double, double> admissible_rho_range(const Eigen::VectorXd& q_diag, UMode mode) {
  const auto active = static_cast<double>((q_diag.array() > 0.0).count());
  if (active == 0.0) {
    return {-1.0, 1.0};
  }
  if (mode == UMode::kEquicorrelated) {
    // Equicorrelation over m = active + 1 channels: eigenvalues 1 + (m-1) rho and 1 - rho.
    return {std::max(-1.0, -1.0 / active), 1.0};
  }
  // Schur complement Q - S S'/r = D^1/2 (I - rho^2 1 1') D^1/2.
  const double bound = std::min(1.0, 1.0 / std::sqrt(active));
  return {-bound, bound};
}

JointCovariance build_joint_covariance(const NoiseSpec& spec) {
  spec.validate();
  const Eigen::Index n = spec.q_diag.size();
  Eigen::VectorXd variances(n + 1);
  variances << spec.q_diag, spec.r;
  const Eigen::VectorXd sd = variances.array().sqrt();

  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(n + 1, n + 1);
  if (spec.mode == UMode::kEquicorrelated) {
    u = spec.rho * sd * sd.transpose();
  } else {
    u.topRightCorner(n, 1) = cross_covariance(spec);
    u.bottomLeftCorner(1, n) = u.topRightCorner(n, 1).transpose();
  }
  u.diagonal() = variances;

  const PsdReport report = psd_check(u);
  if (!report.ok) {
    std::ostringstream os;
    os << "joint noise covariance is not positive semidefinite for rho = " << spec.rho << " in "
       << to_string(spec.mode) << " mode (min eigenvalue " << report.min_eigenvalue
       << "); admissible rho range is " << describe_range(admissible_rho_range(spec.q_diag, spec.mode));
    throw PsdError(os.str(), report.min_eigenvalue);
  }
  return JointCovariance(std::move(u));
}

PsdReport psd_check(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw DimensionError("psd_check: matrix must be square and non-empty");
  }
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol) {
    throw DimensionError("psd_check: matrix is not symmetric");
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  PsdReport report;
  report.min_eigenvalue = lambda.minCoeff();
  report.ok = report.min_eigenvalue >= -kPsdRelTol * (1.0 + lambda.cwiseAbs().maxCoeff());
  return report;
}

NoiseSequences sample_correlated(const JointCovariance& u, Eigen::Index length, std::uint64_t seed) {
  if (length < 1) {
    throw DimensionError("sample_correlated: length must be >= 1");
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(u.matrix());
  Eigen::VectorXd lambda = eig.eigenvalues();
  const double lambda_max = lambda.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda(i) < 0.0) {
      if (lambda(i) < -kPsdRelTol * lambda_max) {
        throw PsdError("sample_correlated: covariance has eigenvalue " + std::to_string(lambda(i)),
                       lambda(i));
      }
      lambda(i) = 0.0;
    }
  }
  const Eigen::MatrixXd filter = eig.eigenvectors() * lambda.cwiseSqrt().asDiagonal();

  const Eigen::Index channels = u.matrix().rows();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd z(channels, length);
  for (Eigen::Index t = 0; t < length; ++t) {
    for (Eigen::Index c = 0; c < channels; ++c) {
      z(c, t) = normal(rng);
    }
  }
  const Eigen::MatrixXd e = filter * z;

  NoiseSequences out;
  out.w = e.topRows(channels - 1);
  out.v = e.row(channels - 1).transpose();
  return out;
}

Eigen::VectorXd prbs_input(Eigen::Index length, double lo, double hi, std::uint64_t seed) {
  if (length < 1) {
    throw DimensionError("prbs_input: length must be >= 1");
  }
  if (!(lo < hi)) {
    throw ConfigError("prbs_input: levels must satisfy lo < hi");
  }
  std::mt19937_64 mix(seed);
  auto state = static_cast<std::uint16_t>(mix() & 0xFFFFu);
  if (state == 0) state = 1;

  Eigen::VectorXd out(length);
  for (Eigen::Index t = 0; t < length; ++t) {
    // x^16 + x^14 + x^13 + x^11 + 1
    const auto bit = static_cast<std::uint16_t>(((state >> 0) ^ (state >> 2) ^ (state >> 3) ^ (state >> 5)) & 1u);
    out(t) = (state & 1u) ? hi : lo;
    state = static_cast<std::uint16_t>((state >> 1) | (bit << 15));
  }
  return out;
}

}  // namespace corrkal
