#pragma once

#include <Eigen/Dense>
#include <vector>

#include "corrkal/model.hpp"
#include "corrkal/noise.hpp"

namespace corrkal {

/// ‖θ̂ - θ‖ / ‖θ‖. Throws DimensionError on length mismatch and std::domain_error if ‖θ‖ = 0.
double delta_theta(const Eigen::VectorXd& theta_hat, const Eigen::VectorXd& theta_true);

/// sqrt(mean((x̂ - x)^2)). Throws DimensionError on length mismatch or empty input.
double rmse_state(const Eigen::VectorXd& x_hat, const Eigen::VectorXd& x_true);

struct AccuracyReport {
  double delta_theta = 0.0;
  double rmse_x1 = 0.0;
  Eigen::VectorXd parameter_errors;  ///< θ̂ - θ, per entry
};

AccuracyReport accuracy_report(const Eigen::VectorXd& theta_hat, const Eigen::VectorXd& theta_true,
                               const Eigen::VectorXd& x1_hat, const Eigen::VectorXd& x1_true);

// Output-variance propagation for the scalar random walk (F = I, H = 1, u = 0).
struct MeasurementCovariance {
  double P = 0.0;   ///< with cross-covariance S
  double P0 = 0.0;  ///< same step with S = 0
};

/// P = P_prev + Q̄ + R - 2S, P0 = P_prev + Q̄ + R.
MeasurementCovariance measurement_covariance_theory(double P_prev, double Q_bar, double R, double S);

struct MeasurementCovarianceRow {
  int step = 0;
  double S = 0.0;
  double P = 0.0;
  double P0 = 0.0;
};

/// Iterates the recursion from P(y(0)) = R for `steps` steps; P0 on each row uses that row's P_prev.
std::vector<MeasurementCovarianceRow> measurement_covariance_curve(double Q_bar, double R, double S, int steps);

struct StateNoiseCrossCovariance {
  Eigen::MatrixXd cross;  ///< -S (H P H')^-1 H P
  double trace = 0.0;
};

/// Cross-covariance between the filtered process noise and the filtered state, H = e_1.
StateNoiseCrossCovariance state_noise_cross_cov(const Eigen::VectorXd& S, const Eigen::MatrixXd& P_pred);

/// Conditional moments of w(k) given y(k): mean gain S (H P H')^-1 and covariance Q - S (H P H')^-1 S'.
struct ConditionalNoiseMoments {
  Eigen::VectorXd gain;
  Eigen::MatrixXd covariance;
};

ConditionalNoiseMoments conditional_noise_moments(const Eigen::VectorXd& S, const Eigen::MatrixXd& Q,
                                                  const Eigen::MatrixXd& P_pred);

struct CrossCovarianceRow {
  double rho = 0.0;
  double trace = 0.0;
};

/**
 * Trace of the state/process-noise cross-covariance at the converged CN-KF
 * predicted covariance, for each rho. The model supplies the true parameters.
 */
std::vector<CrossCovarianceRow> cross_covariance_table(const ObserverCanonicalModel& model,
                                                       const Eigen::VectorXd& q_diag, double r,
                                                       const std::vector<double>& rhos, UMode mode);

}  // namespace corrkal
