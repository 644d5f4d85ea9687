#include "corrkal/analysis.hpp"

#include <cmath>
#include <stdexcept>

#include "corrkal/errors.hpp"
#include "corrkal/filters.hpp"

namespace corrkal {

namespace {

double predicted_output_variance(const Eigen::MatrixXd& P_pred) {
  if (P_pred.rows() < 1 || P_pred.rows() != P_pred.cols()) {
    throw DimensionError("predicted covariance must be square and non-empty");
  }
  const double hph = P_pred(0, 0);
  if (!(hph > 0.0)) {
    throw NumericalError("H P H' must be positive, got " + std::to_string(hph));
  }
  return hph;
}

}  // namespace

double delta_theta(const Eigen::VectorXd& theta_hat, const Eigen::VectorXd& theta_true) {
  if (theta_hat.size() != theta_true.size()) {
    throw DimensionError("delta_theta: vectors have different lengths");
  }
  const double denom = theta_true.norm();
  if (denom == 0.0) {
    throw std::domain_error("delta_theta: true parameter vector has zero norm");
  }
  return (theta_hat - theta_true).norm() / denom;
}

double rmse_state(const Eigen::VectorXd& x_hat, const Eigen::VectorXd& x_true) {
  if (x_hat.size() != x_true.size() || x_hat.size() == 0) {
    throw DimensionError("rmse_state: sequences must be non-empty and of equal length");
  }
  return std::sqrt((x_hat - x_true).squaredNorm() / static_cast<double>(x_hat.size()));
}

AccuracyReport accuracy_report(const Eigen::VectorXd& theta_hat, const Eigen::VectorXd& theta_true,
                               const Eigen::VectorXd& x1_hat, const Eigen::VectorXd& x1_true) {
  AccuracyReport report;
  report.delta_theta = delta_theta(theta_hat, theta_true);
  report.rmse_x1 = rmse_state(x1_hat, x1_true);
  report.parameter_errors = theta_hat - theta_true;
  return report;
}

MeasurementCovariance measurement_covariance_theory(double P_prev, double Q_bar, double R, double S) {
  MeasurementCovariance out;
  out.P0 = P_prev + Q_bar + R;
  out.P = out.P0 - 2.0 * S;
  return out;
}

std::vector<MeasurementCovarianceRow> measurement_covariance_curve(double Q_bar, double R, double S, int steps) {
  std::vector<MeasurementCovarianceRow> rows;
  rows.reserve(static_cast<std::size_t>(std::max(steps, 0)));
  double P_prev = R;
  for (int k = 1; k <= steps; ++k) {
    const MeasurementCovariance mc = measurement_covariance_theory(P_prev, Q_bar, R, S);
    rows.push_back({k, S, mc.P, mc.P0});
    P_prev = mc.P;
  }
  return rows;
}

StateNoiseCrossCovariance state_noise_cross_cov(const Eigen::VectorXd& S, const Eigen::MatrixXd& P_pred) {
  if (S.size() != P_pred.rows()) {
    throw DimensionError("state_noise_cross_cov: S length must match covariance size");
  }
  const double hph = predicted_output_variance(P_pred);
  StateNoiseCrossCovariance out;
  out.cross = -(S / hph) * P_pred.row(0);
  out.trace = out.cross.trace();
  return out;
}

ConditionalNoiseMoments conditional_noise_moments(const Eigen::VectorXd& S, const Eigen::MatrixXd& Q,
                                                  const Eigen::MatrixXd& P_pred) {
  if (S.size() != Q.rows() || Q.rows() != Q.cols() || S.size() != P_pred.rows()) {
    throw DimensionError("conditional_noise_moments: dimension mismatch");
  }
  const double hph = predicted_output_variance(P_pred);
  ConditionalNoiseMoments out;
  out.gain = S / hph;
  out.covariance = Q - S * S.transpose() / hph;
  return out;
}

std::vector<CrossCovarianceRow> cross_covariance_table(const ObserverCanonicalModel& model,
                                                       const Eigen::VectorXd& q_diag, double r,
                                                       const std::vector<double>& rhos, UMode mode) {
  std::vector<CrossCovarianceRow> rows;
  rows.reserve(rhos.size());
  for (const double rho : rhos) {
    const NoiseSpec spec{q_diag, r, rho, mode};
    const JointCovariance u = build_joint_covariance(spec);
    const CnkfConfig cfg = cnkf_init(model, u.Q(), u.R(), u.S());
    const Eigen::MatrixXd P_pred = steady_state_prediction_covariance(cfg.matrices());
    rows.push_back({rho, state_noise_cross_cov(u.S(), P_pred).trace});
  }
  return rows;
}

}  // namespace corrkal
