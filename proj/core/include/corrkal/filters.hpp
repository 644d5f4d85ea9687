#pragma once

#include <Eigen/Dense>
#include <cstddef>

#include "corrkal/model.hpp"

namespace corrkal {

/// Corrected estimate after the last step, plus the (u, y) pair that drives the next prediction.
struct FilterState {
  Eigen::VectorXd x_hat;
  Eigen::MatrixXd P;
  std::size_t t = 0;
  double u_prev = 0.0;
  double y_prev = 0.0;

  /// x_hat = 0, P = 0: the known initial condition x(0) = 0.
  static FilterState zero(Eigen::Index n);
};

/// Per-step quantities written to filter traces.
struct StepDiagnostics {
  Eigen::VectorXd gain;
  Eigen::MatrixXd P_pred;
  double innovation = 0.0;
  double innovation_variance = 0.0;
};

/**
 * Matrices consumed by the shared predict/correct kernel:
 *
 *   x_p = F x + G u(t-1) + T y(t-1),      P_p = F P F' + Q
 *   K   = P_p H' / (H P_p H' + R),         ν   = y(t) - H x_p - d u(t)
 *   x   = x_p + K ν,                       P   = P_p - K (P_p H')'
 *
 * With T = 0 this is the standard filter.
 */
struct LinearFilterMatrices {
  Eigen::MatrixXd F;
  Eigen::VectorXd G;
  Eigen::VectorXd T;
  Eigen::MatrixXd Q;
  double R = 1.0;
  double d = 0.0;
};

FilterState kalman_step(const FilterState& state, const LinearFilterMatrices& m, double u, double y,
                        StepDiagnostics* diagnostics = nullptr);

/// Decorrelated filter setup: T = S/R, F̄ = F - T H, Ḡ = G - T d, Q̄ = Q - T S'.
struct CnkfConfig {
  Eigen::VectorXd T;
  Eigen::MatrixXd F_bar;
  Eigen::VectorXd G_bar;
  Eigen::MatrixXd Q_bar;
  Eigen::VectorXd S;
  double R = 1.0;
  double d = 0.0;
  /// Q̄ had a negative eigenvalue beyond tolerance. Reported, not fatal.
  bool q_bar_indefinite = false;

  LinearFilterMatrices matrices() const;
};

CnkfConfig cnkf_init(const ObserverCanonicalModel& model, const Eigen::MatrixXd& Q, double R,
                     const Eigen::VectorXd& S);

FilterState cnkf_step(const FilterState& state, const CnkfConfig& cfg, double u, double y,
                      StepDiagnostics* diagnostics = nullptr);

FilterState skf_step(const FilterState& state, const ObserverCanonicalModel& model, const Eigen::MatrixXd& Q,
                     double R, double u, double y, StepDiagnostics* diagnostics = nullptr);

/**
 * Augmented-state filter on z = [x; w]. The appended process noise w(t) shares
 * covariance S with v(t), which gives the gains
 *
 *   k_x = P_p H' / (H P_p H' + R),   k_w = S / (H P_p H' + R)
 *
 * and the prediction P_p(t+1) = F P_c F' + F P_xw + P_wx F' + P_w.
 */
struct AugFilterState {
  Eigen::VectorXd x_hat;
  Eigen::VectorXd w_hat;
  Eigen::MatrixXd P;  ///< 2n x 2n, blocks [[P_c, P_xw], [P_wx, P_w]]
  std::size_t t = 0;
  double u_prev = 0.0;
  double y_prev = 0.0;

  /// x_hat = 0, P_c = 0, P_w = Q.
  static AugFilterState zero(const Eigen::MatrixXd& Q);

  Eigen::Index state_dim() const noexcept { return x_hat.size(); }
  Eigen::MatrixXd P_c() const { return P.topLeftCorner(state_dim(), state_dim()); }
  Eigen::MatrixXd P_xw() const { return P.topRightCorner(state_dim(), state_dim()); }
  Eigen::MatrixXd P_w() const { return P.bottomRightCorner(state_dim(), state_dim()); }
};

struct AugDiagnostics {
  StepDiagnostics base;
  Eigen::VectorXd k_x;
  Eigen::VectorXd k_w;
};

/// `measurement_offset` is subtracted from y before the innovation (the caller's J-lag terms).
AugFilterState augkf_step(const AugFilterState& state, const Eigen::MatrixXd& F, const Eigen::VectorXd& G, double d,
                          const Eigen::MatrixXd& Q, double R, const Eigen::VectorXd& S, double u, double y,
                          double measurement_offset = 0.0, AugDiagnostics* diagnostics = nullptr);

AugFilterState augkf_step(const AugFilterState& state, const ObserverCanonicalModel& model, const Eigen::MatrixXd& Q,
                          double R, const Eigen::VectorXd& S, double u, double y,
                          AugDiagnostics* diagnostics = nullptr);

/// Iterates the prediction Riccati recursion of `m` to a fixed point. Returns the predicted covariance.
Eigen::MatrixXd steady_state_prediction_covariance(const LinearFilterMatrices& m, double tol = 1e-13,
                                                   int max_iterations = 100000);

}  // namespace corrkal
