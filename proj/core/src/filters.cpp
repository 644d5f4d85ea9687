#include "corrkal/filters.hpp"

#include <string>

#include "corrkal/errors.hpp"
#include "corrkal/noise.hpp"

namespace corrkal {

namespace {

void symmetrize(Eigen::MatrixXd& P) { P = 0.5 * (P + P.transpose()).eval(); }

double checked_innovation_variance(double s, std::size_t t) {
  if (!(s > 0.0)) {
    throw NumericalError("innovation variance " + std::to_string(s) + " is not positive at t = " +
                         std::to_string(t));
  }
  return s;
}

}  // namespace

FilterState FilterState::zero(Eigen::Index n) {
  FilterState s;
  s.x_hat = Eigen::VectorXd::Zero(n);
  s.P = Eigen::MatrixXd::Zero(n, n);
  return s;
}

FilterState kalman_step(const FilterState& state, const LinearFilterMatrices& m, double u, double y,
                        StepDiagnostics* diagnostics) {
  const Eigen::VectorXd x_pred = m.F * state.x_hat + m.G * state.u_prev + m.T * state.y_prev;
  Eigen::MatrixXd P_pred = m.F * state.P * m.F.transpose() + m.Q;

  // H = e_1: H P_p H' = P_p(0,0), P_p H' = first column.
  const double s = checked_innovation_variance(P_pred(0, 0) + m.R, state.t + 1);
  const Eigen::VectorXd K = P_pred.col(0) / s;
  const double innovation = y - x_pred(0) - m.d * u;

  FilterState next;
  next.x_hat = x_pred + K * innovation;
  next.P = P_pred - K * P_pred.col(0).transpose();
  symmetrize(next.P);
  next.t = state.t + 1;
  next.u_prev = u;
  next.y_prev = y;

  if (diagnostics) {
    diagnostics->gain = K;
    diagnostics->P_pred = std::move(P_pred);
    diagnostics->innovation = innovation;
    diagnostics->innovation_variance = s;
  }
  return next;
}

LinearFilterMatrices CnkfConfig::matrices() const { return {F_bar, G_bar, T, Q_bar, R, d}; }

CnkfConfig cnkf_init(const ObserverCanonicalModel& model, const Eigen::MatrixXd& Q, double R,
                     const Eigen::VectorXd& S) {
  model.validate();
  const Eigen::Index n = model.order();
  if (!(R > 0.0)) {
    throw ConfigError("cnkf_init: measurement variance R must be > 0");
  }
  if (Q.rows() != n || Q.cols() != n || S.size() != n) {
    throw DimensionError("cnkf_init: Q must be n x n and S length n");
  }
  CnkfConfig cfg;
  cfg.T = S / R;
  const DecorrelatedMatrices dm = decorrelate_matrices(model, cfg.T);
  cfg.F_bar = dm.F_bar;
  cfg.G_bar = dm.G_bar;
  cfg.Q_bar = Q - cfg.T * S.transpose();
  symmetrize(cfg.Q_bar);
  cfg.S = S;
  cfg.R = R;
  cfg.d = model.d;
  cfg.q_bar_indefinite = !psd_check(cfg.Q_bar).ok;
  return cfg;
}

FilterState cnkf_step(const FilterState& state, const CnkfConfig& cfg, double u, double y,
                      StepDiagnostics* diagnostics) {
  return kalman_step(state, cfg.matrices(), u, y, diagnostics);
}

FilterState skf_step(const FilterState& state, const ObserverCanonicalModel& model, const Eigen::MatrixXd& Q,
                     double R, double u, double y, StepDiagnostics* diagnostics) {
  model.validate();
  const Eigen::Index n = model.order();
  if (Q.rows() != n || Q.cols() != n) {
    throw DimensionError("skf_step: Q must be n x n");
  }
  const LinearFilterMatrices m{build_F(model.f), model.g, Eigen::VectorXd::Zero(n), Q, R, model.d};
  return kalman_step(state, m, u, y, diagnostics);
}

AugFilterState AugFilterState::zero(const Eigen::MatrixXd& Q) {
  const Eigen::Index n = Q.rows();
  AugFilterState s;
  s.x_hat = Eigen::VectorXd::Zero(n);
  s.w_hat = Eigen::VectorXd::Zero(n);
  s.P = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  s.P.bottomRightCorner(n, n) = Q;
  return s;
}

AugFilterState augkf_step(const AugFilterState& state, const Eigen::MatrixXd& F, const Eigen::VectorXd& G, double d,
                          const Eigen::MatrixXd& Q, double R, const Eigen::VectorXd& S, double u, double y,
                          double measurement_offset, AugDiagnostics* diagnostics) {
  const Eigen::Index n = state.state_dim();
  if (F.rows() != n || G.size() != n || Q.rows() != n || S.size() != n || state.P.rows() != 2 * n) {
    throw DimensionError("augkf_step: dimension mismatch");
  }
  const auto P_c = state.P.topLeftCorner(n, n);
  const auto P_xw = state.P.topRightCorner(n, n);
  const auto P_wx = state.P.bottomLeftCorner(n, n);
  const auto P_w = state.P.bottomRightCorner(n, n);

  // [x; w] -> x(t+1) = F x + G u + w; the fresh w(t+1) enters with covariance Q.
  const Eigen::VectorXd x_pred = F * state.x_hat + G * state.u_prev + state.w_hat;
  Eigen::MatrixXd P_pred = F * P_c * F.transpose() + F * P_xw + P_wx * F.transpose() + P_w;

  const double s = checked_innovation_variance(P_pred(0, 0) + R, state.t + 1);
  const Eigen::VectorXd k_x = P_pred.col(0) / s;
  const Eigen::VectorXd k_w = S / s;
  const double innovation = y - measurement_offset - x_pred(0) - d * u;

  AugFilterState next;
  next.x_hat = x_pred + k_x * innovation;
  next.w_hat = k_w * innovation;
  next.P.resize(2 * n, 2 * n);
  next.P.topLeftCorner(n, n) = P_pred - k_x * P_pred.col(0).transpose();
  next.P.topRightCorner(n, n) = -k_x * S.transpose();
  next.P.bottomLeftCorner(n, n) = -k_w * P_pred.col(0).transpose();
  next.P.bottomRightCorner(n, n) = Q - k_w * S.transpose();
  symmetrize(next.P);
  next.t = state.t + 1;
  next.u_prev = u;
  next.y_prev = y;

  if (diagnostics) {
    diagnostics->base.gain = k_x;
    diagnostics->base.P_pred = std::move(P_pred);
    diagnostics->base.innovation = innovation;
    diagnostics->base.innovation_variance = s;
    diagnostics->k_x = k_x;
    diagnostics->k_w = k_w;
  }
  return next;
}

AugFilterState augkf_step(const AugFilterState& state, const ObserverCanonicalModel& model, const Eigen::MatrixXd& Q,
                          double R, const Eigen::VectorXd& S, double u, double y, AugDiagnostics* diagnostics) {
  model.validate();
  return augkf_step(state, build_F(model.f), model.g, model.d, Q, R, S, u, y, 0.0, diagnostics);
}

Eigen::MatrixXd steady_state_prediction_covariance(const LinearFilterMatrices& m, double tol, int max_iterations) {
  const Eigen::Index n = m.F.rows();
  Eigen::MatrixXd P_pred = m.Q;
  for (int k = 0; k < max_iterations; ++k) {
    const double s = checked_innovation_variance(P_pred(0, 0) + m.R, static_cast<std::size_t>(k));
    const Eigen::VectorXd K = P_pred.col(0) / s;
    Eigen::MatrixXd P_c = P_pred - K * P_pred.col(0).transpose();
    Eigen::MatrixXd next = m.F * P_c * m.F.transpose() + m.Q;
    symmetrize(next);
    const double diff = (next - P_pred).norm();
    P_pred = std::move(next);
    if (diff < tol * (1.0 + P_pred.norm())) {
      return P_pred;
    }
  }
  throw NumericalError("Riccati recursion did not converge in " + std::to_string(max_iterations) +
                       " iterations (n = " + std::to_string(n) + ")");
}

}  // namespace corrkal
