#include "corrkal/rgels.hpp"

#include <cmath>
#include <string>
#include <variant>

#include "corrkal/analysis.hpp"
#include "corrkal/errors.hpp"

namespace corrkal {

namespace {

void shift_in(Eigen::VectorXd& buffer, double value) {
  if (buffer.size() == 0) return;
  for (Eigen::Index k = buffer.size() - 1; k > 0; --k) buffer(k) = buffer(k - 1);
  buffer(0) = value;
}

// Column 0 (lag 1) is not yet reconstructable; the fresh reconstruction lands at lag 2.
void shift_in_delayed(Eigen::MatrixXd& buffer, const Eigen::VectorXd& lag2_value) {
  const Eigen::Index depth = buffer.cols();
  for (Eigen::Index k = depth - 1; k > 1; --k) buffer.col(k) = buffer.col(k - 1);
  if (depth > 1) buffer.col(1) = lag2_value;
  buffer.col(0).setZero();
}

}  // namespace

std::string_view to_string(Algorithm algorithm) noexcept {
  switch (algorithm) {
    case Algorithm::kKfCnRgels:
      return "kf-cn-rgels";
    case Algorithm::kSkf:
      return "skf";
    case Algorithm::kAugKf:
      return "aug-kf";
  }
  return "unknown";
}

Algorithm parse_algorithm(std::string_view text) {
  if (text == "kf-cn-rgels") return Algorithm::kKfCnRgels;
  if (text == "skf") return Algorithm::kSkf;
  if (text == "aug-kf") return Algorithm::kAugKf;
  throw ConfigError("unknown algorithm '" + std::string(text) + "' (expected kf-cn-rgels|skf|aug-kf)");
}

RlsEstimate rls_step(const RlsEstimate& prev, const Eigen::VectorXd& phi, double target) {
  if (phi.size() != prev.theta.size() || prev.P.rows() != phi.size() || prev.P.cols() != phi.size()) {
    throw DimensionError("rls_step: regressor length " + std::to_string(phi.size()) + " does not match theta/P");
  }
  Eigen::MatrixXd factor = prev.factor;
  if (factor.size() == 0) {
    Eigen::LLT<Eigen::MatrixXd> llt(prev.P);
    if (llt.info() != Eigen::Success) throw NumericalError("rls_step: P is not positive definite");
    factor = llt.matrixL();
  }
  const Eigen::VectorXd f = factor.transpose() * phi;
  const double alpha = 1.0 + f.squaredNorm();
  if (!(alpha >= 1.0 - 1e-9) || !std::isfinite(alpha)) {
    throw NumericalError("RLS denominator 1 + phi'P phi = " + std::to_string(alpha) + " < 1");
  }
  const Eigen::VectorXd Sf = factor * f;  // P phi
  const double residual = target - phi.dot(prev.theta);

  RlsEstimate next;
  next.theta = prev.theta + Sf * (residual / alpha);
  next.factor = factor - Sf * f.transpose() / (alpha + std::sqrt(alpha));
  next.P = next.factor * next.factor.transpose();
  return next;
}

RgelsState RgelsState::initial(Eigen::Index n, Eigen::Index n_j, double p0, const Eigen::VectorXd& theta0) {
  if (n < 1 || n_j < 0) {
    throw DimensionError("RgelsState: invalid orders");
  }
  const Eigen::Index ns = 2 * n + 1 + n_j;
  if (theta0.size() != ns) {
    throw DimensionError("RgelsState: initial theta has length " + std::to_string(theta0.size()) +
                         ", expected " + std::to_string(ns));
  }
  if (!(p0 > 0.0)) {
    throw ConfigError("RgelsState: p0 must be > 0");
  }
  RgelsState s;
  s.rls.theta = theta0;
  s.rls.P = p0 * Eigen::MatrixXd::Identity(ns, ns);
  s.rls.factor = std::sqrt(p0) * Eigen::MatrixXd::Identity(ns, ns);
  s.x1_hist = Eigen::VectorXd::Zero(n);
  s.u_hist = Eigen::VectorXd::Zero(n);
  s.y_hist = Eigen::VectorXd::Zero(n);
  s.v_hist = Eigen::VectorXd::Zero(n_j);
  s.vstar_hist = Eigen::VectorXd::Zero(n_j);
  s.wbar_hist = Eigen::MatrixXd::Zero(n, n);
  s.wraw_hist = Eigen::MatrixXd::Zero(n, n);
  return s;
}

Eigen::VectorXd build_info_vector(const RgelsState& state, double u_t) {
  const Eigen::Index n = state.order();
  const Eigen::Index n_j = state.noise_order();
  Eigen::VectorXd phi(2 * n + 1 + n_j);
  phi << -state.x1_hist, state.u_hist, u_t, state.v_hist;
  return phi;
}

double compute_gamma(const RgelsState& state, GammaSource source) {
  const Eigen::MatrixXd& hist = source == GammaSource::kDecorrelated ? state.wbar_hist : state.wraw_hist;
  // Component i at lag i: the diagonal of the lag buffer.
  return hist.diagonal().sum();
}

double compute_beta(const RgelsState& state, const Eigen::VectorXd& T) {
  if (T.size() != state.y_hist.size()) {
    throw DimensionError("compute_beta: T length must equal n");
  }
  return T.dot(state.y_hist);
}

RgelsState rls_update(const RgelsState& state, const Eigen::VectorXd& phi, double y_t, double gamma_t,
                      double beta_t) {
  RgelsState next = state;
  next.rls = rls_step(state.rls, phi, y_t - gamma_t - beta_t);
  return next;
}

NoiseEstimates estimate_noises(const RgelsState& state, const Eigen::VectorXd& T, const Eigen::VectorXd& x_hat_t,
                               const Eigen::VectorXd& x_hat_prev, double y_t, double u_t) {
  const Eigen::Index n = state.order();
  const Eigen::Index n_j = state.noise_order();
  if (T.size() != n || x_hat_t.size() != n || x_hat_prev.size() != n) {
    throw DimensionError("estimate_noises: dimension mismatch");
  }
  const Eigen::VectorXd& theta = state.rls.theta;
  const double d_hat = theta(2 * n);

  NoiseEstimates out;
  out.v_star = y_t - x_hat_t(0) - d_hat * u_t;
  out.v = out.v_star;
  for (Eigen::Index i = 0; i < n_j; ++i) {
    out.v -= theta(2 * n + 1 + i) * state.v_hist(i);
  }

  const double u_prev = state.u_hist(0);
  const double y_prev = state.y_hist(0);
  const Eigen::MatrixXd F_bar = build_F(theta.head(n));
  const Eigen::VectorXd G_bar = theta.segment(n, n);
  out.w_hat = x_hat_t - F_bar * x_hat_prev - G_bar * u_prev - T * (x_hat_prev(0) + d_hat * u_prev);
  const double v_star_prev = y_prev - x_hat_prev(0) - d_hat * u_prev;
  out.w_bar = out.w_hat - T * v_star_prev;
  return out;
}

RgelsState push_histories(const RgelsState& state, double x1_t, double u_t, double y_t, const NoiseEstimates& noise) {
  RgelsState next = state;
  shift_in(next.x1_hist, x1_t);
  shift_in(next.u_hist, u_t);
  shift_in(next.y_hist, y_t);
  shift_in(next.v_hist, noise.v);
  shift_in(next.vstar_hist, noise.v_star);
  shift_in_delayed(next.wbar_hist, noise.w_bar);
  shift_in_delayed(next.wraw_hist, noise.w_hat);
  next.t = state.t + 1;
  return next;
}

ParameterVector recover_parameters(const RgelsState& state, const Eigen::VectorXd& T) {
  return recover_theta(state.rls.theta, state.order(), T);
}

JointRunResult run_joint(const Dataset& dataset, const AssumedNoise& noise, const RgelsOptions& options) {
  dataset.validate();
  const Eigen::Index n = dataset.state_dim();
  const Eigen::Index L = dataset.length();
  const auto& truth = dataset.meta.model;

  Eigen::Index n_j = 0;
  if (options.noise_order) {
    n_j = *options.noise_order;
  } else if (truth) {
    n_j = truth->noise_order();
  } else {
    throw ConfigError("run_joint: noise order n_J is unknown (no true model in dataset and none given)");
  }
  if (truth && truth->order() != n) {
    throw DimensionError("run_joint: dataset model order disagrees with state columns");
  }
  if (noise.Q.rows() != n || noise.Q.cols() != n || noise.S.size() != n) {
    throw DimensionError("run_joint: assumed noise dimensions do not match the dataset");
  }
  if (!(noise.R > 0.0)) {
    throw ConfigError("run_joint: assumed R must be > 0");
  }

  const Eigen::Index ns = 2 * n + 1 + n_j;
  const bool decorrelate = options.algorithm == Algorithm::kKfCnRgels;
  const Eigen::VectorXd T = decorrelate ? Eigen::VectorXd(noise.S / noise.R) : Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd Q_filter = decorrelate ? Eigen::MatrixXd(noise.Q - T * noise.S.transpose()) : noise.Q;
  Q_filter = 0.5 * (Q_filter + Q_filter.transpose()).eval();

  Eigen::VectorXd theta0 = options.theta_init.value_or(Eigen::VectorXd::Constant(ns, options.theta0));
  RgelsState state = RgelsState::initial(n, n_j, options.p0, theta0);

  std::optional<ParameterVector> theta_true;
  if (truth) {
    theta_true = model_to_theta(*truth);
    if (theta_true->size() != ns) {
      throw DimensionError("run_joint: n_J disagrees with the dataset's true model");
    }
  }

  JointRunResult out;
  out.algorithm = options.algorithm;
  out.T = T;
  out.theta_trace.resize(ns, L);
  out.x_hat = Eigen::MatrixXd::Zero(n, L);
  out.gains = Eigen::MatrixXd::Zero(n, L);
  out.innovations = Eigen::VectorXd::Zero(L);
  out.trace_P = Eigen::VectorXd::Zero(L);
  out.v_hat = Eigen::VectorXd::Zero(L);
  out.w_bar_hat = Eigen::MatrixXd::Zero(n, L);
  out.P_pred_final = Eigen::MatrixXd::Zero(n, n);
  if (theta_true) out.delta_trace = Eigen::VectorXd::Zero(L);

  // x(0) = 0 is known exactly, so the first sample only feeds the regression.
  std::variant<FilterState, AugFilterState> filter;
  if (options.algorithm == Algorithm::kAugKf) {
    AugFilterState aug = AugFilterState::zero(noise.Q);
    aug.u_prev = dataset.u(0);
    aug.y_prev = dataset.y(0);
    filter = aug;
  } else {
    FilterState kf = FilterState::zero(n);
    kf.u_prev = dataset.u(0);
    kf.y_prev = dataset.y(0);
    filter = kf;
  }
  auto current_x = [&]() -> const Eigen::VectorXd& {
    return std::visit([](const auto& f) -> const Eigen::VectorXd& { return f.x_hat; }, filter);
  };

  for (Eigen::Index t = 0; t < L; ++t) {
    const double u_t = dataset.u(t);
    const double y_t = dataset.y(t);

    const Eigen::VectorXd phi = build_info_vector(state, u_t);
    const double gamma = compute_gamma(state, options.gamma_source);
    const double beta = compute_beta(state, T);
    state = rls_update(state, phi, y_t, gamma, beta);

    const Eigen::VectorXd& theta = state.rls.theta;
    if (!theta.allFinite() || theta.norm() > options.divergence_threshold) {
      throw DivergenceError("parameter estimate diverged (|theta| = " + std::to_string(theta.norm()) +
                                ") at t = " + std::to_string(t),
                            static_cast<std::size_t>(t));
    }

    const Eigen::VectorXd x_prev = current_x();
    if (t > 0) {
      const Eigen::MatrixXd F_hat = build_F(theta.head(n));
      const Eigen::VectorXd G_hat = theta.segment(n, n);
      const double d_hat = theta(2 * n);
      const double r_gain =
          options.use_vstar_variance ? noise.R * (1.0 + theta.tail(n_j).squaredNorm()) : noise.R;

      if (auto* kf = std::get_if<FilterState>(&filter)) {
        StepDiagnostics diag;
        const LinearFilterMatrices m{F_hat, G_hat, T, Q_filter, r_gain, d_hat};
        *kf = kalman_step(*kf, m, u_t, y_t, &diag);
        out.gains.col(t) = diag.gain;
        out.innovations(t) = diag.innovation;
        out.P_pred_final = diag.P_pred;
      } else {
        auto& aug = std::get<AugFilterState>(filter);
        double offset = 0.0;
        for (Eigen::Index i = 0; i < n_j; ++i) offset += theta(2 * n + 1 + i) * state.v_hist(i);
        AugDiagnostics diag;
        aug = augkf_step(aug, F_hat, G_hat, d_hat, noise.Q, r_gain, noise.S, u_t, y_t, offset, &diag);
        out.gains.col(t) = diag.k_x;
        out.innovations(t) = diag.base.innovation;
        out.P_pred_final = diag.base.P_pred;
      }
    }
    const Eigen::VectorXd& x_t = current_x();
    out.trace_P(t) = std::visit(
        [n](const auto& f) { return f.P.topLeftCorner(n, n).trace(); }, filter);

    const NoiseEstimates est = estimate_noises(state, T, x_t, x_prev, y_t, u_t);
    if (t > 0) out.w_bar_hat.col(t - 1) = est.w_bar;
    out.v_hat(t) = est.v;
    out.x_hat.col(t) = x_t;
    state = push_histories(state, x_t(0), u_t, y_t, est);

    const ParameterVector recovered = recover_parameters(state, T);
    out.theta_trace.col(t) = recovered;
    if (theta_true) (*out.delta_trace)(t) = delta_theta(recovered, *theta_true);
  }

  out.theta_bar_final = state.rls.theta;
  out.theta_final = out.theta_trace.col(L - 1);
  if (truth) {
    out.rmse_x1 = rmse_state(out.x_hat.row(0).transpose(), dataset.x.row(0).transpose());
  }
  return out;
}

}  // namespace corrkal
