#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <optional>
#include <string_view>

#include "corrkal/filters.hpp"
#include "corrkal/model.hpp"
#include "corrkal/simulate.hpp"

namespace corrkal {

/// State estimator driving the joint identification loop.
enum class Algorithm {
  kKfCnRgels,  ///< decorrelated filter, T = S/R
  kSkf,        ///< standard filter, correlation ignored
  kAugKf,      ///< augmented-state filter, correlation through the appended noise
};

std::string_view to_string(Algorithm algorithm) noexcept;
Algorithm parse_algorithm(std::string_view text);

/// Which reconstructed process noise feeds γ̂.
enum class GammaSource {
  kDecorrelated,  ///< w̄̂ = ŵ - T v̂*
  kRaw,           ///< ŵ as reconstructed, before removing T v̂*
};

struct RlsEstimate {
  Eigen::VectorXd theta;
  Eigen::MatrixXd P;
  /// Square-root factor, P = factor * factor'. Empty means "take the Cholesky factor of P".
  Eigen::MatrixXd factor;
};

/**
 * One recursive least-squares step on target = φ'θ + e. The covariance is
 * propagated in Potter's square-root form, which keeps a p0 = 1e12 start
 * from losing the small eigenvalues to cancellation. Throws NumericalError
 * if P is not positive definite or 1 + φ'Pφ < 1.
 */
RlsEstimate rls_step(const RlsEstimate& prev, const Eigen::VectorXd& phi, double target);

/**
 * Estimates and lag buffers of the identification loop. All buffers are
 * indexed by lag: entry 0 holds the value at t-1. Entries before the start of
 * the data are zero.
 */
struct RgelsState {
  RlsEstimate rls;              ///< estimate of θ̄ = [f̄, ḡ, d, J]
  Eigen::VectorXd x1_hist;      ///< x̂_1(t-1) .. x̂_1(t-n)
  Eigen::VectorXd u_hist;       ///< u(t-1) .. u(t-n)
  Eigen::VectorXd y_hist;       ///< y(t-1) .. y(t-n)
  Eigen::VectorXd v_hist;       ///< v̂(t-1) .. v̂(t-nJ)
  Eigen::VectorXd vstar_hist;   ///< v̂*(t-1) .. v̂*(t-nJ)
  Eigen::MatrixXd wbar_hist;    ///< column k: w̄̂(t-1-k)
  Eigen::MatrixXd wraw_hist;    ///< column k: ŵ(t-1-k)
  std::size_t t = 0;

  static RgelsState initial(Eigen::Index n, Eigen::Index n_j, double p0, const Eigen::VectorXd& theta0);

  Eigen::Index order() const noexcept { return x1_hist.size(); }
  Eigen::Index noise_order() const noexcept { return v_hist.size(); }
};

/// φ̂(t) = [-x̂_1(t-1..t-n), u(t-1..t-n), u(t), v̂(t-1..t-nJ)].
Eigen::VectorXd build_info_vector(const RgelsState& state, double u_t);

/// γ̂(t) = Σ_i w̄̂_i(t-i): component i of the reconstruction at lag i.
double compute_gamma(const RgelsState& state, GammaSource source = GammaSource::kDecorrelated);

/// β(t) = Σ_i T_i y(t-i).
double compute_beta(const RgelsState& state, const Eigen::VectorXd& T);

/// θ̂ update with residual y - γ̂ - β - φ̂'θ̂.
RgelsState rls_update(const RgelsState& state, const Eigen::VectorXd& phi, double y_t, double gamma_t,
                      double beta_t);

struct NoiseEstimates {
  double v_star = 0.0;     ///< v̂*(t)
  double v = 0.0;          ///< v̂(t)
  Eigen::VectorXd w_hat;   ///< ŵ(t-1)
  Eigen::VectorXd w_bar;   ///< w̄̂(t-1) = ŵ(t-1) - T v̂*(t-1)
};

/**
 * Noise reconstruction after the filter has produced x̂(t). ŵ is one step
 * behind because it needs the corrected state at the following time.
 * v̂*(t-1) inside w̄̂ is re-evaluated with the current d̂.
 */
NoiseEstimates estimate_noises(const RgelsState& state, const Eigen::VectorXd& T, const Eigen::VectorXd& x_hat_t,
                               const Eigen::VectorXd& x_hat_prev, double y_t, double u_t);

/// Shifts the lag buffers after step t.
RgelsState push_histories(const RgelsState& state, double x1_t, double u_t, double y_t, const NoiseEstimates& noise);

/// θ_estimated = [f̄̂ - T, ḡ̂ + T d̂, d̂, Ĵ].
ParameterVector recover_parameters(const RgelsState& state, const Eigen::VectorXd& T);

struct AssumedNoise {
  Eigen::MatrixXd Q;
  double R = 1.0;
  Eigen::VectorXd S;
};

struct RgelsOptions {
  Algorithm algorithm = Algorithm::kKfCnRgels;
  double p0 = 1e6;
  double theta0 = 1e-6;                        ///< θ̂(0) = theta0 * 1
  std::optional<Eigen::VectorXd> theta_init;   ///< overrides theta0
  std::optional<Eigen::Index> noise_order;     ///< n_J; defaults to the dataset's true model
  GammaSource gamma_source = GammaSource::kDecorrelated;
  bool use_vstar_variance = false;             ///< filter uses R (1 + ‖Ĵ‖²) instead of R
  double divergence_threshold = 1e6;
};

struct JointRunResult {
  Algorithm algorithm = Algorithm::kKfCnRgels;
  Eigen::VectorXd T;
  Eigen::MatrixXd theta_trace;                 ///< n_s x L, original-system estimates
  std::optional<Eigen::VectorXd> delta_trace;  ///< only when the dataset carries the true model
  Eigen::MatrixXd x_hat;                       ///< n x L
  Eigen::MatrixXd gains;                       ///< n x L
  Eigen::VectorXd innovations;
  Eigen::VectorXd trace_P;
  Eigen::VectorXd v_hat;
  Eigen::MatrixXd w_bar_hat;                   ///< n x L, column t is w̄̂(t); the last column stays zero
  ParameterVector theta_final;
  ParameterVector theta_bar_final;
  Eigen::MatrixXd P_pred_final;
  std::optional<double> rmse_x1;
};

/// Joint parameter and state estimation over the whole dataset. Throws DivergenceError past the guard.
JointRunResult run_joint(const Dataset& dataset, const AssumedNoise& noise, const RgelsOptions& options = {});

}  // namespace corrkal
