#pragma once

#include <Eigen/Dense>

namespace corrkal {

/**
 * Single-input single-output system in observer canonical form
 *
 *   x(t+1) = F x(t) + G u(t) + w(t)
 *   y(t)   = H x(t) + d u(t) + J(q) v(t),   J(q) = 1 + J_1 q^-1 + ... + J_nJ q^-nJ
 *
 * F is the companion matrix whose first column is -f and whose superdiagonal
 * is one. H = [1, 0, ..., 0] is implied by the form and never stored.
 */
struct ObserverCanonicalModel {
  Eigen::VectorXd f;  ///< first-column coefficients, F(i,0) = -f(i)
  Eigen::VectorXd g;  ///< input gains
  double d = 0.0;     ///< direct feedthrough
  Eigen::VectorXd j;  ///< MA coefficients of the measurement noise

  Eigen::Index order() const noexcept { return f.size(); }
  Eigen::Index noise_order() const noexcept { return j.size(); }
  Eigen::Index parameter_count() const noexcept { return 2 * order() + 1 + noise_order(); }

  /// Throws DimensionError unless n >= 1 and g has length n.
  void validate() const;
};

/// Parameter vector ordered [f_1..f_n, g_1..g_n, d, J_1..J_nJ].
using ParameterVector = Eigen::VectorXd;

ParameterVector model_to_theta(const ObserverCanonicalModel& model);
ObserverCanonicalModel theta_to_model(const ParameterVector& theta, Eigen::Index n, Eigen::Index n_j);

Eigen::MatrixXd build_F(const Eigen::VectorXd& f);

/// Row vector [1, 0, ..., 0] of length n.
Eigen::RowVectorXd build_H(Eigen::Index n);

struct StructuralReport {
  bool stable = false;
  bool observable = false;
  bool controllable = false;
  double spectral_radius = 0.0;
  Eigen::VectorXcd eigenvalues;
};

/// Advisory only; simulation proceeds on unstable models.
StructuralReport structural_checks(const ObserverCanonicalModel& model);

/// Matrices of the decorrelated system: F̄ = F - T H, Ḡ = G - T d.
struct DecorrelatedMatrices {
  Eigen::MatrixXd F_bar;
  Eigen::VectorXd G_bar;
};

DecorrelatedMatrices decorrelate_matrices(const ObserverCanonicalModel& model, const Eigen::VectorXd& T);

/// θ̄ = [f + T, g - T d, d, J]: the parameters the identification loop estimates.
ParameterVector decorrelate_theta(const ParameterVector& theta, Eigen::Index n, const Eigen::VectorXd& T);

/// Inverse of decorrelate_theta: f = f̄ - T, g = ḡ + T d.
ParameterVector recover_theta(const ParameterVector& theta_bar, Eigen::Index n, const Eigen::VectorXd& T);

}  // namespace corrkal
