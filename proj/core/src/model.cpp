#include "corrkal/model.hpp"

#include <Eigen/Eigenvalues>
#include <string>

#include "corrkal/errors.hpp"

namespace corrkal {

namespace {

Eigen::Index matrix_rank(const Eigen::MatrixXd& m) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
  lu.setThreshold(1e-10);
  return lu.rank();
}

}  // namespace

void ObserverCanonicalModel::validate() const {
  if (f.size() < 1) {
    throw DimensionError("model order n must be >= 1");
  }
  if (g.size() != f.size()) {
    throw DimensionError("g has length " + std::to_string(g.size()) + ", expected n = " +
                         std::to_string(f.size()));
  }
}

ParameterVector model_to_theta(const ObserverCanonicalModel& model) {
  model.validate();
  const Eigen::Index n = model.order();
  ParameterVector theta(model.parameter_count());
  theta.head(n) = model.f;
  theta.segment(n, n) = model.g;
  theta(2 * n) = model.d;
  theta.tail(model.noise_order()) = model.j;
  return theta;
}

ObserverCanonicalModel theta_to_model(const ParameterVector& theta, Eigen::Index n, Eigen::Index n_j) {
  if (n < 1 || n_j < 0) {
    throw DimensionError("invalid orders n = " + std::to_string(n) + ", n_J = " + std::to_string(n_j));
  }
  if (theta.size() != 2 * n + 1 + n_j) {
    throw DimensionError("theta has length " + std::to_string(theta.size()) + ", expected 2n+1+n_J = " +
                         std::to_string(2 * n + 1 + n_j));
  }
  ObserverCanonicalModel model;
  model.f = theta.head(n);
  model.g = theta.segment(n, n);
  model.d = theta(2 * n);
  model.j = theta.tail(n_j);
  return model;
}

Eigen::MatrixXd build_F(const Eigen::VectorXd& f) {
  const Eigen::Index n = f.size();
  if (n < 1) {
    throw DimensionError("build_F: empty coefficient vector");
  }
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(n, n);
  F.col(0) = -f;
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    F(i, i + 1) = 1.0;
  }
  return F;
}

Eigen::RowVectorXd build_H(Eigen::Index n) {
  Eigen::RowVectorXd H = Eigen::RowVectorXd::Zero(n);
  H(0) = 1.0;
  return H;
}

StructuralReport structural_checks(const ObserverCanonicalModel& model) {
  model.validate();
  const Eigen::Index n = model.order();
  const Eigen::MatrixXd F = build_F(model.f);
  const Eigen::RowVectorXd H = build_H(n);

  StructuralReport report;
  report.eigenvalues = Eigen::EigenSolver<Eigen::MatrixXd>(F, false).eigenvalues();
  report.spectral_radius = report.eigenvalues.cwiseAbs().maxCoeff();
  report.stable = report.spectral_radius < 1.0;

  Eigen::MatrixXd obs(n, n);
  Eigen::MatrixXd ctrb(n, n);
  Eigen::RowVectorXd h_row = H;
  Eigen::VectorXd g_col = model.g;
  for (Eigen::Index k = 0; k < n; ++k) {
    obs.row(k) = h_row;
    ctrb.col(k) = g_col;
    h_row = h_row * F;
    g_col = F * g_col;
  }
  report.observable = matrix_rank(obs) == n;
  report.controllable = matrix_rank(ctrb) == n;
  return report;
}

DecorrelatedMatrices decorrelate_matrices(const ObserverCanonicalModel& model, const Eigen::VectorXd& T) {
  model.validate();
  if (T.size() != model.order()) {
    throw DimensionError("T has length " + std::to_string(T.size()) + ", expected n = " +
                         std::to_string(model.order()));
  }
  DecorrelatedMatrices out;
  // H = e_1, so T H only touches column 0.
  out.F_bar = build_F(model.f);
  out.F_bar.col(0) -= T;
  out.G_bar = model.g - T * model.d;
  return out;
}

ParameterVector decorrelate_theta(const ParameterVector& theta, Eigen::Index n, const Eigen::VectorXd& T) {
  if (T.size() != n || theta.size() < 2 * n + 1) {
    throw DimensionError("decorrelate_theta: dimension mismatch");
  }
  ParameterVector out = theta;
  out.head(n) += T;
  out.segment(n, n) -= T * theta(2 * n);
  return out;
}

ParameterVector recover_theta(const ParameterVector& theta_bar, Eigen::Index n, const Eigen::VectorXd& T) {
  if (T.size() != n || theta_bar.size() < 2 * n + 1) {
    throw DimensionError("recover_theta: dimension mismatch");
  }
  ParameterVector out = theta_bar;
  out.head(n) -= T;
  out.segment(n, n) += T * theta_bar(2 * n);
  return out;
}

}  // namespace corrkal
