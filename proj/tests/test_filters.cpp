#include <doctest.h>

#include <Eigen/Dense>

#include "corrkal/errors.hpp"
#include "corrkal/filters.hpp"
#include "corrkal/noise.hpp"
#include "corrkal/simulate.hpp"

using namespace corrkal;

namespace {

ObserverCanonicalModel example1() {
  return {Eigen::Vector2d(-0.05, -0.35), Eigen::Vector2d(2.0, 3.0), 1.3, Eigen::Vector2d(0.0505, 0.0139)};
}

ObserverCanonicalModel scalar_zero() {
  return {Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1), 0.0, Eigen::VectorXd()};
}

}  // namespace

TEST_SUITE("filters") {
  TEST_CASE("decorrelation gain") {
    NoiseSpec ex1{Eigen::Vector2d(0.0049, 0.0001), 0.64, 0.5, UMode::kEquicorrelated};
    const auto U = build_joint_covariance(ex1);
    const Eigen::Matrix2d Q_diag = ex1.q_diag.asDiagonal();
    const auto cfg = cnkf_init(example1(), Q_diag, U.R(), U.S());
    CHECK(cfg.T.isApprox(Eigen::Vector2d(0.04375, 0.00625), 1e-14));
    Eigen::Matrix2d Q_bar;
    Q_bar << 0.003675, -0.000175, -0.000175, 0.000075;
    CHECK((cfg.Q_bar - Q_bar).cwiseAbs().maxCoeff() < 1e-15);
    CHECK_FALSE(cfg.q_bar_indefinite);

    const auto ex2 = cnkf_init(example1(), Eigen::Matrix2d::Identity(), 1.6, Eigen::Vector2d(0.9308, 0.76));
    CHECK(std::abs(ex2.T(0) - 0.58175) < 1e-12);
    CHECK(std::abs(ex2.T(1) - 0.475) < 1e-12);

    const auto none = cnkf_init(example1(), U.Q(), U.R(), Eigen::Vector2d::Zero());
    CHECK(none.T.isZero());
    CHECK(none.F_bar == build_F(example1().f));
    CHECK(none.G_bar == example1().g);
    CHECK(none.Q_bar == U.Q());

    CHECK_THROWS_AS(cnkf_init(example1(), U.Q(), 0.0, U.S()), ConfigError);
    CHECK_THROWS_AS(cnkf_init(example1(), U.Q(), 1.0, Eigen::Vector3d::Zero()), DimensionError);
  }

  TEST_CASE("scalar hand step") {
    const Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(1, 1);
    const auto state = FilterState::zero(1);

    StepDiagnostics diag;
    const auto s = skf_step(state, scalar_zero(), Q, 1.0, 0.0, 1.0, &diag);
    CHECK(diag.P_pred(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(diag.gain(0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(s.x_hat(0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(s.P(0, 0) == doctest::Approx(0.5).epsilon(1e-12));

    const auto cfg = cnkf_init(scalar_zero(), Q, 1.0, Eigen::VectorXd::Zero(1));
    const auto c = cnkf_step(state, cfg, 0.0, 1.0);
    CHECK(std::abs(c.x_hat(0) - 0.5) < 1e-12);
    CHECK(std::abs(c.P(0, 0) - 0.5) < 1e-12);

    const auto a = augkf_step(AugFilterState::zero(Q), scalar_zero(), Q, 1.0, Eigen::VectorXd::Zero(1), 0.0, 1.0);
    CHECK(std::abs(a.x_hat(0) - 0.5) < 1e-12);
    CHECK(std::abs(a.P_c()(0, 0) - 0.5) < 1e-12);
  }

  TEST_CASE("no uncertainty means pure prediction") {
    const LinearFilterMatrices m{build_F(example1().f), example1().g, Eigen::Vector2d::Zero(),
                                 Eigen::Matrix2d::Zero(), 1.0, 1.3};
    FilterState s = FilterState::zero(2);
    s.x_hat << 1.0, -2.0;
    s.u_prev = 0.5;
    StepDiagnostics diag;
    const auto next = kalman_step(s, m, 0.0, 10.0, &diag);
    CHECK(diag.gain.isZero());
    CHECK(next.x_hat.isApprox(m.F * s.x_hat + m.G * 0.5));
  }

  TEST_CASE("zero input fixed point") {
    const LinearFilterMatrices m{build_F(example1().f), example1().g, Eigen::Vector2d::Zero(),
                                 Eigen::Matrix2d::Identity(), 1.0, 1.3};
    FilterState s = FilterState::zero(2);
    s.x_hat << 3.0, -1.0;
    for (int t = 0; t < 200; ++t) s = kalman_step(s, m, 0.0, 0.0);
    CHECK(s.x_hat.norm() < 1e-10);
  }

  TEST_CASE("cnkf with S = 0 is bit identical to skf") {
    NoiseSpec spec{Eigen::Vector2d(0.0049, 0.0001), 0.64, 0.0, UMode::kEquicorrelated};
    const auto U = build_joint_covariance(spec);
    const Eigen::VectorXd u = prbs_input(300, -0.8, 1.0, 1);
    const auto ds = simulate(example1(), spec, u, 2);
    const auto cfg = cnkf_init(example1(), U.Q(), U.R(), U.S());
    FilterState a = FilterState::zero(2);
    FilterState b = FilterState::zero(2);
    for (int t = 0; t < 300; ++t) {
      a = cnkf_step(a, cfg, u(t), ds.y(t));
      b = skf_step(b, example1(), U.Q(), U.R(), u(t), ds.y(t));
      REQUIRE(a.x_hat == b.x_hat);
      REQUIRE(a.P == b.P);
    }
  }

  TEST_CASE("augmented filter with S = 0 matches skf") {
    NoiseSpec spec{Eigen::Vector2d(0.6, 0.4), 1.6, 0.0, UMode::kEquicorrelated};
    const auto U = build_joint_covariance(spec);
    const Eigen::VectorXd u = prbs_input(100, -0.8, 1.0, 3);
    const auto ds = simulate(example1(), spec, u, 3);
    FilterState s = FilterState::zero(2);
    AugFilterState a = AugFilterState::zero(U.Q());
    for (int t = 0; t < 100; ++t) {
      s = skf_step(s, example1(), U.Q(), U.R(), u(t), ds.y(t));
      a = augkf_step(a, example1(), U.Q(), U.R(), U.S(), u(t), ds.y(t));
      REQUIRE((a.x_hat - s.x_hat).norm() < 1e-8);
    }
  }

  TEST_CASE("augmented and decorrelated filters agree under correlation") {
    NoiseSpec spec{Eigen::Vector2d(0.6, 0.4), 1.6, 0.5, UMode::kEquicorrelated};
    const auto U = build_joint_covariance(spec);
    const Eigen::VectorXd u = prbs_input(200, -0.8, 1.0, 3);
    auto m = example1();
    m.j.resize(0);
    const auto ds = simulate(m, spec, u, 8);
    const auto cfg = cnkf_init(m, U.Q(), U.R(), U.S());
    FilterState c = FilterState::zero(2);
    AugFilterState a = AugFilterState::zero(U.Q());
    for (int t = 0; t < 200; ++t) {
      c = cnkf_step(c, cfg, u(t), ds.y(t));
      a = augkf_step(a, m, U.Q(), U.R(), U.S(), u(t), ds.y(t));
      // The zero priors differ (Q against Q̄ for the first prediction); the filters coincide after that washes out.
      if (t >= 40) REQUIRE((a.x_hat - c.x_hat).norm() < 1e-12);
    }
  }

  TEST_CASE("riccati converges for a stable model") {
    const LinearFilterMatrices m{build_F(example1().f), example1().g, Eigen::Vector2d::Zero(),
                                 0.01 * Eigen::Matrix2d::Identity(), 0.64, 1.3};
    const Eigen::MatrixXd P = steady_state_prediction_covariance(m);
    FilterState s = FilterState::zero(2);
    StepDiagnostics prev, diag;
    for (int t = 0; t < 500; ++t) {
      prev = diag;
      s = kalman_step(s, m, 0.0, 0.0, &diag);
    }
    CHECK((diag.P_pred - prev.P_pred).norm() < 1e-10);
    CHECK((diag.P_pred - P).norm() < 1e-10);
  }

  TEST_CASE("non-positive innovation variance is reported") {
    const LinearFilterMatrices m{build_F(example1().f), example1().g, Eigen::Vector2d::Zero(),
                                 Eigen::Matrix2d::Zero(), 0.0, 1.3};
    CHECK_THROWS_AS(kalman_step(FilterState::zero(2), m, 0.0, 1.0), NumericalError);
  }
}
