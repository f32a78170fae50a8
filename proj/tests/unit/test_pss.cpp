#include <gtest/gtest.h>

#include <ilopn/circuits.hpp>
#include <ilopn/fourier.hpp>
#include <ilopn/pss.hpp>

#include "../support/fixtures.hpp"

using namespace ilopn;
using ilopn::testing::ilo_fixture;
using ilopn::testing::osc1_fixture;
using ilopn::testing::osc2_fixture;

namespace {

StateSpaceModel linear_tank(double w) {
  auto f = [w](std::span<const double> x, std::span<double> dx) {
    dx[0] = x[1];
    dx[1] = -w * w * x[0];
  };
  auto jac = [w](std::span<const double>, Eigen::Ref<Eigen::MatrixXd> J) {
    J << 0, 1, -w * w, 0;
  };
  auto noise = [](std::span<const double>, Eigen::Ref<Eigen::MatrixXd> B) { B.setZero(); };
  return StateSpaceModel({"x1", "x2"}, {"w"}, f, jac, noise);
}

}  // namespace

TEST(Pss, LinearOscillatorWithAmplitudeAnchor) {
  const double w = 2 * std::numbers::pi * 1e9;
  ShootingOptions o;
  o.amplitude_anchor = 1;
  const auto p = find_limit_cycle(linear_tank(w), 1.03e-9, Eigen::Vector2d(0.0, w), o);
  EXPECT_NEAR(p.T0 * w / (2 * std::numbers::pi), 1.0, 1e-10);
}

TEST(Pss, NeutralAmplitudeIsNotALock) {
  const double w = 2 * std::numbers::pi * 1e9;
  EXPECT_THROW(find_limit_cycle(linear_tank(w), 1.03e-9, Eigen::Vector2d(0.0, w)), LockNotDetected);
}

TEST(Pss, ReferencePeriods) {
  EXPECT_NEAR(osc1_fixture().pss.T0, 1.11e-9, 0.005e-9);
  EXPECT_NEAR(1 / osc1_fixture().pss.T0, 900.9e6, 0.002 * 900.9e6);
  EXPECT_NEAR(osc2_fixture().pss.T0, 1.12e-9, 0.005e-9);
  EXPECT_NEAR(1 / osc2_fixture().pss.T0, 892.86e6, 0.001 * 892.86e6);
}

TEST(Pss, LockedPeriodEqualsPrimary) {
  EXPECT_NEAR(ilo_fixture().pss.T0 / osc1_fixture().pss.T0, 1.0, 1e-9);
}

TEST(Pss, Closure) {
  for (const auto* a : {&osc1_fixture(), &osc2_fixture(), &ilo_fixture()}) {
    const auto& p = a->pss;
    EXPECT_EQ((p.samples.row(0) - p.samples.row(p.n_samples())).norm(), 0.0);
    const Eigen::VectorXd xT = rk4_integrate(a->model, p.x0, p.T0, long(p.n_samples()) * p.substeps);
    const Eigen::VectorXd s = p.amplitude();
    EXPECT_LT(((xT - p.x0).array() / s.array()).abs().maxCoeff(), 1e-9);
    EXPECT_LT(p.residual, 1e-10);
  }
}

TEST(Pss, DoublingSamplesKeepsPeriod) {
  ShootingOptions o;
  o.samples = 2048;
  for (const auto* a : {&osc1_fixture(), &osc2_fixture(), &ilo_fixture()}) {
    const auto p2 = solve_pss(a->model, o);
    EXPECT_LT(std::abs(p2.T0 / a->pss.T0 - 1), 1e-8);
  }
}

TEST(Pss, Osc1TankVoltageNearSinusoidal) {
  const auto X = fourier_harmonics(osc1_fixture().pss, 32);
  double harm = 0;
  for (int nu = 2; nu <= 32; ++nu) harm += std::norm(X.at(nu, 0));
  EXPECT_LT(std::sqrt(harm / std::norm(X.at(1, 0))), 0.02);
}

TEST(Pss, IterationLimitReportsNoConvergence) {
  const auto& a = osc1_fixture();
  ShootingOptions o;
  o.max_iterations = 1;
  Eigen::VectorXd x = a.pss.x0;
  x[1] *= 1.3;
  try {
    find_limit_cycle(a.model, a.pss.T0 * 1.05, x, o);
    FAIL() << "expected NoConvergence";
  } catch (const NoConvergence& e) {
    EXPECT_EQ(e.iterations(), 1);
    EXPECT_GT(e.residual(), o.tol);
  }
}

TEST(Pss, DeadOscillatorIsNotLocked) {
  Osc1Params p;
  p.G = 5e-3;  // loss beats the negative conductance
  EXPECT_THROW(solve_pss(make_osc1(p)), LockNotDetected);
}

TEST(Pss, OptionValidation) {
  const auto m = make_osc1();
  ShootingOptions o;
  o.anchor = 5;
  EXPECT_THROW(find_limit_cycle(m, 1e-9, Eigen::Vector2d(0.1, 0), o), IndexError);
  EXPECT_THROW(find_limit_cycle(m, -1e-9, Eigen::Vector2d(0.1, 0)), ConfigError);
  EXPECT_THROW(find_limit_cycle(m, 1e-9, Eigen::Vector3d(0.1, 0, 0)), IndexError);
}
