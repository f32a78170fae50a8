#include <gtest/gtest.h>

#include <ilopn/circuits.hpp>

#include <random>

using namespace ilopn;

namespace {

double max_rel_jac_error(const StateSpaceModel& m, const Eigen::VectorXd& x) {
  const Eigen::MatrixXd J = m.jacobian(x), Jfd = finite_difference_jacobian(m, x);
  const double scale = m.eval_vector_field(x).norm() + 1;
  return (J - Jfd).cwiseAbs().maxCoeff() / scale;
}

Eigen::VectorXd random_state(std::mt19937_64& rng, const Eigen::VectorXd& centre, const Eigen::VectorXd& spread) {
  std::uniform_real_distribution<double> u(-1, 1);
  Eigen::VectorXd x = centre;
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] += spread[i] * u(rng);
  return x;
}

}  // namespace

TEST(CircuitCore, Osc1EquilibriumAtOrigin) {
  const auto m = make_osc1();
  EXPECT_EQ(m.eval_vector_field(Eigen::Vector2d::Zero()).norm(), 0.0);
}

TEST(CircuitCore, Osc1IsOdd) {
  const auto m = make_osc1();
  std::mt19937_64 rng(3);
  for (int k = 0; k < 100; ++k) {
    const Eigen::VectorXd x = random_state(rng, Eigen::Vector2d::Zero(), Eigen::Vector2d(1.0, 5e-3));
    EXPECT_LT((m.eval_vector_field(-x) + m.eval_vector_field(x)).norm(), 1e-12 * m.eval_vector_field(x).norm());
  }
}

TEST(CircuitCore, JacobianMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  const auto o1 = make_osc1();
  const auto o2 = make_osc2();
  const auto ilo = make_reference_ilo().model();
  for (int k = 0; k < 100; ++k) {
    EXPECT_LT(max_rel_jac_error(o1, random_state(rng, Eigen::Vector2d::Zero(), Eigen::Vector2d(1.0, 5e-3))), 1e-5);
    const Eigen::VectorXd x2 =
        random_state(rng, o2.start_state(), Eigen::Vector3d(1.5, 5e-3, 0.3));
    EXPECT_LT(max_rel_jac_error(o2, x2), 1e-5);
    Eigen::VectorXd xi(5), si(5);
    xi << 0, 0, o2.start_state();
    si << 1.0, 5e-3, 1.5, 5e-3, 0.3;
    EXPECT_LT(max_rel_jac_error(ilo, random_state(rng, xi, si)), 1e-5);
  }
}

TEST(CircuitCore, DrainCurrentDerivatives) {
  const double k = 5e-3, vth = 0.5, lam = 0.05, h = 1e-7;
  for (double vgs : {0.3, 0.7, 1.2})
    for (double vds : {-0.8, -0.1, 0.05, 0.4, 1.1}) {
      const auto d = detail::drain_current(vgs, vds, k, vth, lam);
      const double gm = (detail::drain_current(vgs + h, vds, k, vth, lam).i -
                         detail::drain_current(vgs - h, vds, k, vth, lam).i) / (2 * h);
      const double gds = (detail::drain_current(vgs, vds + h, k, vth, lam).i -
                          detail::drain_current(vgs, vds - h, k, vth, lam).i) / (2 * h);
      EXPECT_NEAR(d.gm, gm, 1e-6);
      EXPECT_NEAR(d.gds, gds, 1e-6);
    }
}

TEST(CircuitCore, ReferenceNoiseIsConstant) {
  const auto m = make_reference_ilo().model();
  EXPECT_TRUE(m.constant_noise());
  const Eigen::MatrixXd B0 = m.noise_matrix(Eigen::VectorXd::Zero(5));
  Eigen::VectorXd x(5);
  x << 0.3, 1e-3, -0.4, 2e-3, 0.2;
  EXPECT_EQ((m.noise_matrix(x) - B0).norm(), 0.0);
  EXPECT_DOUBLE_EQ(B0(0, 0), Osc1Params{}.w_rms / Osc1Params{}.C);
  EXPECT_DOUBLE_EQ(B0(4, 1), Osc2Params{}.n_rms / Osc2Params{}.C_cg);
}

TEST(CircuitCore, AssemblyDimensionsAndLabels) {
  const IloAssembly a = make_reference_ilo();
  const auto m = a.model();
  EXPECT_EQ(m.dim(), a.p_osc.dim() + a.s_osc.dim());
  EXPECT_EQ(m.noise_count(), a.p_osc.noise_count() + a.s_osc.noise_count());
  EXPECT_EQ(m.state_labels()[a.observation_node], "osc2.vd");
  EXPECT_EQ(m.state_index("osc2.vcg"), 4u);
  EXPECT_THROW(m.state_index("osc3.v"), IndexError);
}

TEST(CircuitCore, UnilateralCoupling) {
  const IloAssembly a = make_reference_ilo();
  const auto m = a.model();
  std::mt19937_64 rng(5);
  Eigen::VectorXd c(5), s(5);
  c << 0, 0, a.s_osc.start_state();
  s << 1.0, 5e-3, 1.5, 5e-3, 0.3;
  for (int k = 0; k < 100; ++k) {
    const Eigen::VectorXd x = random_state(rng, c, s);
    EXPECT_EQ(m.jacobian(x).topRightCorner(2, 3).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_LT(finite_difference_jacobian(m, x).topRightCorner(2, 3).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(CircuitCore, ZeroCouplingStacksUnits) {
  IloAssembly a = make_reference_ilo(0.0);
  const auto m = a.model();
  Eigen::VectorXd x(5);
  x << 0.2, 1e-3, -0.3, 4e-4, 0.25;
  const Eigen::VectorXd f = m.eval_vector_field(x);
  EXPECT_EQ((f.head(2) - a.p_osc.eval_vector_field(x.head(2))).norm(), 0.0);
  EXPECT_EQ((f.tail(3) - a.s_osc.eval_vector_field(x.tail(3))).norm(), 0.0);
  const Eigen::MatrixXd J = m.jacobian(x);
  EXPECT_EQ(J.topRightCorner(2, 3).norm(), 0.0);
  EXPECT_EQ(J.bottomLeftCorner(3, 2).norm(), 0.0);
}

TEST(CircuitCore, InjectionGainIsGOverNodeCapacitance) {
  const auto m = make_reference_ilo(35e-6).model();
  Eigen::VectorXd x(5);
  x << 0.1, 0, 0.2, 0, 0.3;
  EXPECT_NEAR(m.jacobian(x)(2, 0), 35e-6 / Osc2Params{}.C, 1e-9);
}

TEST(CircuitCore, InjectedCurrentIsLinearInGc1) {
  Eigen::VectorXd x(5);
  x << 0.37, 1e-3, -0.2, 5e-4, 0.3;
  const auto f0 = make_reference_ilo(0.0).model().eval_vector_field(x);
  const auto f1 = make_reference_ilo(35e-6).model().eval_vector_field(x);
  const auto f2 = make_reference_ilo(70e-6).model().eval_vector_field(x);
  EXPECT_NEAR((f2[2] - f0[2]) / (f1[2] - f0[2]), 2.0, 1e-12);
}

TEST(CircuitCore, CubicBufferPolynomial) {
  BufferCoupling c;
  c.g = {1e-6, 2e-5, -3e-5, 4e-5};
  for (double v : {-0.7, 0.0, 0.3, 1.1}) {
    EXPECT_DOUBLE_EQ(c.current(v), 1e-6 + 2e-5 * v - 3e-5 * v * v + 4e-5 * v * v * v);
    EXPECT_NEAR(c.transconductance(v), 2e-5 - 6e-5 * v + 12e-5 * v * v, 1e-18);
  }
  IloAssembly a = make_reference_ilo(0.0);
  a.coupling.g = c.g;
  const auto m = a.model();
  Eigen::VectorXd x(5);
  x << 0.4, 0, 0.1, 0, 0.3;
  EXPECT_NEAR(m.jacobian(x)(2, 0), c.transconductance(0.4) / Osc2Params{}.C, 1e-6);
  EXPECT_LT(max_rel_jac_error(m, x), 1e-5);
}

TEST(CircuitCore, DerivedInductance) {
  EXPECT_NEAR(Osc1Params{}.inductance(), 102.8e-9, 0.1e-9);
  Osc1Params p;
  p.L = 50e-9;
  EXPECT_EQ(p.inductance(), 50e-9);
}

TEST(CircuitCore, RejectsNonPositiveComponents) {
  Osc1Params p1;
  p1.C = 0;
  EXPECT_THROW(make_osc1(p1), ConfigError);
  p1 = {};
  p1.f0 = -1;
  EXPECT_THROW(make_osc1(p1), ConfigError);
  Osc2Params p2;
  p2.L = -1e-9;
  EXPECT_THROW(make_osc2(p2), ConfigError);
}

TEST(CircuitCore, AssemblyIndexErrors) {
  const auto p = make_osc1();
  const auto s = make_osc2();
  BufferCoupling c;
  c.input_node = 7;
  EXPECT_THROW(assemble_ilo(p, s, c, 2), IndexError);
  c.input_node = 0;
  c.output_node = 1;  // inductor current: not a capacitive node
  EXPECT_THROW(assemble_ilo(p, s, c, 2), IndexError);
  c.output_node = 0;
  EXPECT_THROW(assemble_ilo(p, s, c, 9), IndexError);
}

TEST(CircuitCore, NonFiniteStateNamesEquation) {
  const auto m = make_osc2();
  Eigen::Vector3d x(0.1, 0, std::nan(""));
  try {
    m.eval_vector_field(x);
    FAIL() << "expected NonFiniteState";
  } catch (const NonFiniteState& e) {
    EXPECT_EQ(e.index(), 2u);
    EXPECT_NE(std::string(e.what()).find("osc2.vcg"), std::string::npos);
  }
  const auto o1 = make_osc1();
  EXPECT_THROW(o1.eval_vector_field(Eigen::Vector2d(1e110, 0)), NonFiniteState);
  EXPECT_THROW(o1.eval_vector_field(Eigen::Vector3d::Zero()), IndexError);
}

TEST(CircuitCore, NoiseScalingCopiesOnWrite) {
  const auto m = make_osc1();
  const auto m2 = m.with_noise_scaled(2.0);
  const Eigen::Vector2d x(0.1, 0);
  EXPECT_DOUBLE_EQ(m2.noise_matrix(x)(0, 0), 2 * m.noise_matrix(x)(0, 0));
  auto m3 = m;
  m3.set_period_hint(1.0);
  EXPECT_NE(m.period_hint(), 1.0);
}

TEST(CircuitCore, Osc2BiasSinksTailCurrent) {
  const Osc2Params p;
  const auto m = make_osc2(p);
  const Eigen::Vector3d x(0, 0, osc2_bias_vcg(p));
  EXPECT_LT(std::abs(m.eval_vector_field(x)[2]) * p.C_cg, 1e-12 * p.I_tail);
}
