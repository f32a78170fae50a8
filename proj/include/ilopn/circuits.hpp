#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include "error.hpp"
#include "state_space.hpp"

namespace ilopn {

// Parallel G-L-C tank with a cubic negative conductance i = a1 v + a3 v^3.
// States: osc1.v (V), osc1.iL (A).  Noise: osc1.w, current into the tank node.
struct Osc1Params {
  double C = 0.3035e-12;  // F
  double L = 0.0;         // H; 0 means derive from f0 and C
  double G = 0.8e-3;      // S
  double a1 = -1.0e-3;    // S
  double a3 = 100e-6;     // A/V^3
  double f0 = 900.9e6;    // Hz, only used to derive L
  double w_rms = 1e-12;   // A/sqrt(Hz)

  double inductance() const {
    if (L > 0) return L;
    if (!(f0 > 0) || !(C > 0)) throw ConfigError("osc1: f0 and C must be positive to derive L");
    const double w = 2 * std::numbers::pi * f0;
    return 1.0 / (w * w * C);
  }
};

// Square-law NMOS cross-coupled pair on a centre-tapped LC tank, ideal tail
// source into the common-source node.
// States: osc2.vd (V, differential tank voltage), osc2.iL (A), osc2.vcg (V).
// Noise: osc2.n, current into the common node.
struct Osc2Params {
  double C = 0.2e-12;       // F, differential tank capacitance
  double L = 166.64e-9;     // H
  double G = 1.41e-3;       // S, differential tank loss
  double W_over_L = 46.0;   // per device
  double I_tail = 0.5e-3;   // A
  double C_cg = 0.5e-12;    // F, common-node capacitance
  double VDD = 1.2;         // V, tank centre tap
  double Vth0 = 0.5;        // V
  double lambda = 0.05;     // 1/V
  double kp = 120e-6;       // A/V^2
  double n_rms = 70.7e-12;  // A/sqrt(Hz)
};

// Unilateral buffer: i_inj = sum_k g[k] v_in^k, added to the output node.
struct BufferCoupling {
  std::array<double, 4> g{0.0, 0.0, 0.0, 0.0};  // A, A/V, A/V^2, A/V^3
  std::size_t input_node = 0;   // P-OSC state index
  std::size_t output_node = 0;  // S-OSC state index

  double current(double v) const { return g[0] + v * (g[1] + v * (g[2] + v * g[3])); }
  double transconductance(double v) const { return g[1] + v * (2 * g[2] + v * 3 * g[3]); }
};

namespace detail {

struct DrainCurrent {
  double i, gm, gds;  // A, dI/dVgs, dI/dVds
};

// Level-1 drain current with source/drain swap for vds < 0.
inline DrainCurrent drain_current(double vgs, double vds, double k, double vth, double lam) {
  if (vds < 0) {
    const DrainCurrent r = drain_current(vgs - vds, -vds, k, vth, lam);
    return {-r.i, -r.gm, r.gm + r.gds};
  }
  const double vov = vgs - vth;
  if (vov <= 0) return {0.0, 0.0, 0.0};
  const double m = 1 + lam * vds;
  if (vds < vov) {
    const double base = k * (vov * vds - 0.5 * vds * vds);
    return {base * m, k * vds * m, k * (vov - vds) * m + base * lam};
  }
  const double base = 0.5 * k * vov * vov;
  return {base * m, k * vov * m, base * lam};
}

inline void require_positive(double v, const char* what) {
  if (!(v > 0) || !std::isfinite(v)) throw ConfigError(std::string(what) + " must be positive");
}

}  // namespace detail

inline StateSpaceModel make_osc1(const Osc1Params& p = {}) {
  detail::require_positive(p.C, "osc1.C");
  const double L = p.inductance();
  detail::require_positive(L, "osc1.L");
  const double C = p.C, G = p.G, a1 = p.a1, a3 = p.a3, w = p.w_rms;

  auto f = [=](std::span<const double> x, std::span<double> dx) {
    const double v = x[0];
    dx[0] = (-G * v - x[1] - (a1 * v + a3 * v * v * v)) / C;
    dx[1] = v / L;
  };
  auto jac = [=](std::span<const double> x, Eigen::Ref<Eigen::MatrixXd> J) {
    const double v = x[0];
    J(0, 0) = (-G - a1 - 3 * a3 * v * v) / C;
    J(0, 1) = -1 / C;
    J(1, 0) = 1 / L;
    J(1, 1) = 0;
  };
  auto noise = [=](std::span<const double>, Eigen::Ref<Eigen::MatrixXd> B) {
    B(0, 0) = w / C;
    B(1, 0) = 0;
  };
  StateSpaceModel m({"osc1.v", "osc1.iL"}, {"osc1.w"}, f, jac, noise);
  m.set_node_capacitance(0, C);
  m.set_start_state(Eigen::Vector2d(0.05, 0.0));
  m.set_period_hint(2 * std::numbers::pi * std::sqrt(L * C));
  return m;
}

// Common-node voltage at which the pair sinks exactly I_tail with vd = 0.
inline double osc2_bias_vcg(const Osc2Params& p) {
  const double k = p.kp * p.W_over_L;
  double lo = p.VDD - p.Vth0 - 5.0, hi = p.VDD - p.Vth0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double i = 2 * detail::drain_current(p.VDD - mid, p.VDD - mid, k, p.Vth0, p.lambda).i;
    (i > p.I_tail ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

inline StateSpaceModel make_osc2(const Osc2Params& p = {}) {
  detail::require_positive(p.C, "osc2.C");
  detail::require_positive(p.L, "osc2.L");
  detail::require_positive(p.C_cg, "osc2.C_cg");
  detail::require_positive(p.W_over_L, "osc2.W_over_L");
  detail::require_positive(p.kp, "osc2.kp");
  const double C = p.C, L = p.L, G = p.G, Ccg = p.C_cg, VDD = p.VDD, It = p.I_tail;
  const double k = p.kp * p.W_over_L, vth = p.Vth0, lam = p.lambda, n = p.n_rms;

  auto f = [=](std::span<const double> x, std::span<double> dx) {
    const double vd = x[0], vcg = x[2];
    const double va = VDD + 0.5 * vd, vb = VDD - 0.5 * vd;
    const double i1 = detail::drain_current(vb - vcg, va - vcg, k, vth, lam).i;
    const double i2 = detail::drain_current(va - vcg, vb - vcg, k, vth, lam).i;
    dx[0] = (-G * vd - x[1] - (i1 - i2)) / C;
    dx[1] = vd / L;
    dx[2] = (i1 + i2 - It) / Ccg;
  };
  auto jac = [=](std::span<const double> x, Eigen::Ref<Eigen::MatrixXd> J) {
    const double vd = x[0], vcg = x[2];
    const double va = VDD + 0.5 * vd, vb = VDD - 0.5 * vd;
    const auto d1 = detail::drain_current(vb - vcg, va - vcg, k, vth, lam);
    const auto d2 = detail::drain_current(va - vcg, vb - vcg, k, vth, lam);
    const double di1_vd = 0.5 * (d1.gds - d1.gm), di1_vcg = -d1.gm - d1.gds;
    const double di2_vd = 0.5 * (d2.gm - d2.gds), di2_vcg = -d2.gm - d2.gds;
    J.setZero();
    J(0, 0) = (-G - (di1_vd - di2_vd)) / C;
    J(0, 1) = -1 / C;
    J(0, 2) = -(di1_vcg - di2_vcg) / C;
    J(1, 0) = 1 / L;
    J(2, 0) = (di1_vd + di2_vd) / Ccg;
    J(2, 2) = (di1_vcg + di2_vcg) / Ccg;
  };
  auto noise = [=](std::span<const double>, Eigen::Ref<Eigen::MatrixXd> B) {
    B.setZero();
    B(2, 0) = n / Ccg;
  };
  StateSpaceModel m({"osc2.vd", "osc2.iL", "osc2.vcg"}, {"osc2.n"}, f, jac, noise);
  m.set_node_capacitance(0, C);
  m.set_node_capacitance(2, Ccg);
  m.set_start_state(Eigen::Vector3d(0.05, 0.0, osc2_bias_vcg(p)));
  m.set_period_hint(2 * std::numbers::pi * std::sqrt(L * C));
  return m;
}

inline std::pair<StateSpaceModel, StateSpaceModel> build_reference_circuits(const Osc1Params& p1 = {},
                                                                            const Osc2Params& p2 = {}) {
  return {make_osc1(p1), make_osc2(p2)};
}

// Stacks P and S; the buffer current enters the S output node's charge balance.
inline StateSpaceModel assemble_ilo(const StateSpaceModel& p, const StateSpaceModel& s,
                                    const BufferCoupling& c, std::size_t q) {
  const std::size_t nP = p.dim(), nS = s.dim(), pP = p.noise_count(), pS = s.noise_count();
  if (c.input_node >= nP) throw IndexError("coupling input node out of range");
  if (c.output_node >= nS) throw IndexError("coupling output node out of range");
  if (q >= nP + nS) throw IndexError("observation node out of range");
  const double Cout = s.node_capacitance(c.output_node);
  if (!(Cout > 0)) throw IndexError("coupling output node '" + s.state_labels()[c.output_node] +
                                    "' is not a capacitive node");
  const std::size_t in = c.input_node, out = nP + c.output_node;
  const BufferCoupling cc = c;

  auto f = [p, s, cc, nP, nS, in, out, Cout](std::span<const double> x, std::span<double> dx) {
    p.eval(x.subspan(0, nP), dx.subspan(0, nP));
    s.eval(x.subspan(nP, nS), dx.subspan(nP, nS));
    dx[out] += cc.current(x[in]) / Cout;
  };
  auto jac = [p, s, cc, nP, nS, in, out, Cout](std::span<const double> x, Eigen::Ref<Eigen::MatrixXd> J) {
    J.setZero();
    p.jacobian(x.subspan(0, nP), J.topLeftCorner(nP, nP));
    s.jacobian(x.subspan(nP, nS), J.bottomRightCorner(nS, nS));
    J(out, in) += cc.transconductance(x[in]) / Cout;
  };
  auto noise = [p, s, nP, nS, pP, pS](std::span<const double> x, Eigen::Ref<Eigen::MatrixXd> B) {
    B.setZero();
    p.noise_matrix(x.subspan(0, nP), B.topLeftCorner(nP, pP));
    s.noise_matrix(x.subspan(nP, nS), B.bottomRightCorner(nS, pS));
  };

  std::vector<std::string> labels = p.state_labels();
  labels.insert(labels.end(), s.state_labels().begin(), s.state_labels().end());
  std::vector<std::string> nlabels = p.noise_labels();
  nlabels.insert(nlabels.end(), s.noise_labels().begin(), s.noise_labels().end());

  StateSpaceModel m(std::move(labels), std::move(nlabels), f, jac, noise,
                    p.constant_noise() && s.constant_noise());
  for (std::size_t i = 0; i < nP; ++i) m.set_node_capacitance(i, p.node_capacitance(i));
  for (std::size_t i = 0; i < nS; ++i) m.set_node_capacitance(nP + i, s.node_capacitance(i));
  Eigen::VectorXd x0(nP + nS);
  x0 << p.start_state(), s.start_state();
  m.set_start_state(x0);
  m.set_period_hint(p.period_hint());
  return m;
}

struct IloAssembly {
  StateSpaceModel p_osc;
  StateSpaceModel s_osc;
  BufferCoupling coupling;
  std::size_t observation_node = 0;

  StateSpaceModel model() const { return assemble_ilo(p_osc, s_osc, coupling, observation_node); }
};

// Reference ILO: OSC1 drives OSC2's differential node through g_c1; observed at osc2.vd.
inline IloAssembly make_reference_ilo(double gc1 = 35e-6, const Osc1Params& p1 = {},
                                      const Osc2Params& p2 = {}) {
  IloAssembly a{make_osc1(p1), make_osc2(p2), {}, 0};
  a.coupling.g[1] = gc1;
  a.coupling.input_node = 0;
  a.coupling.output_node = 0;
  a.observation_node = a.p_osc.dim();
  return a;
}

}  // namespace ilopn
