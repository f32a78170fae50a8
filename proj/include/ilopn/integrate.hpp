#pragma once

#include <Eigen/Dense>
#include <boost/numeric/odeint.hpp>

#include <span>
#include <vector>

#include "state_space.hpp"

namespace ilopn {

struct Rk4Workspace {
  explicit Rk4Workspace(std::size_t n) : k1(n), k2(n), k3(n), k4(n), tmp(n) {}
  std::vector<double> k1, k2, k3, k4, tmp;
};

inline void rk4_step(const StateSpaceModel& m, std::span<double> x, double h, Rk4Workspace& w) {
  const std::size_t n = x.size();
  m.eval(x, w.k1);
  for (std::size_t i = 0; i < n; ++i) w.tmp[i] = x[i] + 0.5 * h * w.k1[i];
  m.eval(w.tmp, w.k2);
  for (std::size_t i = 0; i < n; ++i) w.tmp[i] = x[i] + 0.5 * h * w.k2[i];
  m.eval(w.tmp, w.k3);
  for (std::size_t i = 0; i < n; ++i) w.tmp[i] = x[i] + h * w.k3[i];
  m.eval(w.tmp, w.k4);
  for (std::size_t i = 0; i < n; ++i) x[i] += h / 6 * (w.k1[i] + 2 * w.k2[i] + 2 * w.k3[i] + w.k4[i]);
}

inline Eigen::VectorXd rk4_integrate(const StateSpaceModel& m, Eigen::VectorXd x, double T, long steps) {
  Rk4Workspace w(m.dim());
  const double h = T / static_cast<double>(steps);
  for (long s = 0; s < steps; ++s) rk4_step(m, {x.data(), m.dim()}, h, w);
  return x;
}

// Orbit plus sensitivity Y(t) = dx(t)/dx(0), recorded on N+1 uniform points.
struct VariationalTrajectory {
  Eigen::MatrixXd states;            // (N+1) x n
  std::vector<Eigen::MatrixXd> phi;  // N+1 matrices, phi[0] = I
};

// Classic RK4 applied to the joint system (x, Y); `sub` steps between records.
inline VariationalTrajectory integrate_variational(const StateSpaceModel& m, const Eigen::VectorXd& x0,
                                                   double T, int N, int sub) {
  const std::size_t n = m.dim();
  const double h = T / (static_cast<double>(N) * sub);
  VariationalTrajectory out;
  out.states.resize(N + 1, n);
  out.phi.reserve(N + 1);

  Eigen::VectorXd x = x0, xs(n), k1(n), k2(n), k3(n), k4(n);
  Eigen::MatrixXd Y = Eigen::MatrixXd::Identity(n, n), J(n, n), K1(n, n), K2(n, n), K3(n, n), K4(n, n);
  auto f = [&](const Eigen::VectorXd& a, Eigen::VectorXd& d) { m.eval({a.data(), n}, {d.data(), n}); };
  auto jac = [&](const Eigen::VectorXd& a) { m.jacobian({a.data(), n}, J); };

  out.states.row(0) = x.transpose();
  out.phi.push_back(Y);
  for (int k = 0; k < N; ++k) {
    for (int s = 0; s < sub; ++s) {
      f(x, k1);
      jac(x);
      K1.noalias() = J * Y;
      xs = x + 0.5 * h * k1;
      f(xs, k2);
      jac(xs);
      K2.noalias() = J * (Y + 0.5 * h * K1);
      xs = x + 0.5 * h * k2;
      f(xs, k3);
      jac(xs);
      K3.noalias() = J * (Y + 0.5 * h * K2);
      xs = x + h * k3;
      f(xs, k4);
      jac(xs);
      K4.noalias() = J * (Y + h * K3);
      x += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
      Y += h / 6 * (K1 + 2 * K2 + 2 * K3 + K4);
    }
    out.states.row(k + 1) = x.transpose();
    out.phi.push_back(Y);
  }
  return out;
}

// Adaptive Dormand-Prince 5(4) transient, used for ring-up.
inline Eigen::VectorXd integrate_adaptive(const StateSpaceModel& m, const Eigen::VectorXd& x0, double T,
                                          double rel_tol = 1e-10, double abs_tol = 1e-14) {
  namespace odeint = boost::numeric::odeint;
  using Vec = std::vector<double>;
  const std::size_t n = m.dim();
  Vec x(x0.data(), x0.data() + n);
  auto sys = [&](const Vec& a, Vec& d, double) { m.eval({a.data(), n}, {d.data(), n}); };
  const double dt0 = m.period_hint() > 0 ? m.period_hint() / 100 : T / 1e4;
  odeint::integrate_adaptive(odeint::make_controlled<odeint::runge_kutta_dopri5<Vec>>(abs_tol, rel_tol), sys,
                             x, 0.0, T, dt0);
  return Eigen::Map<Eigen::VectorXd>(x.data(), n);
}

}  // namespace ilopn
