#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "error.hpp"
#include "integrate.hpp"
#include "state_space.hpp"

namespace ilopn {

struct ShootingOptions {
  int samples = 1024;  // N_t
  int substeps = 4;    // RK4 steps between samples
  double tol = 1e-10;  // on max_i |r_i| / amplitude_i
  int max_iterations = 50;
  int ringup_periods = 200;
  std::size_t anchor = 0;  // state whose value is pinned at t = 0
  // Also pinned, for conservative systems whose amplitude is not isolated (e.g. a linear tank).
  std::optional<std::size_t> amplitude_anchor;
};

struct PeriodicSteadyState {
  double T0 = 0;
  double omega0 = 0;
  Eigen::VectorXd x0;
  Eigen::MatrixXd samples;  // (N_t + 1) x n; last row repeats the first
  int substeps = 4;
  std::size_t anchor = 0;
  double residual = 0;
  int iterations = 0;

  int n_samples() const { return static_cast<int>(samples.rows()) - 1; }
  double time(int k) const { return T0 * k / n_samples(); }

  // Half peak-to-peak of every component.
  Eigen::VectorXd amplitude() const {
    return 0.5 * (samples.colwise().maxCoeff() - samples.colwise().minCoeff()).transpose();
  }
};

namespace detail {

inline Eigen::VectorXd state_scale(const Eigen::MatrixXd& states) {
  Eigen::VectorXd s = 0.5 * (states.colwise().maxCoeff() - states.colwise().minCoeff()).transpose();
  const double floor = std::max(1e-9 * s.maxCoeff(), 1e-300);
  for (Eigen::Index i = 0; i < s.size(); ++i) s[i] = std::max(s[i], floor);
  return s;
}

// A second multiplier on the unit circle means a neutral family of orbits, not an isolated lock.
inline void reject_neutral_family(const Eigen::MatrixXd& M, const Eigen::VectorXd& s, const ShootingOptions& opt) {
  if (opt.amplitude_anchor) return;
  const Eigen::MatrixXd Ms = s.cwiseInverse().asDiagonal() * M * s.asDiagonal();
  const Eigen::VectorXcd ev = Ms.eigenvalues();
  int unit = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) unit += std::abs(std::abs(ev[i]) - 1.0) < 1e-6;
  if (unit > 1)
    throw LockNotDetected("periodic orbit has " + std::to_string(unit) +
                          " Floquet multipliers on the unit circle; it is not an isolated limit cycle");
}

}  // namespace detail

// Newton shooting on (x0, T) with x0[anchor] held fixed.
inline PeriodicSteadyState find_limit_cycle(const StateSpaceModel& model, double guess_T,
                                            const Eigen::VectorXd& guess_x, const ShootingOptions& opt = {}) {
  const std::size_t n = model.dim();
  if (!(opt.tol > 0)) throw ConfigError("shooting tolerance must be positive");
  if (!(guess_T > 0)) throw ConfigError("period guess must be positive");
  if (static_cast<std::size_t>(guess_x.size()) != n) throw IndexError("initial state has wrong length");
  if (opt.anchor >= n || (opt.amplitude_anchor && *opt.amplitude_anchor >= n))
    throw IndexError("anchor index out of range");
  const std::size_t rows = n + 1 + (opt.amplitude_anchor ? 1 : 0);
  if (opt.samples < 4 || opt.substeps < 1) throw ConfigError("need samples >= 4 and substeps >= 1");

  Eigen::VectorXd x0 = guess_x;
  double T = guess_T;
  double res = INFINITY;
  Eigen::MatrixXd last_phi;
  Eigen::VectorXd last_scale;
  const int N = opt.samples;
  for (int it = 0; it <= opt.max_iterations; ++it) {
    VariationalTrajectory tr = integrate_variational(model, x0, T, N, opt.substeps);
    const Eigen::VectorXd xT = tr.states.row(N).transpose();
    const Eigen::VectorXd r = xT - x0;
    const Eigen::VectorXd s = detail::state_scale(tr.states);
    res = (r.array() / s.array()).abs().maxCoeff();
    if (!std::isfinite(res)) break;
    if (res < opt.tol) {
      detail::reject_neutral_family(tr.phi.back(), s, opt);
      PeriodicSteadyState pss;
      pss.T0 = T;
      pss.omega0 = 2 * std::numbers::pi / T;
      pss.x0 = x0;
      pss.samples = std::move(tr.states);
      pss.samples.row(N) = x0.transpose();
      pss.substeps = opt.substeps;
      pss.anchor = opt.anchor;
      pss.residual = res;
      pss.iterations = it;
      return pss;
    }
    if (it == opt.max_iterations) {
      last_phi = tr.phi.back();
      last_scale = s;
      break;
    }

    // Scaled unknowns y = dx / s, tau = dT / T.
    Eigen::VectorXd fT(n);
    model.eval({xT.data(), n}, {fT.data(), n});
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(rows, n + 1);
    const Eigen::MatrixXd MI = tr.phi.back() - Eigen::MatrixXd::Identity(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) A(i, j) = MI(i, j) * s[j] / s[i];
      A(i, n) = fT[i] * T / s[i];
    }
    A(n, opt.anchor) = 1.0;
    if (opt.amplitude_anchor) A(n + 1, *opt.amplitude_anchor) = 1.0;
    Eigen::VectorXd b = Eigen::VectorXd::Zero(rows);
    b.head(n) = -(r.array() / s.array()).matrix();

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    if (sv[n] < 1e-12 * sv[0])
      throw LockNotDetected("shooting Jacobian is singular beyond the phase-shift direction; lock not detected");
    Eigen::VectorXd d = svd.solve(b);

    // Keep the step inside the region where the linearisation is credible.
    const double big = std::max(d.head(n).cwiseAbs().maxCoeff() / 0.5, std::abs(d[n]) / 0.05);
    if (big > 1) d /= big;
    x0 += (d.head(n).array() * s.array()).matrix();
    T *= 1 + d[n];
    if (!(T > 0)) break;
  }
  if (last_phi.size()) detail::reject_neutral_family(last_phi, last_scale, opt);
  throw NoConvergence(opt.max_iterations, res);
}

struct RingUp {
  Eigen::VectorXd x;  // state at an upward mid-level crossing of the anchor
  double T = 0;       // crossing-to-crossing period estimate
};

// Integrates the transient, then picks the upward mid-level crossing of the anchor state.
inline RingUp ring_up(const StateSpaceModel& model, double guess_T, const Eigen::VectorXd& start,
                      int periods, std::size_t anchor) {
  const std::size_t n = model.dim();
  Eigen::VectorXd x = integrate_adaptive(model, start, guess_T * periods);
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(x[i])) throw NonFiniteState(i, model.state_labels()[i]);

  const int per = 512, count = 3 * per;
  const double h = guess_T / per;
  Eigen::MatrixXd rec(count + 1, n);
  rec.row(0) = x.transpose();
  Rk4Workspace w(n);
  for (int k = 1; k <= count; ++k) {
    rk4_step(model, {x.data(), n}, h, w);
    rec.row(k) = x.transpose();
  }
  const Eigen::VectorXd a = rec.col(anchor);
  const double level = 0.5 * (a.maxCoeff() + a.minCoeff());
  if (a.maxCoeff() - a.minCoeff() <= 1e-12 * (std::abs(level) + 1))
    throw LockNotDetected("no oscillation on state '" + model.state_labels()[anchor] + "' after ring-up");

  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  for (int k = 0; k < count; ++k) {
    if (a[k] < level && a[k + 1] >= level) {
      const double fr = (level - a[k]) / (a[k + 1] - a[k]);
      times.push_back((k + fr) * h);
      states.push_back(rec.row(k).transpose() + fr * (rec.row(k + 1) - rec.row(k)).transpose());
    }
  }
  if (times.empty()) throw LockNotDetected("anchor state never crossed its mid level during ring-up");
  RingUp out;
  out.x = states.front();
  out.x[anchor] = level;
  out.T = times.size() >= 2 ? times[1] - times[0] : guess_T;
  return out;
}

// Ring-up from the model's hints, then shoot.
inline PeriodicSteadyState solve_pss(const StateSpaceModel& model, const ShootingOptions& opt = {}) {
  if (!(model.period_hint() > 0)) throw ConfigError("model has no period hint; use find_limit_cycle");
  const RingUp r = ring_up(model, model.period_hint(), model.start_state(), opt.ringup_periods, opt.anchor);
  return find_limit_cycle(model, r.T, r.x, opt);
}

}  // namespace ilopn
