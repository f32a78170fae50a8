#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <vector>

#include "error.hpp"
#include "fourier.hpp"
#include "integrate.hpp"
#include "pss.hpp"
#include "state_space.hpp"

namespace ilopn {

inline Eigen::MatrixXd monodromy(const StateSpaceModel& model, const PeriodicSteadyState& pss) {
  return integrate_variational(model, pss.x0, pss.T0, pss.n_samples(), pss.substeps).phi.back();
}

// Multipliers and exponents, mode 1 first (closest to 1, mu snapped to 0),
// then descending real part.  With autonomous = false nothing is snapped and
// all modes are sorted by descending real part.
struct FloquetSpectrum {
  Eigen::VectorXcd iota;
  Eigen::VectorXcd mu;
  Eigen::MatrixXcd W;  // right eigenvectors of the monodromy, same order
  bool stable = true;
  bool near_degenerate = false;
};

inline FloquetSpectrum floquet_exponents(const Eigen::MatrixXd& M, double T0, bool autonomous = true) {
  if (!M.allFinite()) throw SolverError("monodromy matrix is not finite");
  const Eigen::Index n = M.rows();
  Eigen::EigenSolver<Eigen::MatrixXd> es(M);
  if (es.info() != Eigen::Success) throw SolverError("eigen-decomposition of the monodromy failed");
  const Eigen::VectorXcd ev = es.eigenvalues();
  const Eigen::MatrixXcd evec = es.eigenvectors();

  Eigen::VectorXcd lmu(n);
  for (Eigen::Index i = 0; i < n; ++i) lmu[i] = std::log(ev[i]) / T0;

  Eigen::Index first = 0;
  for (Eigen::Index i = 1; i < n; ++i) {
    const bool better = autonomous ? std::abs(ev[i] - 1.0) < std::abs(ev[first] - 1.0)
                                   : lmu[i].real() > lmu[first].real();
    if (better) first = i;
  }
  std::vector<Eigen::Index> rest;
  for (Eigen::Index i = 0; i < n; ++i)
    if (i != first) rest.push_back(i);
  std::stable_sort(rest.begin(), rest.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (lmu[a].real() != lmu[b].real()) return lmu[a].real() > lmu[b].real();
    return lmu[a].imag() > lmu[b].imag();
  });

  FloquetSpectrum out;
  out.iota.resize(n);
  out.mu.resize(n);
  out.W.resize(n, n);
  out.iota[0] = ev[first];
  out.mu[0] = autonomous ? cplx(0.0) : lmu[first];
  out.W.col(0) = evec.col(first);
  for (std::size_t k = 0; k < rest.size(); ++k) {
    out.iota[k + 1] = ev[rest[k]];
    out.mu[k + 1] = lmu[rest[k]];
    out.W.col(k + 1) = evec.col(rest[k]);
  }
  for (Eigen::Index i = autonomous ? 1 : 0; i < n; ++i) {
    if (std::abs(out.iota[i]) > 1 + 1e-6)
      throw UnstablePSS("Floquet multiplier " + std::to_string(i + 1) + " has modulus " +
                        std::to_string(std::abs(out.iota[i])));
    if (std::abs(out.iota[i]) >= 1) out.stable = false;
  }
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      if (std::abs(out.iota[i] - out.iota[j]) < 1e-8) out.near_degenerate = true;
  return out;
}

struct FloquetOptions {
  int retained_modes = 0;  // modes that must be non-degenerate; 0 means all
  double biorth_tol = 1e-6;
  int refinements = 2;     // substep doublings tried on biorthogonality loss
};

struct FloquetDecomposition {
  double T0 = 0;
  double omega0 = 0;
  Eigen::VectorXcd mu;
  Eigen::VectorXcd iota;
  std::vector<Eigen::MatrixXcd> u;       // per mode, N_t x n
  std::vector<Eigen::MatrixXcd> v;       // per mode, N_t x n (rows are v_i^T(t_k))
  std::vector<Eigen::MatrixXcd> lambda;  // per mode, N_t x p
  double c = 0;                          // phase-diffusion constant (s)
  double biorth_error = 0;
  double tangent_error = 0;  // max |u_1 - x_s'| / max |x_s'|
  int substeps = 0;

  int modes() const { return static_cast<int>(mu.size()); }
  int n_samples() const { return u.empty() ? 0 : static_cast<int>(u[0].rows()); }
};

namespace detail {

inline FloquetDecomposition floquet_vectors_once(const StateSpaceModel& model, const PeriodicSteadyState& pss,
                                                 int substeps, int retained) {
  const int N = pss.n_samples();
  const std::size_t n = model.dim();
  const VariationalTrajectory tr = integrate_variational(model, pss.x0, pss.T0, N, substeps);
  // Work in amplitude-scaled coordinates; volts and amperes differ by orders of magnitude.
  const Eigen::VectorXd D = detail::state_scale(pss.samples);
  const Eigen::VectorXd Dinv = D.cwiseInverse();
  auto scaled = [&](const Eigen::MatrixXd& Phi) -> Eigen::MatrixXd { return Dinv.asDiagonal() * Phi * D.asDiagonal(); };
  FloquetSpectrum fs = floquet_exponents(scaled(tr.phi.back()), pss.T0);
  const int keep = retained > 0 ? std::min<int>(retained, n) : static_cast<int>(n);
  for (int i = 0; i < keep; ++i)
    for (int j = i + 1; j < keep; ++j)
      if (std::abs(fs.iota[i] - fs.iota[j]) < 1e-8)
        throw NearDegenerate("Floquet multipliers " + std::to_string(i + 1) + " and " + std::to_string(j + 1) +
                             " coincide; the phase modes are not separable");

  // Mode 1 is the tangent: pin its scale so that u_1(0) = f(x0).
  Eigen::VectorXd f0(n);
  model.eval({pss.x0.data(), n}, {f0.data(), n});
  Eigen::MatrixXcd W = fs.W;
  W.col(0) = (Dinv.cwiseProduct(f0)).cast<cplx>();
  // Other modes have free scale; match mode 1 so no product v_i^T u_j hides a large cancellation.
  const double w1 = W.col(0).norm();
  for (std::size_t i = 1; i < n; ++i) W.col(i) *= w1 / W.col(i).norm();
  Eigen::PartialPivLU<Eigen::MatrixXcd> wlu(W);
  const Eigen::MatrixXcd What = wlu.inverse();

  FloquetDecomposition d;
  d.T0 = pss.T0;
  d.omega0 = pss.omega0;
  d.mu = fs.mu;
  d.iota = fs.iota;
  d.substeps = substeps;
  d.u.assign(n, Eigen::MatrixXcd(N, n));
  d.v.assign(n, Eigen::MatrixXcd(N, n));

  double fmax = 0, dev = 0, bio = 0;
  Eigen::VectorXd xk(n), fk(n);
  for (int k = 0; k < N; ++k) {
    const double t = pss.time(k);
    const Eigen::MatrixXd Phi = scaled(tr.phi[k]);
    const Eigen::MatrixXcd PW = D.cast<cplx>().asDiagonal() * (Phi.cast<cplx>() * W);
    const Eigen::MatrixXcd WP = (What * Phi.inverse().cast<cplx>()) * Dinv.cast<cplx>().asDiagonal();
    for (std::size_t i = 0; i < n; ++i) {
      d.u[i].row(k) = (std::exp(-d.mu[i] * t) * PW.col(i)).transpose();
      d.v[i].row(k) = std::exp(d.mu[i] * t) * WP.row(i);
    }
    xk = pss.samples.row(k).transpose();
    model.eval({xk.data(), n}, {fk.data(), n});
    fmax = std::max(fmax, fk.norm());
    dev = std::max(dev, (d.u[0].row(k).transpose() - fk.cast<cplx>()).norm());
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const cplx p = (d.v[i].row(k) * d.u[j].row(k).transpose())(0, 0);
        bio = std::max(bio, std::abs(p - (i == j ? 1.0 : 0.0)));
      }
    bio = std::max(bio, std::abs((d.v[0].row(k) * fk.cast<cplx>())(0, 0) - 1.0));
  }
  d.biorth_error = bio;
  d.tangent_error = fmax > 0 ? dev / fmax : 0;
  return d;
}

}  // namespace detail

// Direct/dual periodic vectors on the PSS grid.
inline FloquetDecomposition floquet_vectors(const StateSpaceModel& model, const PeriodicSteadyState& pss,
                                            const FloquetOptions& opt = {}) {
  int sub = pss.substeps;
  for (int attempt = 0;; ++attempt) {
    FloquetDecomposition d = detail::floquet_vectors_once(model, pss, sub, opt.retained_modes);
    const double err = std::max(d.biorth_error, d.tangent_error);
    if (err <= opt.biorth_tol) return d;
    if (attempt >= opt.refinements) throw BiorthogonalityLoss(err);
    sub *= 2;
  }
}

// c = time average of lambda_1 lambda_1^T over one period (unit-intensity sources).
inline double phase_diffusion_constant(const Eigen::MatrixXcd& lambda1) {
  if (lambda1.rows() == 0) return 0;
  const double c = lambda1.cwiseAbs2().sum() / static_cast<double>(lambda1.rows());
  if (!std::isfinite(c)) throw SolverError("phase-diffusion constant is not finite");
  return c;
}

// lambda_i(t) = v_i^T(t) B(x_s(t)); also sets c.
inline void lambda_vectors(FloquetDecomposition& d, const StateSpaceModel& model, const PeriodicSteadyState& pss) {
  const int N = d.n_samples();
  const std::size_t n = model.dim(), p = model.noise_count();
  d.lambda.assign(d.modes(), Eigen::MatrixXcd(N, p));
  Eigen::MatrixXd B(n, p);
  Eigen::VectorXd xk(n);
  for (int k = 0; k < N; ++k) {
    if (k == 0 || !model.constant_noise()) {
      xk = pss.samples.row(k).transpose();
      model.noise_matrix({xk.data(), n}, B);
    }
    const Eigen::MatrixXcd Bc = B.cast<cplx>();
    for (int i = 0; i < d.modes(); ++i) d.lambda[i].row(k) = d.v[i].row(k) * Bc;
  }
  d.c = phase_diffusion_constant(d.lambda[0]);
}

// Everything the closed-form spectra need, in harmonic form.
struct ModeHarmonics {
  int Nh = 0;
  double omega0 = 0;
  std::vector<HarmonicSet> U;       // per mode, width n
  std::vector<HarmonicSet> Lambda;  // per mode, width p
  HarmonicSet X;                    // PSS, width n
};

inline ModeHarmonics mode_harmonics(const FloquetDecomposition& d, const PeriodicSteadyState& pss, int Nh) {
  ModeHarmonics h;
  h.Nh = Nh;
  h.omega0 = d.omega0;
  h.X = fourier_harmonics(pss, Nh);
  for (int i = 0; i < d.modes(); ++i) {
    h.U.push_back(harmonics_of(d.u[i], Nh, true, "Floquet vector u"));
    h.Lambda.push_back(harmonics_of(d.lambda[i], Nh, true, "lambda vector"));
  }
  return h;
}

struct FloquetAnalysis {
  FloquetDecomposition decomp;
  ModeHarmonics harmonics;
};

inline FloquetAnalysis analyze_floquet(const StateSpaceModel& model, const PeriodicSteadyState& pss, int Nh = 32,
                                       const FloquetOptions& opt = {}) {
  FloquetAnalysis a;
  a.decomp = floquet_vectors(model, pss, opt);
  lambda_vectors(a.decomp, model, pss);
  a.harmonics = mode_harmonics(a.decomp, pss, Nh);
  return a;
}

}  // namespace ilopn
