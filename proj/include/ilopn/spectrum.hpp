#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "error.hpp"
#include "floquet.hpp"
#include "fourier.hpp"

namespace ilopn {

enum class Method { CoscPmm, IloPmm, KIlo, Lorentzian, Oracle };

inline std::string method_name(Method m) {
  switch (m) {
    case Method::CoscPmm: return "cosc-pmm";
    case Method::IloPmm: return "ilo-pmm";
    case Method::KIlo: return "k-ilo";
    case Method::Lorentzian: return "lorentzian";
    case Method::Oracle: return "oracle";
  }
  return "unknown";
}

inline Method parse_method(const std::string& s) {
  for (Method m : {Method::CoscPmm, Method::IloPmm, Method::KIlo, Method::Lorentzian, Method::Oracle})
    if (method_name(m) == s) return m;
  throw ConfigError("unknown spectrum method '" + s + "'");
}

constexpr double kDbFloor = 1e-300;

inline double to_db(double lin) { return 10 * std::log10(std::max(lin, kDbFloor)); }
inline double from_db(double db) { return std::pow(10.0, db / 10); }

// Logarithmic offset grid in Hz, both ends included.
inline std::vector<double> log_grid(double fmin, double fmax, int per_decade) {
  if (!(fmin > 0) || !(fmax > fmin) || per_decade < 1) throw ConfigError("bad offset grid");
  const double decades = std::log10(fmax / fmin);
  const int n = std::max(1, static_cast<int>(std::lround(decades * per_decade)));
  std::vector<double> f(n + 1);
  for (int i = 0; i <= n; ++i) f[i] = fmin * std::pow(10.0, decades * i / n);
  f.back() = fmax;
  return f;
}

// Single-sideband density relative to the carrier, per Hz; integrates to 1 over all offsets.
struct SpectrumResult {
  Method method = Method::IloPmm;
  int nu = 1;
  int rho_max = 0;
  int p_max = 0;
  std::vector<double> offsets_hz;
  std::vector<double> density;
  bool truncation_warning = false;
  int negative_count = 0;  // offsets where the truncated sum went negative
  std::vector<double> std_error_db;  // oracle only

  double omega(std::size_t i) const { return 2 * std::numbers::pi * offsets_hz[i]; }
  std::vector<double> dbc() const {
    std::vector<double> out(density.size());
    for (std::size_t i = 0; i < density.size(); ++i) out[i] = to_db(density[i]);
    return out;
  }
};

struct Deviation {
  double max_db = 0;
  double mean_db = 0;
  double at_hz = 0;  // offset of the maximum
  int points = 0;
};

// |a - b| in dB over offsets inside [fmin, fmax]; grids must match.
inline Deviation compare_spectra(const SpectrumResult& a, const SpectrumResult& b, double fmin, double fmax) {
  if (a.offsets_hz.size() != b.offsets_hz.size()) throw ConfigError("spectra are on different grids");
  Deviation d;
  for (std::size_t i = 0; i < a.offsets_hz.size(); ++i) {
    const double f = a.offsets_hz[i];
    if (f < fmin * (1 - 1e-12) || f > fmax * (1 + 1e-12)) continue;
    const double e = std::abs(to_db(a.density[i]) - to_db(b.density[i]));
    if (e > d.max_db) {
      d.max_db = e;
      d.at_hz = f;
    }
    d.mean_db += e;
    ++d.points;
  }
  if (d.points) d.mean_db /= d.points;
  return d;
}

inline SpectrumResult free_running_lorentzian(double c, double omega0, const std::vector<double>& offsets_hz) {
  SpectrumResult r;
  r.method = Method::Lorentzian;
  r.offsets_hz = offsets_hz;
  const double a = omega0 * omega0 * c;
  for (std::size_t i = 0; i < offsets_hz.size(); ++i) {
    const double w = r.omega(i);
    r.density.push_back(a / (0.25 * a * a + w * w));
  }
  return r;
}

struct SpectrumOptions {
  int rho_max = 16;
  int p_max = 16;
  int mode2 = 1;   // zero-based index of the second phase mode
  int modes = 2;   // k for the general model
};

namespace detail {

// a^T conj(b), the p-dimensional inner product used throughout.
inline cplx dot_conj(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) { return (a.transpose() * b.conjugate())(0, 0); }

inline double carrier_power(const ModeHarmonics& h, std::size_t q, int nu) {
  const double x2 = std::norm(h.X.at(nu, q));
  double ref = 0;
  for (Eigen::Index i = 0; i < h.X.width(); ++i) ref = std::max(ref, std::norm(h.X.at(nu, i)));
  if (!(x2 > 1e-24 * ref) || x2 == 0)
    throw ZeroCarrier("observation node has no component at harmonic " + std::to_string(nu));
  return x2;
}

inline double real_decaying_mode(const FloquetDecomposition& d, int mode2) {
  if (mode2 < 1 || mode2 >= d.modes()) throw ConfigError("phase mode index out of range");
  const cplx mu = d.mu[mode2];
  if (std::abs(mu.imag()) * d.T0 > 1e-6)
    throw SolverError("Floquet mode " + std::to_string(mode2 + 1) + " is not real (mu*T0 = " +
                      std::to_string(mu.real() * d.T0) + " + j" + std::to_string(mu.imag() * d.T0) + ")");
  if (mu.real() == 0) throw UncoupledSingularity("second phase mode has mu = 0 (uncoupled ensemble)");
  if (mu.real() > 0) throw UnstablePSS("second phase mode is not decaying");
  return mu.real();
}

}  // namespace detail

// Psi = sum_p U_{1,1} L_{1,0}^T conj(L_{2,1-p}) U_{2,p}^H / (j w0 (p-1) - mu2)
inline Eigen::MatrixXcd psi_tensor(const ModeHarmonics& h, double mu2, double omega0, int p_max, int mode2 = 1) {
  if (mu2 == 0) throw UncoupledSingularity("Psi: mu2 = 0 makes the p = 1 term singular");
  const HarmonicSet &U1 = h.U.at(0), &U2 = h.U.at(mode2), &L1 = h.Lambda.at(0), &L2 = h.Lambda.at(mode2);
  const Eigen::VectorXcd u11 = U1(1), l10 = L1(0);
  const cplx j(0, 1);
  Eigen::MatrixXcd psi = Eigen::MatrixXcd::Zero(u11.size(), u11.size());
  for (int p = -p_max; p <= p_max; ++p) {
    const cplx s = detail::dot_conj(l10, L2(1 - p)) / (j * omega0 * double(p - 1) - mu2);
    psi += s * u11 * U2(p).adjoint();
  }
  return psi;
}

// Phi_rho = U_{1,rho} L_{1,0}^T conj(L_{2,rho-1}) U_{2,1}^H / (j w0 (1-rho) - mu2)
//         + sum_p U_{2,p} L_{2,rho-p}^T conj(L_{2,rho-1}) U_{2,1}^H / (j w0 (1-p) - 2 mu2)
inline Eigen::MatrixXcd phi_tensor(const ModeHarmonics& h, double mu2, double omega0, int rho, int p_max,
                                   int mode2 = 1) {
  if (mu2 == 0) throw UncoupledSingularity("Phi: mu2 = 0 makes the cross term singular");
  const HarmonicSet &U1 = h.U.at(0), &U2 = h.U.at(mode2), &L1 = h.Lambda.at(0), &L2 = h.Lambda.at(mode2);
  const cplx j(0, 1);
  const Eigen::VectorXcd l2r1 = L2(rho - 1);
  const Eigen::RowVectorXcd u21h = U2(1).adjoint();
  Eigen::MatrixXcd phi =
      (detail::dot_conj(L1(0), l2r1) / (j * omega0 * double(1 - rho) - mu2)) * U1(rho) * u21h;
  Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(u21h.size());
  for (int p = -p_max; p <= p_max; ++p)
    acc += (detail::dot_conj(L2(rho - p), l2r1) / (j * omega0 * double(1 - p) - 2 * mu2)) * U2(p);
  phi += acc * u21h;
  return phi;
}

struct TensorBlocks {
  Eigen::MatrixXcd Psi;
  std::map<int, Eigen::MatrixXcd> Phi;
  double alpha = 0, beta = 0;
  std::map<int, double> Delta, Gamma;
  double carrier = 0;  // |X_{s,1}^{[q]}|^2
  double mu2 = 0;
};

inline TensorBlocks ilo_tensor_blocks(const FloquetDecomposition& d, const ModeHarmonics& h, std::size_t q,
                                      const SpectrumOptions& opt = {}) {
  TensorBlocks b;
  b.mu2 = detail::real_decaying_mode(d, opt.mode2);
  b.carrier = detail::carrier_power(h, q, 1);
  b.Psi = psi_tensor(h, b.mu2, d.omega0, opt.p_max, opt.mode2);
  const cplx ab = b.Psi(q, q) / b.carrier;
  b.alpha = ab.real();
  b.beta = ab.imag();
  for (int rho = -opt.rho_max; rho <= opt.rho_max; ++rho) {
    Eigen::MatrixXcd phi = phi_tensor(h, b.mu2, d.omega0, rho, opt.p_max, opt.mode2);
    const cplx dg = phi(q, q) / b.carrier;
    b.Delta[rho] = dg.real();
    b.Gamma[rho] = dg.imag();
    b.Phi.emplace(rho, std::move(phi));
  }
  return b;
}

// First (Lorentzian-like) term of the ILO-PMM on its own.
inline std::vector<double> ilo_pmm_first_term(const TensorBlocks& b, double c, double omega0,
                                              const std::vector<double>& offsets_hz) {
  const double a = omega0 * omega0 * c;
  std::vector<double> out;
  for (double f : offsets_hz) {
    const double w = 2 * std::numbers::pi * f;
    out.push_back(((1 - b.alpha) * a - 2 * b.beta * w) / (0.25 * a * a + w * w));
  }
  return out;
}

inline SpectrumResult evaluate_ilo_pmm(const TensorBlocks& b, double c, double omega0,
                                       const std::vector<double>& offsets_hz, int rho_max) {
  SpectrumResult r;
  r.method = Method::IloPmm;
  r.rho_max = rho_max;
  r.offsets_hz = offsets_hz;
  const double a = omega0 * omega0 * c, m = std::abs(b.mu2);
  const std::vector<double> first = ilo_pmm_first_term(b, c, omega0, offsets_hz);
  for (std::size_t i = 0; i < offsets_hz.size(); ++i) {
    const double w = r.omega(i);
    double total = first[i], shell = 0;
    for (int rho = -rho_max; rho <= rho_max; ++rho) {
      const double r2 = double(rho) * rho;
      const double den = (m + 0.5 * a * r2) * (m + 0.5 * a * r2) + w * w;
      const double t = (b.Delta.at(rho) * (2 * m + a * r2) + 2 * b.Gamma.at(rho) * w) / den;
      total += t;
      if (std::abs(rho) == rho_max) shell += std::abs(t);
    }
    if (rho_max > 0 && shell > 1e-3 * std::abs(total)) r.truncation_warning = true;
    if (total < 0) ++r.negative_count;
    r.density.push_back(total);
  }
  return r;
}

inline SpectrumResult ilo_pmm_spectrum(const FloquetDecomposition& d, const ModeHarmonics& h, std::size_t q,
                                       const std::vector<double>& offsets_hz, const SpectrumOptions& opt = {}) {
  const TensorBlocks b = ilo_tensor_blocks(d, h, q, opt);
  SpectrumResult r = evaluate_ilo_pmm(b, d.c, d.omega0, offsets_hz, opt.rho_max);
  r.p_max = opt.p_max;
  return r;
}

// General k-ensemble model around carrier harmonic nu.
inline SpectrumResult cosc_pmm_spectrum(const FloquetDecomposition& d, const ModeHarmonics& h, std::size_t q,
                                        int nu, const std::vector<double>& offsets_hz,
                                        const SpectrumOptions& opt = {}) {
  const int k = opt.modes;
  if (k < 2 || k > d.modes()) throw ConfigError("general model needs 2 <= k <= n retained modes");
  if (nu < 1 || nu > h.Nh) throw ConfigError("carrier harmonic outside the harmonic truncation");
  const double carrier = detail::carrier_power(h, q, nu);
  const double w0 = d.omega0, a = w0 * w0 * d.c;
  const cplx j(0, 1);
  const cplx mu1 = 0.0;  // mode 1 is snapped to zero
  for (int l = 1; l < k; ++l)
    if (d.mu[l] == 0.0) throw UncoupledSingularity("phase mode " + std::to_string(l + 1) + " has mu = 0");

  const Eigen::VectorXcd l10 = h.Lambda[0](0);
  // Omega: only its (q,q) entry is needed, U_{1,nu}[q] conj(U_{m,p}[q]) times a scalar.
  cplx omega_qq = 0;
  for (int m = 1; m < k; ++m) {
    for (int p = -opt.p_max; p <= opt.p_max; ++p) {
      const cplx s = detail::dot_conj(l10, h.Lambda[m](nu - p)) / (j * w0 * double(p - nu) - std::conj(d.mu[m]));
      omega_qq += s * h.U[0].at(nu, q) * std::conj(h.U[m].at(p, q));
    }
  }
  const cplx ab = omega_qq / carrier;

  // Theta_{l rho}(q,q) -> Upsilon + j Delta
  std::vector<std::vector<cplx>> ud(k);
  for (int l = 1; l < k; ++l) {
    ud[l].resize(2 * opt.rho_max + 1);
    const cplx ulq = std::conj(h.U[l].at(nu, q));
    for (int rho = -opt.rho_max; rho <= opt.rho_max; ++rho) {
      const Eigen::VectorXcd llr = h.Lambda[l](rho - nu);
      cplx th = detail::dot_conj(l10, llr) / (j * w0 * double(nu - rho) - std::conj(d.mu[l]) - mu1) *
                h.U[0].at(rho, q) * ulq;
      for (int i = 1; i < k; ++i)
        for (int p = -opt.p_max; p <= opt.p_max; ++p)
          th += detail::dot_conj(h.Lambda[l](rho - p), llr) /
                (j * w0 * double(nu - p) - std::conj(d.mu[l]) - d.mu[i]) * h.U[i].at(p, q) * ulq;
      ud[l][rho + opt.rho_max] = th / carrier;
    }
  }

  SpectrumResult r;
  r.method = Method::CoscPmm;
  r.nu = nu;
  r.rho_max = opt.rho_max;
  r.p_max = opt.p_max;
  r.offsets_hz = offsets_hz;
  for (std::size_t i = 0; i < offsets_hz.size(); ++i) {
    const double w = r.omega(i);
    double total = ((1 - ab.real()) * a - 2 * ab.imag() * w) / (0.25 * a * a + w * w), shell = 0;
    for (int rho = -opt.rho_max; rho <= opt.rho_max; ++rho) {
      const double r2 = double(rho) * rho;
      for (int l = 1; l < k; ++l) {
        const double mr = std::abs(d.mu[l].real()), mi = d.mu[l].imag();
        const cplx v = ud[l][rho + opt.rho_max];
        const double den = (mr + 0.5 * a * r2) * (mr + 0.5 * a * r2) + (w + mi) * (w + mi);
        const double t = (v.real() * (2 * mr + a * r2) + 2 * v.imag() * (w + mi)) / den;
        total += t;
        if (std::abs(rho) == opt.rho_max) shell += std::abs(t);
      }
    }
    if (opt.rho_max > 0 && shell > 1e-3 * std::abs(total)) r.truncation_warning = true;
    if (total < 0) ++r.negative_count;
    r.density.push_back(total);
  }
  return r;
}

// Delta_0^(K) = 2 [U_{2,1} Re{L_{2,1}^T conj(L_{2,1})} U_{2,1}^H]_{qq} / |X_1^q|^2 + 5 w0^2 c
inline double kilo_delta0(const FloquetDecomposition& d, const ModeHarmonics& h, std::size_t q, int mode2 = 1) {
  const double carrier = detail::carrier_power(h, q, 1);
  const double lam = detail::dot_conj(h.Lambda.at(mode2)(1), h.Lambda.at(mode2)(1)).real();
  return 2 * std::norm(h.U.at(mode2).at(1, q)) * lam / carrier + 5 * d.omega0 * d.omega0 * d.c;
}

inline SpectrumResult kilo_spectrum(const FloquetDecomposition& d, const ModeHarmonics& h, std::size_t q,
                                    const std::vector<double>& offsets_hz, const SpectrumResult& L_P,
                                    int mode2 = 1) {
  if (L_P.offsets_hz.size() != offsets_hz.size()) throw ConfigError("L_P must be on the same offset grid");
  const double mu2 = detail::real_decaying_mode(d, mode2);
  const double D0 = kilo_delta0(d, h, q, mode2), m2 = mu2 * mu2;
  SpectrumResult r;
  r.method = Method::KIlo;
  r.offsets_hz = offsets_hz;
  for (std::size_t i = 0; i < offsets_hz.size(); ++i) {
    const double w = r.omega(i);
    r.density.push_back((D0 + m2 * L_P.density[i]) / (m2 + w * w));
  }
  return r;
}

struct KurokawaThresholds {
  double dc_ratio = 0.05;
  double offband_ratio = 0.1;
  double drive_ratio = 0.1;
  double weak_diffusion_margin = 100;  // required factor in |mu2| >> 2 w0^2 c
};

struct KurokawaDiagnostics {
  double dc_ratio_lambda1 = 0;
  double offband_ratio_lambda2 = 0;
  double drive_ratio = 0;
  std::vector<int> violations;  // failed conditions: 1 DC in lambda1, 2 off-band lambda2, 3 drive
  bool valid() const { return violations.empty(); }
  std::string verdict() const {
    if (valid()) return "Q-SINUS-VALID";
    std::string s = "VIOLATION(";
    for (std::size_t i = 0; i < violations.size(); ++i) s += (i ? "," : "") + std::to_string(violations[i]);
    return s + ")";
  }
  // c/T0 << -ln(iota2)/(8 pi^2), the weak-diffusion assumption behind the reduced model.
  double weak_diffusion_lhs = 0;
  double weak_diffusion_rhs = 0;
  bool weak_diffusion_holds = false;
};

inline KurokawaDiagnostics kurokawa_diagnostics(const FloquetDecomposition& d, const ModeHarmonics& h,
                                                const KurokawaThresholds& th = {}, int mode2 = 1) {
  KurokawaDiagnostics k;
  const HarmonicSet &L1 = h.Lambda.at(0), &L2 = h.Lambda.at(mode2);
  const double n11 = L1(1).norm();
  k.dc_ratio_lambda1 = n11 > 0 ? L1(0).norm() / n11 : (L1(0).norm() > 0 ? INFINITY : 0.0);
  const Eigen::VectorXd pw = L2.table().cwiseAbs2().rowwise().sum();
  const double total = pw.sum();
  const double fund = L2.max_harmonic() >= 1 ? pw[L2.max_harmonic() + 1] + pw[L2.max_harmonic() - 1] : 0.0;
  k.offband_ratio_lambda2 = total > 0 ? (total - fund) / total : 0.0;
  const double mu2 = std::abs(d.mu[mode2].real());
  const double w0c = d.omega0 * d.omega0 * d.c;
  k.drive_ratio = w0c == 0 ? 0.0 : (mu2 > 0 ? w0c / mu2 : INFINITY);
  if (k.dc_ratio_lambda1 > th.dc_ratio) k.violations.push_back(1);
  if (k.offband_ratio_lambda2 > th.offband_ratio) k.violations.push_back(2);
  if (k.drive_ratio > th.drive_ratio) k.violations.push_back(3);
  k.weak_diffusion_lhs = d.c / d.T0;
  k.weak_diffusion_rhs = -std::log(std::abs(d.iota[mode2])) / (8 * std::numbers::pi * std::numbers::pi);
  k.weak_diffusion_holds = k.weak_diffusion_lhs * th.weak_diffusion_margin <= k.weak_diffusion_rhs;
  return k;
}

}  // namespace ilopn
