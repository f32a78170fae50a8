#pragma once

// Hand-built harmonic data for closed-form checks, no circuit behind it.
#include <ilopn/floquet.hpp>
#include <ilopn/spectrum.hpp>

#include <initializer_list>
#include <map>
#include <numbers>

namespace ilopn::testing {

// Table for one harmonic set: entries keyed by harmonic index, each a row of `width` values.
inline HarmonicSet make_set(int Nh, Eigen::Index width, const std::map<int, Eigen::VectorXcd>& rows) {
  Eigen::MatrixXcd t = Eigen::MatrixXcd::Zero(2 * Nh + 1, width);
  for (const auto& [nu, v] : rows) t.row(nu + Nh) = v.transpose();
  return HarmonicSet(Nh, t);
}

inline Eigen::VectorXcd vec(std::initializer_list<cplx> v) {
  Eigen::VectorXcd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (cplx x : v) out[i++] = x;
  return out;
}

struct SyntheticIlo {
  FloquetDecomposition d;
  ModeHarmonics h;
  std::size_t q = 0;
};

// One observed state, two unit noise sources (P and S).  At eps = 0 every waveform is a pure
// fundamental, lambda_1 has no DC part and lambda_2 no off-band content; eps switches those on.
inline SyntheticIlo quasi_sinusoidal_ilo(double eps, double mu2_over_w0 = 1e-6, double drive = 1e-6,
                                         double s_over_p = 1000) {
  const int Nh = 8;
  const double w0 = 2 * std::numbers::pi * 1e9, mu2 = -mu2_over_w0 * w0;
  const cplx j(0, 1);
  const double la = std::sqrt(0.5 * drive * std::abs(mu2)) / w0;  // w0^2 c = drive |mu2|
  const cplx lb = 0.7 * la * std::polar(1.0, 0.4), ls = s_over_p * la * std::polar(1.0, -0.9);

  SyntheticIlo s;
  s.d.T0 = 2 * std::numbers::pi / w0;
  s.d.omega0 = w0;
  s.d.mu = vec({0.0, mu2});
  s.d.iota = vec({1.0, std::exp(mu2 * s.d.T0)});
  s.h.Nh = Nh;
  s.h.omega0 = w0;
  s.h.X = make_set(Nh, 1, {{1, vec({0.5})}, {-1, vec({0.5})}});
  // u_1 and u_2 are tangent-like at the observed node: U_{i,1} = j w0 X_1.
  const double u = 0.5 * w0;
  s.h.U.push_back(make_set(Nh, 1, {{1, vec({u * j})}, {-1, vec({-u * j})}, {0, vec({eps * u})},
                                   {2, vec({eps * u})}, {-2, vec({eps * u})}}));
  s.h.U.push_back(make_set(Nh, 1, {{1, vec({u * j})}, {-1, vec({-u * j})}, {0, vec({eps * u})},
                                   {2, vec({eps * u * j})}, {-2, vec({-eps * u * j})}}));
  s.h.Lambda.push_back(make_set(Nh, 2, {{1, vec({la * j, 0.0})}, {-1, vec({-la * j, 0.0})},
                                        {0, vec({eps * la, 0.0})}}));
  s.h.Lambda.push_back(make_set(Nh, 2, {{1, vec({lb, ls})}, {-1, vec({std::conj(lb), std::conj(ls)})},
                                        {0, vec({eps * la, eps * ls})},
                                        {2, vec({eps * lb, eps * ls})}, {-2, vec({eps * std::conj(lb), eps * std::conj(ls)})},
                                        {3, vec({eps * lb, 0.0})}, {-3, vec({eps * std::conj(lb), 0.0})}}));
  s.d.c = s.h.Lambda[0].table().cwiseAbs2().sum();
  return s;
}

}  // namespace ilopn::testing
