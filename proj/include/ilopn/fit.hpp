#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "error.hpp"
#include "spectrum.hpp"

namespace ilopn {

// L(w) = (W^2 L_P(w) + N_S) / (w^2 + W^2)
struct StandardFormFit {
  double omega_3db = 0;  // rad/s
  double n_s = 0;        // 1/s, same units as Delta_0^(K)
  double rms_db = 0;     // RMS log residual
};

class PoorFit : public Error {
 public:
  explicit PoorFit(StandardFormFit f)
      : Error("standard form does not describe the spectrum (RMS residual " + std::to_string(f.rms_db) + " dB)"),
        fit_(f) {}
  const StandardFormFit& fit() const { return fit_; }

 private:
  StandardFormFit fit_;
};

namespace detail {

inline double standard_form_rms(const std::vector<double>& w2, const std::vector<double>& lp,
                                const std::vector<double>& db, double lnW, double lnN) {
  const double W2 = std::exp(2 * lnW), N = std::exp(lnN);
  double s = 0;
  for (std::size_t i = 0; i < db.size(); ++i) {
    const double e = to_db((W2 * lp[i] + N) / (w2[i] + W2)) - db[i];
    s += e * e;
  }
  return std::sqrt(s / db.size());
}

}  // namespace detail

// Least squares in dB over log-spaced offsets; coarse grid then Nelder-Mead polish.
inline StandardFormFit standard_form_fit(const SpectrumResult& s, const SpectrumResult& L_P,
                                         double max_rms_db = 3.0) {
  if (s.offsets_hz.size() != L_P.offsets_hz.size() || s.offsets_hz.size() < 4)
    throw ConfigError("standard-form fit needs L_P on the same grid and at least 4 offsets");
  std::vector<double> w2, lp, db;
  double wmin = INFINITY, wmax = 0, nmin = INFINITY, nmax = 0;
  for (std::size_t i = 0; i < s.offsets_hz.size(); ++i) {
    if (!(s.density[i] > 0)) continue;
    const double w = s.omega(i);
    w2.push_back(w * w);
    lp.push_back(L_P.density[i]);
    db.push_back(to_db(s.density[i]));
    wmin = std::min(wmin, w);
    wmax = std::max(wmax, w);
    nmin = std::min(nmin, s.density[i] * w * w);
    nmax = std::max(nmax, s.density[i] * w * w);
  }
  if (db.size() < 4) throw ConfigError("standard-form fit: fewer than 4 positive samples");

  const double lw0 = std::log(wmin / 30), lw1 = std::log(wmax * 30);
  const double ln0 = std::log(nmin * 1e-4), ln1 = std::log(nmax * 1e2);
  const int G = 160;
  double best = INFINITY, bW = 0, bN = 0;
  for (int a = 0; a <= G; ++a)
    for (int b = 0; b <= G; ++b) {
      const double x = lw0 + (lw1 - lw0) * a / G, y = ln0 + (ln1 - ln0) * b / G;
      const double r = detail::standard_form_rms(w2, lp, db, x, y);
      if (r < best) best = r, bW = x, bN = y;
    }

  // Nelder-Mead on (ln W, ln N).
  auto F = [&](const Eigen::Vector2d& p) { return detail::standard_form_rms(w2, lp, db, p[0], p[1]); };
  std::array<Eigen::Vector2d, 3> v{Eigen::Vector2d(bW, bN), Eigen::Vector2d(bW + 0.05, bN),
                                   Eigen::Vector2d(bW, bN + 0.05)};
  std::array<double, 3> fv{F(v[0]), F(v[1]), F(v[2])};
  for (int it = 0; it < 2000; ++it) {
    std::array<int, 3> o{0, 1, 2};
    std::sort(o.begin(), o.end(), [&](int i, int j) { return fv[i] < fv[j]; });
    const Eigen::Vector2d c = 0.5 * (v[o[0]] + v[o[1]]);
    const Eigen::Vector2d xr = c + (c - v[o[2]]);
    const double fr = F(xr);
    if (fr < fv[o[0]]) {
      const Eigen::Vector2d xe = c + 2 * (c - v[o[2]]);
      const double fe = F(xe);
      if (fe < fr) v[o[2]] = xe, fv[o[2]] = fe;
      else v[o[2]] = xr, fv[o[2]] = fr;
    } else if (fr < fv[o[1]]) {
      v[o[2]] = xr, fv[o[2]] = fr;
    } else {
      const Eigen::Vector2d xc = c + 0.5 * (v[o[2]] - c);
      const double fc = F(xc);
      if (fc < fv[o[2]]) {
        v[o[2]] = xc, fv[o[2]] = fc;
      } else {
        for (int i : {o[1], o[2]}) v[i] = v[o[0]] + 0.5 * (v[i] - v[o[0]]), fv[i] = F(v[i]);
      }
    }
    if ((v[0] - v[1]).norm() + (v[0] - v[2]).norm() < 1e-12) break;
  }
  const int ib = static_cast<int>(std::min_element(fv.begin(), fv.end()) - fv.begin());
  StandardFormFit out{std::exp(v[ib][0]), std::exp(v[ib][1]), fv[ib]};
  if (out.rms_db > max_rms_db) throw PoorFit(out);
  return out;
}

}  // namespace ilopn
