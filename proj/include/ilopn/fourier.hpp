#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include "error.hpp"
#include "pss.hpp"

namespace ilopn {

using cplx = std::complex<double>;

// Fourier coefficients for nu in [-Nh, Nh], each a vector of `width` components.
// Access outside the stored range yields zero (that is the truncation).
class HarmonicSet {
 public:
  HarmonicSet() = default;
  HarmonicSet(int Nh, Eigen::MatrixXcd coeffs) : nh_(Nh), c_(std::move(coeffs)) {
    if (c_.rows() != 2 * Nh + 1) throw IndexError("harmonic table has wrong row count");
  }

  int max_harmonic() const { return nh_; }
  Eigen::Index width() const { return c_.cols(); }
  const Eigen::MatrixXcd& table() const { return c_; }

  cplx at(int nu, Eigen::Index comp) const {
    return (nu < -nh_ || nu > nh_) ? cplx{} : c_(nu + nh_, comp);
  }
  Eigen::VectorXcd operator()(int nu) const {
    if (nu < -nh_ || nu > nh_) return Eigen::VectorXcd::Zero(c_.cols());
    return c_.row(nu + nh_).transpose();
  }

  // Sum over harmonics of |coeff|^2 per component.
  Eigen::VectorXd power() const { return c_.cwiseAbs2().colwise().sum().transpose(); }

 private:
  int nh_ = 0;
  Eigen::MatrixXcd c_;
};

// Coefficients of one period sampled on N uniform points (no repeated endpoint):
// coeff(nu) = (1/N) sum_k x_k exp(-j nu 2 pi k / N), so x(t) = sum_nu coeff(nu) exp(j nu w0 t).
template <typename Derived>
HarmonicSet harmonics_of(const Eigen::MatrixBase<Derived>& samples, int Nh, bool guard = true,
                         const char* what = "waveform") {
  const Eigen::Index N = samples.rows(), m = samples.cols();
  if (Nh < 0 || Nh > N / 2 - 1)
    throw ConfigError("harmonic count " + std::to_string(Nh) + " needs at least " + std::to_string(2 * Nh + 2) +
                      " samples per period");
  std::vector<cplx> tw(N);
  for (Eigen::Index k = 0; k < N; ++k) tw[k] = std::polar(1.0, -2 * std::numbers::pi * double(k) / double(N));

  Eigen::MatrixXcd c = Eigen::MatrixXcd::Zero(2 * Nh + 1, m);
  for (int nu = -Nh; nu <= Nh; ++nu) {
    const Eigen::Index step = ((nu % N) + N) % N;
    for (Eigen::Index col = 0; col < m; ++col) {
      cplx acc{};
      Eigen::Index idx = 0;
      for (Eigen::Index k = 0; k < N; ++k) {
        acc += cplx(samples(k, col)) * tw[idx];
        idx += step;
        if (idx >= N) idx -= N;
      }
      c(nu + Nh, col) = acc / double(N);
    }
  }

  if (guard && Nh >= 1) {
    std::vector<double> ac(m, 0.0);
    double ac_max = 0;
    for (Eigen::Index col = 0; col < m; ++col) {
      for (int nu = 1; nu <= Nh; ++nu) ac[col] += std::norm(c(Nh + nu, col)) + std::norm(c(Nh - nu, col));
      ac_max = std::max(ac_max, ac[col]);
    }
    for (Eigen::Index col = 0; col < m; ++col) {
      if (ac[col] <= 1e-16 * ac_max || ac[col] == 0) continue;  // roundoff-only column
      const double top = (std::norm(c(2 * Nh, col)) + std::norm(c(0, col))) / ac[col];
      if (top > 1e-4)
        throw UnderResolved(std::string(what) + ": component " + std::to_string(col) + " keeps " +
                            std::to_string(top) + " of its AC energy in harmonic " + std::to_string(Nh));
    }
  }
  return HarmonicSet(Nh, std::move(c));
}

inline HarmonicSet fourier_harmonics(const PeriodicSteadyState& pss, int Nh) {
  return harmonics_of(pss.samples.topRows(pss.n_samples()), Nh, true, "PSS");
}

}  // namespace ilopn
