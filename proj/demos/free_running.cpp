// Free-running OSC1: limit cycle, Floquet exponents, diffusion constant and Lorentzian.
#include <ilopn/circuits.hpp>
#include <ilopn/floquet.hpp>
#include <ilopn/spectrum.hpp>

#include <cstdio>

int main() {
  using namespace ilopn;
  const StateSpaceModel osc = make_osc1();
  const PeriodicSteadyState pss = solve_pss(osc);
  const FloquetAnalysis fa = analyze_floquet(osc, pss);
  const FloquetDecomposition& d = fa.decomp;

  std::printf("f0 = %.6f MHz after %d Newton steps (residual %.2e)\n", 1e-6 / pss.T0, pss.iterations, pss.residual);
  for (int i = 0; i < d.modes(); ++i)
    std::printf("mu%d T0 = %+.6e %+.6ej\n", i + 1, d.mu[i].real() * d.T0, d.mu[i].imag() * d.T0);
  std::printf("c = %.4e s, linewidth 0.5 w0^2 c = %.4g rad/s\n", d.c, 0.5 * d.omega0 * d.omega0 * d.c);

  const auto f = log_grid(1e3, 1e8, 1);
  const SpectrumResult L = free_running_lorentzian(d.c, d.omega0, f);
  for (std::size_t i = 0; i < f.size(); ++i) std::printf("%10.0f Hz  %8.2f dBc/Hz\n", f[i], to_db(L.density[i]));
}
