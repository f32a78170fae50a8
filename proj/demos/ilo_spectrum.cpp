// Reference ILO at a chosen S-OSC noise level: ILO-PMM against the reduced K-ILO model.
//   demo_ilo_spectrum [n_rms A/rtHz] [g_c1 A/V]
#include <ilopn/circuits.hpp>
#include <ilopn/fit.hpp>
#include <ilopn/floquet.hpp>
#include <ilopn/spectrum.hpp>

#include <cstdio>
#include <cstdlib>

int main(int argc, char** argv) {
  using namespace ilopn;
  Osc2Params p2;
  if (argc > 1) p2.n_rms = std::atof(argv[1]);
  const double gc1 = argc > 2 ? std::atof(argv[2]) : 35e-6;

  const IloAssembly ilo = make_reference_ilo(gc1, {}, p2);
  const StateSpaceModel m = ilo.model();
  const PeriodicSteadyState pss = solve_pss(m);
  const FloquetAnalysis fa = analyze_floquet(m, pss);
  const std::size_t q = ilo.observation_node;

  const PeriodicSteadyState pp = solve_pss(ilo.p_osc);
  const FloquetAnalysis pf = analyze_floquet(ilo.p_osc, pp);

  const auto f = log_grid(1e3, 1e8, 2);
  const SpectrumResult lp = free_running_lorentzian(pf.decomp.c, pf.decomp.omega0, f);
  const SpectrumResult pmm = ilo_pmm_spectrum(fa.decomp, fa.harmonics, q, f);
  const SpectrumResult k = kilo_spectrum(fa.decomp, fa.harmonics, q, f, lp);
  const KurokawaDiagnostics diag = kurokawa_diagnostics(fa.decomp, fa.harmonics);

  std::printf("locked at %.6f MHz, mu2 T0 = %.4f, %s\n", 1e-6 / pss.T0, fa.decomp.mu[1].real() * pss.T0,
              diag.verdict().c_str());
  std::printf("%12s %10s %10s %10s\n", "offset Hz", "P free", "ILO-PMM", "K-ILO");
  for (std::size_t i = 0; i < f.size(); ++i)
    std::printf("%12.0f %10.2f %10.2f %10.2f\n", f[i], to_db(lp.density[i]), to_db(pmm.density[i]),
                to_db(k.density[i]));

  const StandardFormFit fit = [&] {
    try {
      return standard_form_fit(pmm, lp);
    } catch (const PoorFit& e) {
      return e.fit();
    }
  }();
  std::printf("standard form: Omega_3dB = %.4e rad/s (|mu2| = %.4e), rms %.3f dB\n", fit.omega_3db,
              std::abs(fa.decomp.mu[1].real()), fit.rms_db);
}
