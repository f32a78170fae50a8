// Small Monte-Carlo run on the reference ILO next to ILO-PMM.  Arguments: [paths] [periods].
#include <ilopn/circuits.hpp>
#include <ilopn/floquet.hpp>
#include <ilopn/sde.hpp>
#include <ilopn/spectrum.hpp>

#include <cstdio>
#include <cstdlib>

int main(int argc, char** argv) {
  using namespace ilopn;
  const IloAssembly ilo = make_reference_ilo();
  const StateSpaceModel m = ilo.model();
  const PeriodicSteadyState pss = solve_pss(m);
  const FloquetAnalysis fa = analyze_floquet(m, pss);

  OracleOptions o;
  o.paths = argc > 1 ? std::atoi(argv[1]) : 4;
  o.periods = argc > 2 ? std::atol(argv[2]) : 40000;
  o.steps_per_period = 200;
  o.segment_length = 16384;
  o.observation = ilo.observation_node;
  o.progress = [](int done, int total) { std::fprintf(stderr, "path %d/%d\n", done, total); };

  const auto f = log_grid(2e5, 1e7, 4);
  const SpectrumResult est = estimate_psd(simulate_paths(m, pss, o), f);
  const SpectrumResult pmm = ilo_pmm_spectrum(fa.decomp, fa.harmonics, ilo.observation_node, f);
  std::printf("%12s %10s %10s %8s\n", "offset Hz", "ILO-PMM", "oracle", "+-dB");
  for (std::size_t i = 0; i < f.size(); ++i)
    std::printf("%12.0f %10.2f %10.2f %8.2f\n", f[i], to_db(pmm.density[i]), to_db(est.density[i]),
                est.std_error_db[i]);
}
