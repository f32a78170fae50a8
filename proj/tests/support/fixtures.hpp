#pragma once

// Reference computations shared by the test programs, computed once per process.
#include <ilopn/circuits.hpp>
#include <ilopn/floquet.hpp>
#include <ilopn/pss.hpp>

namespace ilopn::testing {

struct Analysed {
  StateSpaceModel model;
  PeriodicSteadyState pss;
  FloquetAnalysis floquet;
  std::size_t q = 0;
};

inline Analysed analyse(const StateSpaceModel& m, std::size_t q, int Nh = 32) {
  Analysed a{m, solve_pss(m), {}, q};
  a.floquet = analyze_floquet(m, a.pss, Nh);
  return a;
}

inline const Analysed& osc1_fixture() {
  static const Analysed a = analyse(make_osc1(), 0);
  return a;
}

inline const Analysed& osc2_fixture() {
  static const Analysed a = analyse(make_osc2(), 0);
  return a;
}

inline const IloAssembly& ilo_assembly() {
  static const IloAssembly a = make_reference_ilo();
  return a;
}

inline const Analysed& ilo_fixture() {
  static const Analysed a = analyse(ilo_assembly().model(), ilo_assembly().observation_node);
  return a;
}

}  // namespace ilopn::testing

namespace ilopn::testing {

// OSC2 with its tank inductance tuned so the free-running period equals OSC1's.
inline Osc2Params zero_detuned_osc2(Osc2Params p2 = {}, const Osc1Params& p1 = {}) {
  const double TP = solve_pss(make_osc1(p1)).T0;
  for (int it = 0; it < 20; ++it) {
    const double T = solve_pss(make_osc2(p2)).T0;
    if (std::abs(T / TP - 1) < 1e-12) break;
    p2.L *= (TP / T) * (TP / T);
  }
  return p2;
}

}  // namespace ilopn::testing
