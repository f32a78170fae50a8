#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "circuits.hpp"
#include "config.hpp"
#include "fit.hpp"
#include "floquet.hpp"
#include "pss.hpp"
#include "sde.hpp"
#include "spectrum.hpp"

namespace ilopn {

struct BuiltCircuit {
  StateSpaceModel model;
  std::optional<StateSpaceModel> p_osc;  // standalone primary, ILO only
  std::size_t observation = 0;
};

inline BuiltCircuit build_circuit(const RunConfig& c) {
  if (c.circuit == "osc1") {
    StateSpaceModel m = make_osc1(c.osc1);
    return {m, std::nullopt, m.state_index(c.observation.empty() ? "osc1.v" : c.observation)};
  }
  if (c.circuit == "osc2") {
    StateSpaceModel m = make_osc2(c.osc2);
    return {m, std::nullopt, m.state_index(c.observation.empty() ? "osc2.vd" : c.observation)};
  }
  StateSpaceModel p = make_osc1(c.osc1), s = make_osc2(c.osc2);
  BufferCoupling cp;
  cp.g = c.coupling;
  cp.input_node = p.state_index(c.coupling_input);
  cp.output_node = s.state_index(c.coupling_output);
  const StateSpaceModel probe = assemble_ilo(p, s, cp, 0);
  const std::size_t q = probe.state_index(c.observation.empty() ? "osc2.vd" : c.observation);
  return {assemble_ilo(p, s, cp, q), p, q};
}

// Everything computed for one run, kept in memory for callers and tests.
struct ScenarioResult {
  RunConfig config;
  PeriodicSteadyState pss;
  FloquetAnalysis floquet;
  std::optional<KurokawaDiagnostics> kurokawa;
  std::optional<StandardFormFit> fit;
  bool fit_poor = false;
  std::map<Method, SpectrumResult> spectra;
  json compare;
  bool checks_passed = true;
  std::vector<std::string> warnings;
};

namespace detail {

inline void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p);
  if (!out) throw ConfigError("cannot write '" + p.string() + "'");
  out << s;
}

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline json complex_list(const Eigen::VectorXcd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back({v[i].real(), v[i].imag()});
  return a;
}

inline std::string spectrum_csv(const SpectrumResult& s) {
  const bool se = !s.std_error_db.empty();
  std::string out = "offset_hz,omega_rad_s,density_per_hz,dbc_per_hz";
  out += se ? ",std_error_db\n" : "\n";
  for (std::size_t i = 0; i < s.offsets_hz.size(); ++i) {
    out += fmt(s.offsets_hz[i]) + "," + fmt(s.omega(i)) + "," + fmt(s.density[i]) + "," + fmt(to_db(s.density[i]));
    out += se ? "," + fmt(s.std_error_db[i]) + "\n" : "\n";
  }
  return out;
}

}  // namespace detail

class ScenarioRunner {
 public:
  explicit ScenarioRunner(RunConfig c, std::ostream* log = &std::cerr) : cfg_(std::move(c)), log_(log) {}

  // Computes everything; writes artifacts when `write` is set.
  ScenarioResult run(bool write = true) {
    ScenarioResult r;
    r.config = cfg_;
    const BuiltCircuit bc = build_circuit(cfg_);
    const std::size_t q = bc.observation;
    note("pss");
    r.pss = solve_pss(bc.model, cfg_.shooting);
    note("floquet");
    r.floquet = analyze_floquet(bc.model, r.pss, cfg_.harmonics, cfg_.floquet);
    const FloquetDecomposition& d = r.floquet.decomp;
    const ModeHarmonics& h = r.floquet.harmonics;
    const bool ilo = bc.p_osc.has_value();

    // Free-running reference: the primary alone for an ILO, the circuit itself otherwise.
    double c_ref = d.c, w_ref = d.omega0;
    if (ilo) {
      note("primary reference");
      const PeriodicSteadyState pp = solve_pss(*bc.p_osc, cfg_.shooting);
      const FloquetAnalysis pf = analyze_floquet(*bc.p_osc, pp, cfg_.harmonics, cfg_.floquet);
      c_ref = pf.decomp.c;
      w_ref = pf.decomp.omega0;
    }

    auto analytic = [&](Method m, const std::vector<double>& f) -> SpectrumResult {
      const SpectrumResult lp = free_running_lorentzian(c_ref, w_ref, f);
      switch (m) {
        case Method::Lorentzian:
          return lp;
        case Method::IloPmm:
          return ilo_pmm_spectrum(d, h, q, f, cfg_.spectrum);
        case Method::CoscPmm:
          return cosc_pmm_spectrum(d, h, q, cfg_.nu, f, cfg_.spectrum);
        case Method::KIlo:
          return kilo_spectrum(d, h, q, f, lp, cfg_.spectrum.mode2);
        case Method::Oracle:
          break;
      }
      throw ConfigError("not an analytic method");
    };

    const std::vector<double> grid = cfg_.offsets.points();
    for (Method m : cfg_.methods) {
      if (m == Method::Oracle) continue;
      note(method_name(m));
      SpectrumResult s = analytic(m, grid);
      if (s.truncation_warning) r.warnings.push_back(method_name(m) + ": truncation tail above tolerance");
      if (s.negative_count) r.warnings.push_back(method_name(m) + ": negative density at some offsets");
      r.spectra[m] = std::move(s);
    }

    if (ilo) {
      r.kurokawa = kurokawa_diagnostics(d, h, cfg_.kurokawa, cfg_.spectrum.mode2);
      const SpectrumResult pmm = r.spectra.count(Method::IloPmm) ? r.spectra.at(Method::IloPmm)
                                                                  : analytic(Method::IloPmm, grid);
      try {
        r.fit = standard_form_fit(pmm, free_running_lorentzian(c_ref, w_ref, grid));
      } catch (const PoorFit& e) {
        r.fit = e.fit();
        r.fit_poor = true;
      }
    }

    std::optional<SpectrumResult> oracle;
    const std::vector<double> ogrid = cfg_.oracle_offsets.points();
    if (cfg_.wants(Method::Oracle)) {
      note("oracle");
      OracleOptions o = cfg_.oracle;
      o.observation = q;
      std::ostream* lg = log_;
      if (lg && !o.progress)
        o.progress = [lg](int done, int total) { *lg << "  oracle paths " << done << "/" << total << "\n"; };
      const EnsembleRun run = simulate_paths(bc.model, r.pss, o);
      if (run.diverged) r.warnings.push_back("oracle: " + std::to_string(run.diverged) + " diverged paths dropped");
      oracle = estimate_psd(run, ogrid);
      r.spectra[Method::Oracle] = *oracle;
    }

    // Pairwise deviations; anything involving the oracle is compared on the oracle grid.
    r.compare = {{"pairs", json::array()}, {"checks", json::array()}};
    auto pair_dev = [&](Method a, Method b, double lo, double hi) {
      if (a == Method::Oracle || b == Method::Oracle) {
        const Method other = a == Method::Oracle ? b : a;
        const SpectrumResult x = other == Method::Oracle ? *oracle : analytic(other, ogrid);
        return compare_spectra(*oracle, x, lo, hi);
      }
      return compare_spectra(r.spectra.at(a), r.spectra.at(b), lo, hi);
    };
    for (std::size_t i = 0; i < cfg_.methods.size(); ++i)
      for (std::size_t j = i + 1; j < cfg_.methods.size(); ++j) {
        const Method a = cfg_.methods[i], b = cfg_.methods[j];
        const bool orc = a == Method::Oracle || b == Method::Oracle;
        const OffsetGrid& g = orc ? cfg_.oracle_offsets : cfg_.offsets;
        const Deviation dv = pair_dev(a, b, g.min_hz, g.max_hz);
        r.compare["pairs"].push_back({{"a", method_name(a)}, {"b", method_name(b)}, {"fmin_hz", g.min_hz},
                                     {"fmax_hz", g.max_hz}, {"max_db", dv.max_db}, {"mean_db", dv.mean_db},
                                     {"at_hz", dv.at_hz}, {"points", dv.points}});
      }
    for (const CompareCheck& k : cfg_.checks) {
      const Deviation dv = pair_dev(k.a, k.b, k.fmin_hz, k.fmax_hz);
      bool pass = dv.points > 0;
      if (k.max_below_db) pass = pass && dv.max_db < *k.max_below_db;
      if (k.max_above_db) pass = pass && dv.max_db > *k.max_above_db;
      json e = {{"a", method_name(k.a)}, {"b", method_name(k.b)}, {"fmin_hz", k.fmin_hz}, {"fmax_hz", k.fmax_hz},
                {"max_db", dv.max_db}, {"at_hz", dv.at_hz}, {"pass", pass}};
      if (k.max_below_db) e["max_below_db"] = *k.max_below_db;
      if (k.max_above_db) e["max_above_db"] = *k.max_above_db;
      r.compare["checks"].push_back(e);
      r.checks_passed = r.checks_passed && pass;
    }
    r.compare["passed"] = r.checks_passed;

    if (write) write_artifacts(r, bc);
    return r;
  }

 private:
  void note(const std::string& what) const {
    if (log_) *log_ << "[" << cfg_.name << "] " << what << "\n";
  }

  void write_artifacts(const ScenarioResult& r, const BuiltCircuit& bc) const {
    namespace fs = std::filesystem;
    const fs::path dir(cfg_.output);
    fs::create_directories(dir);
    const auto& labels = bc.model.state_labels();
    const auto& nl = bc.model.noise_labels();

    std::string pss = "t_s";
    for (const auto& l : labels) pss += "," + l;
    pss += "\n";
    for (int k = 0; k <= r.pss.n_samples(); ++k) {
      pss += detail::fmt(r.pss.time(k));
      for (Eigen::Index i = 0; i < r.pss.samples.cols(); ++i) pss += "," + detail::fmt(r.pss.samples(k, i));
      pss += "\n";
    }
    detail::write_text(dir / "pss.csv", pss);

    const FloquetDecomposition& d = r.floquet.decomp;
    std::string lam = "t_s";
    for (int i = 0; i < d.modes(); ++i)
      for (const auto& l : nl) lam += ",re_lambda" + std::to_string(i + 1) + "_" + l + ",im_lambda" +
                                      std::to_string(i + 1) + "_" + l;
    lam += "\n";
    for (int k = 0; k < d.n_samples(); ++k) {
      lam += detail::fmt(r.pss.time(k));
      for (int i = 0; i < d.modes(); ++i)
        for (Eigen::Index j = 0; j < d.lambda[i].cols(); ++j)
          lam += "," + detail::fmt(d.lambda[i](k, j).real()) + "," + detail::fmt(d.lambda[i](k, j).imag());
      lam += "\n";
    }
    detail::write_text(dir / "lambda.csv", lam);

    json fj = {{"T0_s", d.T0},
               {"f0_hz", 1 / d.T0},
               {"omega0_rad_s", d.omega0},
               {"mu_per_s", detail::complex_list(d.mu)},
               {"iota", detail::complex_list(d.iota)},
               {"c_s", d.c},
               {"omega0_sq_c_rad2_per_s", d.omega0 * d.omega0 * d.c},
               {"pss_residual", r.pss.residual},
               {"pss_iterations", r.pss.iterations},
               {"biorth_error", d.biorth_error},
               {"tangent_error", d.tangent_error},
               {"substeps", d.substeps},
               {"observation", labels[bc.observation]},
               {"warnings", r.warnings}};
    if (r.kurokawa) {
      const auto& k = *r.kurokawa;
      fj["kurokawa"] = {{"verdict", k.verdict()},
                        {"dc_ratio_lambda1", k.dc_ratio_lambda1},
                        {"offband_ratio_lambda2", k.offband_ratio_lambda2},
                        {"drive_ratio", k.drive_ratio},
                        {"violations", k.violations},
                        {"weak_diffusion_lhs", k.weak_diffusion_lhs},
                        {"weak_diffusion_rhs", k.weak_diffusion_rhs},
                        {"weak_diffusion_holds", k.weak_diffusion_holds}};
    }
    if (r.fit)
      fj["standard_form_fit"] = {{"omega_3db_rad_s", r.fit->omega_3db},
                                 {"n_s_per_s", r.fit->n_s},
                                 {"rms_db", r.fit->rms_db},
                                 {"poor_fit", r.fit_poor}};
    detail::write_text(dir / "floquet.json", fj.dump(2) + "\n");

    for (const auto& [m, s] : r.spectra) detail::write_text(dir / ("spectrum_" + method_name(m) + ".csv"),
                                                            detail::spectrum_csv(s));
    detail::write_text(dir / "compare.json", r.compare.dump(2) + "\n");
    detail::write_text(dir / "manifest.json", to_json(cfg_).dump(2) + "\n");
  }

  RunConfig cfg_;
  std::ostream* log_;
};

inline ScenarioResult run_scenario(const RunConfig& c, bool write = true, std::ostream* log = &std::cerr) {
  return ScenarioRunner(c, log).run(write);
}

// Bundled scenarios reproducing the figure experiments.
inline std::vector<std::string> scenario_names() { return {"fig4", "fig5", "fig6", "osc1"}; }

inline std::string scenario_description(const std::string& name) {
  if (name == "fig4") return "ILO-PMM with oracle overlays: C_r in {0.3035, 0.295} pF at g_c1 35 uA/V, g_c1 in {40, 60} uA/V";
  if (name == "fig5") return "S-OSC tail noise 70.7 pA/rtHz: K-ILO departs from ILO-PMM at high offsets";
  if (name == "fig6") return "S-OSC tail noise 70.7 fA/rtHz: K-ILO and ILO-PMM agree";
  if (name == "osc1") return "free-running OSC1 against its Lorentzian and the oracle";
  throw ConfigError("unknown scenario '" + name + "'");
}

inline json scenario_config(const std::string& name) {
  if (name == "fig4") {
    Osc1Params p1;
    const double L1 = p1.inductance();  // tank inductance held while C_r moves
    json base = {{"circuit", {{"kind", "ilo"}, {"osc1", {{"L", L1}}}}},
                 {"spectrum",
                  {{"methods", {"ilo-pmm", "oracle"}},
                   {"checks", {{{"a", "oracle"}, {"b", "ilo-pmm"}, {"fmin_hz", 1e5}, {"fmax_hz", 1e7},
                                {"max_below_db", 2.0}}}}}},
                 {"oracle", {{"paths", 64}, {"periods", 100000}, {"steps_per_period", 200}}}};
    auto point = [](double C, double g) {
      return json{{"circuit", {{"osc1", {{"C", C}}}}}, {"coupling", {{"g_c1", g}}}};
    };
    return {{"base", base},
            {"sweep",
             {{{"label", "fig4_pset1_cr0.3035pF"}, {"set", point(0.3035e-12, 35e-6)}},
              {{"label", "fig4_pset1_cr0.295pF"}, {"set", point(0.295e-12, 35e-6)}},
              {{"label", "fig4_pset2_gc40uAV"}, {"set", point(0.3035e-12, 40e-6)}},
              {{"label", "fig4_pset2_gc60uAV"}, {"set", point(0.3035e-12, 60e-6)}}}}};
  }
  if (name == "fig5" || name == "fig6") {
    const bool strong = name == "fig5";
    json check = {{"a", "k-ilo"}, {"b", "ilo-pmm"}};
    if (strong) {
      check["fmin_hz"] = 1e6;
      check["fmax_hz"] = 1e8;
      check["max_above_db"] = 3.0;
    } else {
      check["fmin_hz"] = 1e4;
      check["fmax_hz"] = 1e7;
      check["max_below_db"] = 1.0;
    }
    return {{"name", name},
            {"circuit", {{"kind", "ilo"}}},
            {"noise", {{"osc2.n", strong ? 70.7e-12 : 70.7e-15}}},
            {"spectrum", {{"methods", {"ilo-pmm", "k-ilo", "lorentzian", "cosc-pmm"}}, {"checks", {check}}}}};
  }
  if (name == "osc1")
    return {{"name", name},
            {"circuit", {{"kind", "osc1"}}},
            {"spectrum",
             {{"methods", {"lorentzian", "oracle"}},
              {"checks", {{{"a", "oracle"}, {"b", "lorentzian"}, {"fmin_hz", 1e5}, {"fmax_hz", 1e7},
                           {"max_below_db", 2.0}}}}}},
            {"oracle", {{"paths", 16}, {"periods", 70000}, {"steps_per_period", 200}}}};
  throw ConfigError("unknown scenario '" + name + "'");
}

}  // namespace ilopn
