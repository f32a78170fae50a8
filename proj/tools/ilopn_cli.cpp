// Command-line front end: ilopn <pss|floquet|spectrum|oracle|run|scenarios> [options]
#include <CLI11.hpp>

#include <ilopn/pipeline.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>

namespace {

using namespace ilopn;

enum Exit { kOk = 0, kUnexpected = 1, kConfig = 2, kSolver = 3, kThreshold = 4 };

struct Common {
  std::string config, scenario, out, methods, offsets;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

std::vector<Method> parse_methods(const std::string& list) {
  std::vector<Method> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(parse_method(item));
  if (out.empty()) throw ConfigError("--methods is empty");
  return out;
}

std::vector<RunConfig> load_runs(const Common& o) {
  if (o.config.empty() == o.scenario.empty()) throw ConfigError("give exactly one of --config or --scenario");
  const json doc = o.config.empty() ? scenario_config(o.scenario) : load_json_file(o.config);
  const auto points = expand_sweep(doc);
  std::vector<RunConfig> runs;
  for (const auto& p : points) {
    RunConfig c = parse_config(p.config);
    if (!o.out.empty()) c.output = points.size() > 1 ? (std::filesystem::path(o.out) / p.label).string() : o.out;
    else if (points.size() > 1) c.output = (std::filesystem::path(c.output) / p.label).string();
    if (o.seed_set) c.oracle.seed = o.seed;
    if (!o.offsets.empty()) c.offsets = parse_offsets(o.offsets);
    if (!o.methods.empty()) {
      c.methods = parse_methods(o.methods);
      std::erase_if(c.checks, [&](const CompareCheck& k) { return !c.wants(k.a) || !c.wants(k.b); });
    }
    runs.push_back(parse_config(to_json(c)));  // re-validate after overrides
  }
  return runs;
}

void add_common(CLI::App* sub, Common& o) {
  sub->add_option("--config", o.config, "JSON run configuration");
  sub->add_option("--scenario", o.scenario, "bundled scenario name (see 'scenarios')");
  sub->add_option("--out", o.out, "output directory");
  sub->add_option("--seed", o.seed, "oracle RNG seed")->each([&o](const std::string&) { o.seed_set = true; });
  sub->add_option("--methods", o.methods, "comma list: cosc-pmm,ilo-pmm,k-ilo,lorentzian,oracle");
  sub->add_option("--offsets", o.offsets, "offset grid min:max:ppd in Hz");
}

int run_pss(const Common& o) {
  for (const RunConfig& c : load_runs(o)) {
    const BuiltCircuit bc = build_circuit(c);
    const PeriodicSteadyState p = solve_pss(bc.model, c.shooting);
    std::filesystem::create_directories(c.output);
    std::ofstream csv(std::filesystem::path(c.output) / "pss.csv");
    csv << "t_s";
    for (const auto& l : bc.model.state_labels()) csv << "," << l;
    csv << "\n";
    for (int k = 0; k <= p.n_samples(); ++k) {
      csv << detail::fmt(p.time(k));
      for (Eigen::Index i = 0; i < p.samples.cols(); ++i) csv << "," << detail::fmt(p.samples(k, i));
      csv << "\n";
    }
    std::cout << json{{"name", c.name}, {"T0_s", p.T0}, {"f0_hz", 1 / p.T0}, {"residual", p.residual},
                      {"iterations", p.iterations}}.dump()
              << "\n";
  }
  return kOk;
}

enum class Stage { Floquet, Spectrum, Oracle, Full };

int run_pipeline(const Common& o, Stage stage) {
  bool all_passed = true;
  for (RunConfig c : load_runs(o)) {
    if (stage == Stage::Floquet) {
      c.methods.clear();
      c.checks.clear();
    } else if (stage == Stage::Spectrum) {
      std::erase(c.methods, Method::Oracle);
      std::erase_if(c.checks, [](const CompareCheck& k) { return k.a == Method::Oracle || k.b == Method::Oracle; });
    } else if (stage == Stage::Oracle) {
      c.methods = {Method::Oracle};
      c.checks.clear();
    }
    const ScenarioResult r = run_scenario(c);
    for (const auto& w : r.warnings) std::cerr << "[" << c.name << "] warning: " << w << "\n";
    std::cout << json{{"name", c.name}, {"output", c.output}, {"checks_passed", r.checks_passed}}.dump() << "\n";
    all_passed = all_passed && r.checks_passed;
  }
  return all_passed ? kOk : kThreshold;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Phase-noise analysis of injection-locked oscillators"};
  app.require_subcommand(1);
  Common o;
  CLI::App* pss = app.add_subcommand("pss", "periodic steady state only");
  CLI::App* flq = app.add_subcommand("floquet", "PSS and Floquet decomposition");
  CLI::App* spc = app.add_subcommand("spectrum", "analytic spectra and comparisons");
  CLI::App* orc = app.add_subcommand("oracle", "Monte-Carlo SDE spectrum");
  CLI::App* run = app.add_subcommand("run", "full pipeline");
  CLI::App* lst = app.add_subcommand("scenarios", "list bundled scenarios");
  std::string print;
  lst->add_option("--print", print, "dump the named scenario's config JSON");
  for (CLI::App* s : {pss, flq, spc, orc, run}) add_common(s, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (lst->parsed()) {
      if (!print.empty()) {
        std::cout << scenario_config(print).dump(2) << "\n";
        return kOk;
      }
      for (const auto& n : scenario_names()) std::cout << n << "\t" << scenario_description(n) << "\n";
      return kOk;
    }
    if (pss->parsed()) return run_pss(o);
    if (flq->parsed()) return run_pipeline(o, Stage::Floquet);
    if (spc->parsed()) return run_pipeline(o, Stage::Spectrum);
    if (orc->parsed()) return run_pipeline(o, Stage::Oracle);
    return run_pipeline(o, Stage::Full);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const IndexError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const SolverError& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kSolver;
  } catch (const NonFiniteState& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kSolver;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUnexpected;
  }
}
