#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "circuits.hpp"
#include "error.hpp"
#include "floquet.hpp"
#include "pss.hpp"
#include "sde.hpp"
#include "spectrum.hpp"

namespace ilopn {

using json = nlohmann::json;

struct OffsetGrid {
  double min_hz = 1e3;
  double max_hz = 1e8;
  int per_decade = 60;

  std::vector<double> points() const { return log_grid(min_hz, max_hz, per_decade); }
};

// Parses "min:max:ppd", e.g. "1e3:1e8:10".
inline OffsetGrid parse_offsets(const std::string& s) {
  const auto a = s.find(':'), b = s.find(':', a == std::string::npos ? a : a + 1);
  if (a == std::string::npos || b == std::string::npos) throw ConfigError("offsets must look like min:max:ppd");
  try {
    std::size_t used = 0;
    OffsetGrid g;
    g.min_hz = std::stod(s.substr(0, a));
    g.max_hz = std::stod(s.substr(a + 1, b - a - 1));
    const std::string tail = s.substr(b + 1);
    g.per_decade = std::stoi(tail, &used);
    if (used != tail.size()) throw ConfigError("trailing characters in offsets '" + s + "'");
    if (!(g.min_hz > 0) || !(g.max_hz >= g.min_hz) || g.per_decade < 1)
      throw ConfigError("offsets need 0 < min <= max and ppd >= 1");
    return g;
  } catch (const std::logic_error&) {
    throw ConfigError("cannot parse offsets '" + s + "'");
  }
}

// A pairwise comparison gate; a failed gate maps to exit code 4.
struct CompareCheck {
  Method a = Method::KIlo;
  Method b = Method::IloPmm;
  double fmin_hz = 1e6;
  double fmax_hz = 1e8;
  std::optional<double> max_below_db;  // pass when max deviation < value
  std::optional<double> max_above_db;  // pass when max deviation > value
};

struct RunConfig {
  std::string name = "run";
  std::string circuit = "ilo";  // ilo | osc1 | osc2
  Osc1Params osc1;
  Osc2Params osc2;
  std::array<double, 4> coupling{0.0, 35e-6, 0.0, 0.0};
  std::string coupling_input = "osc1.v";
  std::string coupling_output = "osc2.vd";
  std::string observation;  // state label; empty picks the circuit default
  ShootingOptions shooting;
  int harmonics = 32;  // N_h
  FloquetOptions floquet;
  SpectrumOptions spectrum;
  int nu = 1;
  OffsetGrid offsets;
  std::vector<Method> methods{Method::IloPmm, Method::KIlo, Method::Lorentzian};
  std::vector<CompareCheck> checks;
  KurokawaThresholds kurokawa;
  OracleOptions oracle;
  OffsetGrid oracle_offsets{1e5, 1e7, 10};
  std::string output = "out";

  bool wants(Method m) const { return std::find(methods.begin(), methods.end(), m) != methods.end(); }
};

namespace detail {

// Strict object reader: every key must be consumed before finish().
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where() + "." + key + " has the wrong type");
    }
  }

  void positive(const char* key, double& out) {
    get(key, out);
    if (j_.contains(key) && !(out > 0)) throw ConfigError(where() + "." + key + " must be positive");
  }

  void at_least(const char* key, int& out, int lo) {
    get(key, out);
    if (out < lo) throw ConfigError(where() + "." + key + " must be >= " + std::to_string(lo));
  }

  std::optional<Section> child(const char* key) {
    seen_.insert(key);
    if (!j_.contains(key)) return std::nullopt;
    return Section(j_.at(key), where() + "." + key);
  }

  bool has(const char* key) const { return j_.contains(key); }
  const json& raw(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError("unknown key '" + k + "' in " + where());
  }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline OffsetGrid read_grid(Section s, OffsetGrid g) {
  s.positive("min_hz", g.min_hz);
  s.positive("max_hz", g.max_hz);
  s.at_least("per_decade", g.per_decade, 1);
  s.finish();
  if (g.max_hz < g.min_hz) throw ConfigError("offset grid max_hz is below min_hz");
  return g;
}

inline json grid_json(const OffsetGrid& g) {
  return {{"min_hz", g.min_hz}, {"max_hz", g.max_hz}, {"per_decade", g.per_decade}};
}

}  // namespace detail

// Builds a RunConfig from one (already sweep-resolved) JSON object.
inline RunConfig parse_config(const json& j) {
  RunConfig c;
  detail::Section root(j, "");
  root.get("name", c.name);
  root.get("output", c.output);
  root.get("observation", c.observation);
  if (root.has("sweep")) throw ConfigError("sweep must be expanded before parsing a single run");

  if (auto s = root.child("circuit")) {
    s->get("kind", c.circuit);
    if (c.circuit != "ilo" && c.circuit != "osc1" && c.circuit != "osc2")
      throw ConfigError("circuit.kind must be ilo, osc1 or osc2");
    if (auto o = s->child("osc1")) {
      o->positive("C", c.osc1.C);
      o->get("L", c.osc1.L);
      o->get("G", c.osc1.G);
      o->get("a1", c.osc1.a1);
      o->get("a3", c.osc1.a3);
      o->positive("f0", c.osc1.f0);
      o->finish();
      if (c.osc1.L < 0) throw ConfigError("circuit.osc1.L must be >= 0");
    }
    if (auto o = s->child("osc2")) {
      o->positive("C", c.osc2.C);
      o->positive("L", c.osc2.L);
      o->get("G", c.osc2.G);
      o->positive("W_over_L", c.osc2.W_over_L);
      o->positive("I_tail", c.osc2.I_tail);
      o->positive("C_cg", c.osc2.C_cg);
      o->get("VDD", c.osc2.VDD);
      o->get("Vth0", c.osc2.Vth0);
      o->get("lambda", c.osc2.lambda);
      o->positive("kp", c.osc2.kp);
      o->finish();
    }
    s->finish();
  }

  if (auto s = root.child("coupling")) {
    static const char* keys[] = {"g_c0", "g_c1", "g_c2", "g_c3"};
    for (int k = 0; k < 4; ++k) s->get(keys[k], c.coupling[k]);
    s->get("input", c.coupling_input);
    s->get("output", c.coupling_output);
    s->finish();
  }

  if (auto s = root.child("noise")) {
    s->get("osc1.w", c.osc1.w_rms);
    s->get("osc2.n", c.osc2.n_rms);
    s->finish();
    if (c.osc1.w_rms < 0 || c.osc2.n_rms < 0) throw ConfigError("noise rms values must be >= 0");
  }

  if (auto s = root.child("solver")) {
    s->at_least("samples", c.shooting.samples, 16);
    s->at_least("substeps", c.shooting.substeps, 1);
    s->positive("tol", c.shooting.tol);
    s->at_least("max_iterations", c.shooting.max_iterations, 1);
    s->at_least("ringup_periods", c.shooting.ringup_periods, 0);
    s->at_least("harmonics", c.harmonics, 1);
    s->at_least("rho_max", c.spectrum.rho_max, 0);
    s->at_least("p_max", c.spectrum.p_max, 0);
    s->at_least("retained_modes", c.floquet.retained_modes, 0);
    s->positive("biorth_tol", c.floquet.biorth_tol);
    s->at_least("refinements", c.floquet.refinements, 0);
    s->at_least("modes", c.spectrum.modes, 2);
    s->finish();
    if (2 * c.harmonics >= c.shooting.samples) throw ConfigError("solver.harmonics must be below samples/2");
  }

  if (auto s = root.child("spectrum")) {
    if (auto g = s->child("offsets")) c.offsets = detail::read_grid(*g, c.offsets);
    if (s->has("methods")) {
      const json& m = s->raw("methods");
      if (!m.is_array()) throw ConfigError("spectrum.methods must be an array");
      c.methods.clear();
      for (const auto& e : m) {
        if (!e.is_string()) throw ConfigError("spectrum.methods entries must be strings");
        c.methods.push_back(parse_method(e.get<std::string>()));
      }
    }
    s->at_least("nu", c.nu, 1);
    if (s->has("checks")) {
      const json& arr = s->raw("checks");
      if (!arr.is_array()) throw ConfigError("spectrum.checks must be an array");
      for (std::size_t i = 0; i < arr.size(); ++i) {
        detail::Section e(arr[i], "spectrum.checks[" + std::to_string(i) + "]");
        CompareCheck k;
        std::string a = method_name(k.a), b = method_name(k.b);
        e.get("a", a);
        e.get("b", b);
        k.a = parse_method(a);
        k.b = parse_method(b);
        e.positive("fmin_hz", k.fmin_hz);
        e.positive("fmax_hz", k.fmax_hz);
        double v = 0;
        if (e.has("max_below_db")) {
          e.get("max_below_db", v);
          k.max_below_db = v;
        }
        if (e.has("max_above_db")) {
          e.get("max_above_db", v);
          k.max_above_db = v;
        }
        e.finish();
        c.checks.push_back(k);
      }
    }
    if (auto k = s->child("kurokawa")) {
      k->positive("dc_ratio", c.kurokawa.dc_ratio);
      k->positive("offband_ratio", c.kurokawa.offband_ratio);
      k->positive("drive_ratio", c.kurokawa.drive_ratio);
      k->positive("weak_diffusion_margin", c.kurokawa.weak_diffusion_margin);
      k->finish();
    }
    s->finish();
  }

  if (auto s = root.child("oracle")) {
    s->at_least("steps_per_period", c.oracle.steps_per_period, 200);
    s->at_least("noise_refinement", c.oracle.noise_refinement, 1);
    s->at_least("paths", c.oracle.paths, 1);
    s->get("periods", c.oracle.periods);
    if (c.oracle.periods < 1) throw ConfigError("oracle.periods must be >= 1");
    s->get("seed", c.oracle.seed);
    s->at_least("segment_length", c.oracle.segment_length, 16);
    s->at_least("threads", c.oracle.threads, 0);
    std::string scheme = scheme_name(c.oracle.scheme);
    s->get("scheme", scheme);
    c.oracle.scheme = parse_scheme(scheme);
    if (auto g = s->child("offsets")) c.oracle_offsets = detail::read_grid(*g, c.oracle_offsets);
    s->finish();
  }
  root.finish();

  if (c.circuit != "ilo")
    for (Method m : c.methods)
      if (m != Method::Lorentzian && m != Method::Oracle)
        throw ConfigError("method " + method_name(m) + " needs the coupled 'ilo' circuit");
  for (const auto& k : c.checks)
    if (!c.wants(k.a) || !c.wants(k.b))
      throw ConfigError("check " + method_name(k.a) + " vs " + method_name(k.b) + " uses a method not in the list");
  return c;
}

// Fully resolved configuration; parse_config(to_json(c)) reproduces c.
inline json to_json(const RunConfig& c) {
  json methods = json::array();
  for (Method m : c.methods) methods.push_back(method_name(m));
  json checks = json::array();
  for (const auto& k : c.checks) {
    json e = {{"a", method_name(k.a)}, {"b", method_name(k.b)}, {"fmin_hz", k.fmin_hz}, {"fmax_hz", k.fmax_hz}};
    if (k.max_below_db) e["max_below_db"] = *k.max_below_db;
    if (k.max_above_db) e["max_above_db"] = *k.max_above_db;
    checks.push_back(e);
  }
  return {
      {"name", c.name},
      {"output", c.output},
      {"observation", c.observation},
      {"circuit",
       {{"kind", c.circuit},
        {"osc1", {{"C", c.osc1.C}, {"L", c.osc1.L}, {"G", c.osc1.G}, {"a1", c.osc1.a1}, {"a3", c.osc1.a3},
                  {"f0", c.osc1.f0}}},
        {"osc2", {{"C", c.osc2.C}, {"L", c.osc2.L}, {"G", c.osc2.G}, {"W_over_L", c.osc2.W_over_L},
                  {"I_tail", c.osc2.I_tail}, {"C_cg", c.osc2.C_cg}, {"VDD", c.osc2.VDD}, {"Vth0", c.osc2.Vth0},
                  {"lambda", c.osc2.lambda}, {"kp", c.osc2.kp}}}}},
      {"coupling",
       {{"g_c0", c.coupling[0]}, {"g_c1", c.coupling[1]}, {"g_c2", c.coupling[2]}, {"g_c3", c.coupling[3]},
        {"input", c.coupling_input}, {"output", c.coupling_output}}},
      {"noise", {{"osc1.w", c.osc1.w_rms}, {"osc2.n", c.osc2.n_rms}}},
      {"solver",
       {{"samples", c.shooting.samples}, {"substeps", c.shooting.substeps}, {"tol", c.shooting.tol},
        {"max_iterations", c.shooting.max_iterations}, {"ringup_periods", c.shooting.ringup_periods},
        {"harmonics", c.harmonics}, {"rho_max", c.spectrum.rho_max}, {"p_max", c.spectrum.p_max},
        {"retained_modes", c.floquet.retained_modes}, {"biorth_tol", c.floquet.biorth_tol},
        {"refinements", c.floquet.refinements}, {"modes", c.spectrum.modes}}},
      {"spectrum",
       {{"offsets", detail::grid_json(c.offsets)},
        {"methods", methods},
        {"nu", c.nu},
        {"checks", checks},
        {"kurokawa",
         {{"dc_ratio", c.kurokawa.dc_ratio}, {"offband_ratio", c.kurokawa.offband_ratio},
          {"drive_ratio", c.kurokawa.drive_ratio}, {"weak_diffusion_margin", c.kurokawa.weak_diffusion_margin}}}}},
      {"oracle",
       {{"steps_per_period", c.oracle.steps_per_period}, {"noise_refinement", c.oracle.noise_refinement},
        {"paths", c.oracle.paths}, {"periods", c.oracle.periods}, {"seed", c.oracle.seed},
        {"segment_length", c.oracle.segment_length}, {"threads", c.oracle.threads},
        {"scheme", scheme_name(c.oracle.scheme)}, {"offsets", detail::grid_json(c.oracle_offsets)}}}};
}

struct SweepPoint {
  std::string label;
  json config;
};

// A document is either a single run or {"base": {...}, "sweep": [{"label", "set"}...]}; each
// "set" is a JSON merge patch applied to the base.
inline std::vector<SweepPoint> expand_sweep(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  if (!doc.contains("sweep")) return {{doc.value("name", std::string("run")), doc}};
  detail::Section top(doc, "");
  json base = json::object();
  if (top.has("base")) base = top.raw("base");
  const json& sweep = top.raw("sweep");
  top.finish();
  if (!sweep.is_array() || sweep.empty()) throw ConfigError("sweep must be a non-empty array");
  std::vector<SweepPoint> out;
  std::set<std::string> labels;
  for (std::size_t i = 0; i < sweep.size(); ++i) {
    detail::Section e(sweep[i], "sweep[" + std::to_string(i) + "]");
    std::string label;
    e.get("label", label);
    if (label.empty()) throw ConfigError("sweep[" + std::to_string(i) + "] needs a label");
    if (!labels.insert(label).second) throw ConfigError("duplicate sweep label '" + label + "'");
    json cfg = base;
    if (e.has("set")) cfg.merge_patch(e.raw("set"));
    e.finish();
    cfg["name"] = label;
    out.push_back({label, cfg});
  }
  return out;
}

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
}

}  // namespace ilopn
