#include <gtest/gtest.h>

#include <ilopn/pipeline.hpp>

using namespace ilopn;

TEST(Config, DefaultsFromEmptyObject) {
  const RunConfig c = parse_config(json::object());
  EXPECT_EQ(c.circuit, "ilo");
  EXPECT_EQ(c.coupling[1], 35e-6);
  EXPECT_EQ(c.offsets.per_decade, 60);
  EXPECT_EQ(c.offsets.points().size(), 301u);
  EXPECT_TRUE(c.wants(Method::IloPmm));
  EXPECT_FALSE(c.wants(Method::Oracle));
}

TEST(Config, UnknownKeysRejected) {
  EXPECT_THROW(parse_config(json{{"nmae", "x"}}), ConfigError);
  EXPECT_THROW(parse_config(json{{"circuit", {{"osc1", {{"Cap", 1e-12}}}}}}), ConfigError);
  EXPECT_THROW(parse_config(json{{"oracle", {{"path", 3}}}}), ConfigError);
}

TEST(Config, TypeAndRangeErrors) {
  EXPECT_THROW(parse_config(json{{"circuit", {{"kind", "ring"}}}}), ConfigError);
  EXPECT_THROW(parse_config(json{{"circuit", {{"osc1", {{"C", -1.0}}}}}}), ConfigError);
  EXPECT_THROW(parse_config(json{{"circuit", {{"osc2", {{"L", "big"}}}}}}), ConfigError);
  EXPECT_THROW(parse_config(json{{"oracle", {{"steps_per_period", 100}}}}), ConfigError);
  EXPECT_THROW(parse_config(json{{"oracle", {{"scheme", "heun"}}}}), ConfigError);
  EXPECT_THROW(parse_config(json{{"noise", {{"osc1.w", -1.0}}}}), ConfigError);
  EXPECT_THROW(parse_config(json{{"solver", {{"samples", 64}, {"harmonics", 32}}}}), ConfigError);
  EXPECT_THROW(parse_config(json{{"spectrum", {{"methods", {"magic"}}}}}), ConfigError);
  EXPECT_THROW(parse_config(json{{"spectrum", {{"offsets", {{"min_hz", 1e6}, {"max_hz", 1e3}}}}}}), ConfigError);
}

TEST(Config, MethodCircuitConsistency) {
  EXPECT_THROW(parse_config(json{{"circuit", {{"kind", "osc1"}}}}), ConfigError);  // default methods need an ILO
  EXPECT_NO_THROW(parse_config(json{{"circuit", {{"kind", "osc1"}}}, {"spectrum", {{"methods", {"lorentzian"}}}}}));
  const json bad_check = {{"spectrum",
                           {{"methods", {"ilo-pmm"}},
                            {"checks", {{{"a", "k-ilo"}, {"b", "ilo-pmm"}, {"fmin_hz", 1e3}, {"fmax_hz", 1e6}}}}}}};
  EXPECT_THROW(parse_config(bad_check), ConfigError);
}

TEST(Config, RoundTrip) {
  RunConfig c = parse_config(json{{"name", "rt"},
                                  {"circuit", {{"osc1", {{"C", 0.295e-12}, {"L", 102e-9}}}}},
                                  {"coupling", {{"g_c1", 40e-6}, {"g_c3", 1e-6}}},
                                  {"noise", {{"osc2.n", 1e-13}}},
                                  {"solver", {{"samples", 2048}, {"rho_max", 8}}},
                                  {"spectrum",
                                   {{"methods", {"ilo-pmm", "oracle"}},
                                    {"checks", {{{"a", "oracle"}, {"b", "ilo-pmm"}, {"fmin_hz", 1e5},
                                                 {"fmax_hz", 1e7}, {"max_below_db", 2.0}}}}}},
                                  {"oracle", {{"paths", 3}, {"seed", 17}, {"scheme", "euler-maruyama"}}}});
  const json j = to_json(c);
  EXPECT_EQ(to_json(parse_config(j)), j);
  EXPECT_EQ(c.osc1.C, 0.295e-12);
  EXPECT_EQ(c.coupling[3], 1e-6);
  EXPECT_EQ(c.shooting.samples, 2048);
  EXPECT_EQ(c.oracle.seed, 17u);
  EXPECT_EQ(c.oracle.scheme, SdeScheme::EulerMaruyama);
  ASSERT_EQ(c.checks.size(), 1u);
  EXPECT_EQ(*c.checks[0].max_below_db, 2.0);
}

TEST(Config, SweepMergesOverBase) {
  const json doc = {{"base", {{"coupling", {{"g_c1", 35e-6}}}, {"noise", {{"osc2.n", 1e-12}}}}},
                    {"sweep",
                     {{{"label", "a"}},
                      {{"label", "b"}, {"set", {{"coupling", {{"g_c1", 60e-6}}}}}}}}};
  const auto pts = expand_sweep(doc);
  ASSERT_EQ(pts.size(), 2u);
  const RunConfig a = parse_config(pts[0].config), b = parse_config(pts[1].config);
  EXPECT_EQ(a.name, "a");
  EXPECT_EQ(b.name, "b");
  EXPECT_EQ(a.coupling[1], 35e-6);
  EXPECT_EQ(b.coupling[1], 60e-6);
  EXPECT_EQ(b.osc2.n_rms, 1e-12);
  EXPECT_THROW(expand_sweep(json{{"sweep", json::array()}}), ConfigError);
  EXPECT_THROW(expand_sweep(json{{"sweep", {{{"label", "x"}}, {{"label", "x"}}}}}), ConfigError);
  EXPECT_THROW(expand_sweep(json{{"sweep", {{{"set", json::object()}}}}}), ConfigError);
  EXPECT_THROW(parse_config(doc), ConfigError);
}

TEST(Config, OffsetStrings) {
  const OffsetGrid g = parse_offsets("1e4:1e7:20");
  EXPECT_EQ(g.min_hz, 1e4);
  EXPECT_EQ(g.max_hz, 1e7);
  EXPECT_EQ(g.per_decade, 20);
  EXPECT_THROW(parse_offsets("1e4:1e7"), ConfigError);
  EXPECT_THROW(parse_offsets("a:b:c"), ConfigError);
  EXPECT_THROW(parse_offsets("1e7:1e4:10"), ConfigError);
}

TEST(Config, BundledScenariosParse) {
  for (const auto& n : scenario_names()) {
    EXPECT_FALSE(scenario_description(n).empty());
    for (const auto& p : expand_sweep(scenario_config(n))) EXPECT_NO_THROW(parse_config(p.config)) << n;
  }
  EXPECT_EQ(expand_sweep(scenario_config("fig4")).size(), 4u);
  EXPECT_THROW(scenario_config("fig7"), ConfigError);
}

TEST(Config, BuildCircuitResolvesLabels) {
  RunConfig c;
  c.observation = "osc2.vcg";
  const BuiltCircuit b = build_circuit(c);
  EXPECT_EQ(b.model.state_labels()[b.observation], "osc2.vcg");
  EXPECT_TRUE(b.p_osc.has_value());
  c.coupling_input = "osc1.nope";
  EXPECT_THROW(build_circuit(c), IndexError);
  c = RunConfig{};
  c.circuit = "osc1";
  EXPECT_EQ(build_circuit(c).model.dim(), 2u);
}
