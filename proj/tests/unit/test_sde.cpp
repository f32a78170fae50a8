#include <gtest/gtest.h>

#include <ilopn/sde.hpp>

#include "../support/fixtures.hpp"

using namespace ilopn;
using ilopn::testing::osc1_fixture;

namespace {

StateSpaceModel ornstein_uhlenbeck(double k, double s) {
  auto f = [k](std::span<const double> x, std::span<double> dx) { dx[0] = -k * x[0]; };
  auto jac = [k](std::span<const double>, Eigen::Ref<Eigen::MatrixXd> J) { J(0, 0) = -k; };
  auto noise = [s](std::span<const double>, Eigen::Ref<Eigen::MatrixXd> B) { B(0, 0) = s; };
  return StateSpaceModel({"x"}, {"w"}, f, jac, noise);
}

OracleOptions small_run(int paths, long periods, int L) {
  OracleOptions o;
  o.steps_per_period = 200;
  o.paths = paths;
  o.periods = periods;
  o.segment_length = L;
  o.threads = 1;
  return o;
}

}  // namespace

TEST(Sde, OrnsteinUhlenbeckVariance) {
  const double k = 1.0, s = 0.5;
  for (SdeScheme scheme : {SdeScheme::Rk4Additive, SdeScheme::EulerMaruyama}) {
    double x = 0, sum = 0, sum2 = 0;
    long cnt = 0;
    integrate_sde_path(ornstein_uhlenbeck(k, s), {&x, 1}, 0.01, 1000000, scheme, 42, 0,
                       [&](long step, std::span<const double> v) {
                         if (step < 1000) return;
                         sum += v[0];
                         sum2 += v[0] * v[0];
                         ++cnt;
                       });
    const double mean = sum / cnt, var = sum2 / cnt - mean * mean;
    EXPECT_NEAR(var / (s * s / (2 * k)), 1.0, 0.03) << scheme_name(scheme);
  }
}

TEST(Sde, SchemeNames) {
  EXPECT_EQ(parse_scheme("rk4-additive"), SdeScheme::Rk4Additive);
  EXPECT_EQ(parse_scheme(scheme_name(SdeScheme::EulerMaruyama)), SdeScheme::EulerMaruyama);
  EXPECT_THROW(parse_scheme("milstein"), ConfigError);
}

TEST(Sde, NoiselessPathStaysOnCycle) {
  const auto& a = osc1_fixture();
  const auto quiet = a.model.with_noise_scaled(0.0);
  auto o = small_run(2, 256, 64);
  o.steps_per_period = 256;
  std::vector<Eigen::VectorXd> first(2);
  double worst = 0;
  const Eigen::VectorXd amp = a.pss.amplitude();
  o.observer = [&](int path, long, std::span<const double> x) {
    const Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(x.data(), x.size());
    if (first[path].size() == 0) first[path] = v;
    worst = std::max(worst, ((v - first[path]).array() / amp.array()).abs().maxCoeff());
  };
  simulate_paths(quiet, a.pss, o);
  EXPECT_LT(worst, 1e-5);
}

TEST(Sde, ReproducibleAcrossThreadCounts) {
  const auto& a = osc1_fixture();
  auto o = small_run(4, 2048, 512);
  const auto r1 = simulate_paths(a.model, a.pss, o);
  o.threads = 3;
  const auto r3 = simulate_paths(a.model, a.pss, o);
  EXPECT_EQ(r1.periodogram, r3.periodogram);
  EXPECT_EQ(r1.carrier_sum, r3.carrier_sum);
  o.seed = 2;
  EXPECT_NE(simulate_paths(a.model, a.pss, o).periodogram, r1.periodogram);
}

TEST(Sde, SeedsAgreeWithinStandardError) {
  const auto& a = osc1_fixture();
  auto o = small_run(4, 8192, 1024);
  const auto f = log_grid(5e6, 1e8, 6);
  const auto s1 = estimate_psd(simulate_paths(a.model, a.pss, o), f);
  o.seed = 99;
  const auto s2 = estimate_psd(simulate_paths(a.model, a.pss, o), f);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double se = std::hypot(s1.std_error_db[i], s2.std_error_db[i]);
    EXPECT_LT(std::abs(to_db(s1.density[i]) - to_db(s2.density[i])), 4 * se) << f[i];
  }
}

TEST(Sde, SpectralFloorOfPureCarrier) {
  const int L = 1024;
  detail::WelchAccumulator w(L);
  EnsembleRun run;
  run.T0 = 1e-9;
  run.T_total = 8 * L * run.T0;
  run.segment_length = L;
  run.window_power = w.window_power();
  const cplx z = std::polar(0.5, 0.3);
  for (int k = 0; k < 8 * L; ++k) {
    w.push(z);
    run.carrier_sum += std::norm(z);
    ++run.carrier_count;
  }
  run.periodogram = w.sum();
  run.segments = w.segments();
  EXPECT_EQ(run.segments, 15);
  const auto s = estimate_psd(run, log_grid(1e7, 1e8, 5));
  for (double x : s.density) EXPECT_LT(to_db(x), -300.0 + 1e-9);
}

TEST(Sde, StepRefinementConverged) {
  const auto& a = osc1_fixture();
  auto o = small_run(4, 4096, 1024);
  o.noise_refinement = 2;
  const auto f = log_grid(5e6, 1e8, 6);
  const auto coarse = estimate_psd(simulate_paths(a.model, a.pss, o), f);
  o.steps_per_period = 400;
  o.noise_refinement = 1;
  const auto fine = estimate_psd(simulate_paths(a.model, a.pss, o), f);
  EXPECT_LT(compare_spectra(coarse, fine, 5e6, 1e8).max_db, 0.5);
}

TEST(Sde, RejectsBadOptions) {
  const auto& a = osc1_fixture();
  auto o = small_run(1, 128, 64);
  o.steps_per_period = 199;
  EXPECT_THROW(simulate_paths(a.model, a.pss, o), ConfigError);
  o = small_run(1, 8, 64);
  EXPECT_THROW(simulate_paths(a.model, a.pss, o), InsufficientRecord);
  o = small_run(1, 128, 64);
  o.observation = 5;
  EXPECT_THROW(simulate_paths(a.model, a.pss, o), IndexError);
  o = small_run(1, 128, 64);
  o.noise_refinement = 0;
  EXPECT_THROW(simulate_paths(a.model, a.pss, o), ConfigError);
}

TEST(Sde, RecordResolutionLimits) {
  const auto& a = osc1_fixture();
  const auto run = simulate_paths(a.model, a.pss, small_run(1, 256, 64));
  EXPECT_THROW(estimate_psd(run, {1e3, 1e8}), InsufficientRecord);
  EXPECT_THROW(estimate_psd(run, {1e8, 6e8}), ConfigError);
  EXPECT_THROW(phase_diffusion_slope(run), InsufficientRecord);
}

TEST(Sde, DivergedPathsAreDropped) {
  const auto& a = osc1_fixture();
  EXPECT_THROW(simulate_paths(a.model.with_noise_scaled(1e6), a.pss, small_run(2, 128, 64)), InsufficientRecord);
}
