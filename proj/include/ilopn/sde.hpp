#pragma once

#include <fftw3.h>

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <mutex>
#include <numbers>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "error.hpp"
#include "integrate.hpp"
#include "philox.hpp"
#include "pss.hpp"
#include "spectrum.hpp"
#include "state_space.hpp"

namespace ilopn {

enum class SdeScheme {
  Rk4Additive,   // deterministic RK4 step, then B sqrt(dt) xi
  EulerMaruyama  // x + f dt + B sqrt(dt) xi
};

inline std::string scheme_name(SdeScheme s) { return s == SdeScheme::Rk4Additive ? "rk4-additive" : "euler-maruyama"; }
inline SdeScheme parse_scheme(const std::string& s) {
  if (s == "rk4-additive") return SdeScheme::Rk4Additive;
  if (s == "euler-maruyama") return SdeScheme::EulerMaruyama;
  throw ConfigError("unknown SDE scheme '" + s + "'");
}

// One noisy step.  `noise` holds sqrt(dt) B when B is constant.
class SdeStepper {
 public:
  // With refine = r each increment sums r normals of a grid r times finer, so runs at dt and dt/r
  // see the same Brownian path.
  SdeStepper(const StateSpaceModel& m, double dt, SdeScheme scheme, std::uint64_t seed, std::uint32_t path,
             int refine = 1)
      : m_(m), dt_(dt), scheme_(scheme), refine_(refine), rng_(seed, path), ws_(m.dim()), k_(m.dim()), B_(m.dim(), m.noise_count()),
        xi_(m.noise_count() + 1) {
    if (m.constant_noise()) {
      Eigen::VectorXd z = Eigen::VectorXd::Zero(m.dim());
      m.noise_matrix({z.data(), m.dim()}, B_);
      B_ *= std::sqrt(dt);
      for (Eigen::Index j = 0; j < B_.cols(); ++j)
        for (Eigen::Index i = 0; i < B_.rows(); ++i)
          if (B_(i, j) != 0) nz_.push_back({i, j, B_(i, j)});
    }
  }

  void step(std::span<double> x, std::uint64_t index) {
    const std::size_t n = x.size(), p = m_.noise_count();
    if (refine_ == 1) {
      for (std::uint32_t b = 0; 2 * b < p; ++b) {
        const auto g = rng_.normals(index, b);
        xi_[2 * b] = g[0];
        xi_[2 * b + 1] = g[1];
      }
    } else {
      std::fill(xi_.begin(), xi_.end(), 0.0);
      const double w = 1 / std::sqrt(double(refine_));
      for (int r = 0; r < refine_; ++r)
        for (std::uint32_t b = 0; 2 * b < p; ++b) {
          const auto g = rng_.normals(index * refine_ + r, b);
          xi_[2 * b] += w * g[0];
          xi_[2 * b + 1] += w * g[1];
        }
    }
    if (!m_.constant_noise()) {
      m_.noise_matrix(x, B_);
      B_ *= std::sqrt(dt_);
    }
    if (scheme_ == SdeScheme::Rk4Additive) {
      if (!m_.constant_noise()) {  // noise evaluated at the start of the step
        for (std::size_t i = 0; i < n; ++i) {
          double s = 0;
          for (std::size_t j = 0; j < p; ++j) s += B_(i, j) * xi_[j];
          k_[i] = s;
        }
      }
      rk4_step(m_, x, dt_, ws_);
    } else {
      m_.eval(x, k_);
      if (!m_.constant_noise()) {
        for (std::size_t i = 0; i < n; ++i) {
          double s = 0;
          for (std::size_t j = 0; j < p; ++j) s += B_(i, j) * xi_[j];
          x[i] += dt_ * k_[i] + s;
        }
        return;
      }
      for (std::size_t i = 0; i < n; ++i) x[i] += dt_ * k_[i];
    }
    if (m_.constant_noise()) {
      for (const auto& e : nz_) x[e.row] += e.value * xi_[e.col];
    } else if (scheme_ == SdeScheme::Rk4Additive) {
      for (std::size_t i = 0; i < n; ++i) x[i] += k_[i];
    }
  }

  const CounterNormals& rng() const { return rng_; }

 private:
  struct Entry {
    Eigen::Index row, col;
    double value;
  };
  const StateSpaceModel& m_;
  double dt_;
  SdeScheme scheme_;
  int refine_;
  CounterNormals rng_;
  Rk4Workspace ws_;
  std::vector<double> k_;
  Eigen::MatrixXd B_;
  std::vector<double> xi_;
  std::vector<Entry> nz_;
};

// Integrates one path for `steps` steps of size dt; `sample` sees the state after every step.
inline void integrate_sde_path(const StateSpaceModel& m, std::span<double> x, double dt, long steps,
                               SdeScheme scheme, std::uint64_t seed, std::uint32_t path,
                               const std::function<void(long, std::span<const double>)>& sample = {}) {
  SdeStepper stepper(m, dt, scheme, seed, path);
  for (long k = 0; k < steps; ++k) {
    stepper.step(x, static_cast<std::uint64_t>(k));
    if (sample) sample(k + 1, x);
  }
}

struct OracleOptions {
  int steps_per_period = 500;  // dt = T0 / steps_per_period
  int noise_refinement = 1;    // see SdeStepper
  int paths = 64;
  long periods = 100000;  // record length per path
  std::uint64_t seed = 1;
  std::size_t observation = 0;
  SdeScheme scheme = SdeScheme::Rk4Additive;
  int segment_length = 65536;  // Welch, in demodulated samples (one per period)
  int threads = 0;             // 0: hardware concurrency
  bool record_phase = false;
  std::function<void(int done, int total)> progress;
  // Called at every period boundary; tests use it to watch trajectories.
  std::function<void(int path, long period, std::span<const double> x)> observer;
};

// Streaming accumulators; no raw trajectories are kept.
struct EnsembleRun {
  int n_paths = 0;
  int diverged = 0;
  double dt = 0;
  double T_total = 0;
  double T0 = 0;
  std::uint64_t seed = 0;
  int segment_length = 0;
  long segments = 0;
  std::vector<double> periodogram;  // sum over segments, FFT bin order
  double window_power = 0;          // sum w^2
  double carrier_sum = 0;           // sum |z|^2
  long carrier_count = 0;
  std::vector<std::vector<double>> phase;  // per path, phase at each upward crossing (rad)
};

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

// Welch accumulator on a complex baseband stream: Hann window, 50% overlap, mean removed per segment.
class WelchAccumulator {
 public:
  explicit WelchAccumulator(int L) : L_(L), buf_(L), w_(L), sum_(L, 0.0) {
    for (int k = 0; k < L; ++k) w_[k] = 0.5 - 0.5 * std::cos(2 * std::numbers::pi * k / L);
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    in_ = fftw_alloc_complex(L);
    out_ = fftw_alloc_complex(L);
    plan_ = fftw_plan_dft_1d(L, in_, out_, FFTW_FORWARD, FFTW_ESTIMATE);
  }
  ~WelchAccumulator() {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(plan_);
    fftw_free(in_);
    fftw_free(out_);
  }
  WelchAccumulator(const WelchAccumulator&) = delete;
  WelchAccumulator& operator=(const WelchAccumulator&) = delete;

  void push(cplx z) {
    buf_[fill_++] = z;
    if (fill_ == L_) {
      process();
      std::copy(buf_.begin() + L_ / 2, buf_.end(), buf_.begin());
      fill_ = L_ - L_ / 2;
    }
  }

  long segments() const { return segments_; }
  const std::vector<double>& sum() const { return sum_; }
  double window_power() const {
    double s = 0;
    for (double v : w_) s += v * v;
    return s;
  }

 private:
  void process() {
    cplx mean{};
    for (const cplx& z : buf_) mean += z;
    mean /= double(L_);
    for (int k = 0; k < L_; ++k) {
      const cplx v = (buf_[k] - mean) * w_[k];
      in_[k][0] = v.real();
      in_[k][1] = v.imag();
    }
    fftw_execute(plan_);
    for (int k = 0; k < L_; ++k) sum_[k] += out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1];
    ++segments_;
  }

  int L_;
  std::vector<cplx> buf_;
  std::vector<double> w_;
  std::vector<double> sum_;
  int fill_ = 0;
  long segments_ = 0;
  fftw_complex* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_ = nullptr;
};

struct PathResult {
  std::vector<double> periodogram;
  long segments = 0;
  double carrier_sum = 0;
  long carrier_count = 0;
  std::vector<double> phase;
  bool diverged = false;
};

}  // namespace detail

inline int welch_segment_length(long periods, int requested) {
  int L = requested;
  while (L > 16 && L > periods) L /= 2;
  if (L > periods) throw InsufficientRecord("record of " + std::to_string(periods) + " periods is too short");
  return L;
}

inline EnsembleRun simulate_paths(const StateSpaceModel& model, const PeriodicSteadyState& pss,
                                  const OracleOptions& opt) {
  const std::size_t n = model.dim();
  if (opt.steps_per_period < 200)
    throw ConfigError("oracle step must satisfy dt <= T0/200 (steps_per_period >= 200)");
  if (opt.noise_refinement < 1) throw ConfigError("noise_refinement must be >= 1");
  if (opt.paths < 1 || opt.periods < 1) throw ConfigError("oracle needs at least one path and one period");
  if (opt.observation >= n) throw IndexError("oracle observation node out of range");
  const int N = opt.steps_per_period;
  const double dt = pss.T0 / N;
  const int L = welch_segment_length(opt.periods, opt.segment_length);

  // Demodulation phasors for one period; exact periodicity of the grid makes them reusable.
  std::vector<cplx> rot(N);
  for (int k = 0; k < N; ++k) rot[k] = std::polar(1.0 / N, -2 * std::numbers::pi * k / N);
  const Eigen::VectorXd amp = pss.amplitude();
  const Eigen::VectorXd centre = pss.samples.topRows(pss.n_samples()).colwise().mean().transpose();
  const std::size_t q = opt.observation;
  const double level = centre[q], arm = level - 0.1 * amp[q];

  std::vector<detail::PathResult> results(opt.paths);
  std::atomic<int> next{0}, done{0};
  std::mutex progress_mutex;

  auto worker = [&]() {
    for (;;) {
      const int path = next.fetch_add(1);
      if (path >= opt.paths) break;
      detail::PathResult& res = results[path];
      SdeStepper stepper(model, dt, opt.scheme, opt.seed, static_cast<std::uint32_t>(path), opt.noise_refinement);

      // Random start on the cycle.
      const long k0 = static_cast<long>(stepper.rng().uniform(0) * N) % N;
      Eigen::VectorXd x = pss.x0;
      Rk4Workspace ws(n);
      for (long k = 0; k < k0; ++k) rk4_step(model, {x.data(), n}, dt, ws);

      detail::WelchAccumulator welch(L);

      bool armed = false;
      long crossings = 0;
      double prev = x[q];
      std::uint64_t step = 0;
      for (long m = 0; m < opt.periods && !res.diverged; ++m) {
        cplx z{};
        for (int k = 0; k < N; ++k) {
          z += x[q] * rot[k];
          stepper.step({x.data(), n}, step++);
          const double cur = x[q];
          if (opt.record_phase) {
            if (cur < arm) armed = true;
            if (armed && prev < level && cur >= level) {
              const double tc = (double(step) - 1 + (level - prev) / (cur - prev)) * dt;
              res.phase.push_back(pss.omega0 * tc - 2 * std::numbers::pi * double(crossings));
              ++crossings;
              armed = false;
            }
          }
          prev = cur;
        }
        welch.push(z);
        res.carrier_sum += std::norm(z);
        ++res.carrier_count;
        if (opt.observer) opt.observer(path, m, {x.data(), n});
        for (std::size_t i = 0; i < n; ++i)
          if (!std::isfinite(x[i]) || std::abs(x[i] - centre[i]) > 1e3 * std::max(amp[i], 1e-300)) {
            res.diverged = true;
            break;
          }
      }
      res.segments = welch.segments();
      res.periodogram = welch.sum();
      if (opt.progress) {
        std::lock_guard<std::mutex> lock(progress_mutex);
        opt.progress(++done, opt.paths);
      }
    }
  };

  int nt = opt.threads > 0 ? opt.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  nt = std::min(nt, opt.paths);
  if (nt == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nt; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  EnsembleRun run;
  run.n_paths = opt.paths;
  run.dt = dt;
  run.T0 = pss.T0;
  run.T_total = pss.T0 * double(opt.periods);
  run.seed = opt.seed;
  run.segment_length = L;
  run.periodogram.assign(L, 0.0);
  {
    detail::WelchAccumulator probe(L);
    run.window_power = probe.window_power();
  }
  for (const auto& r : results) {  // fixed path order: scheduling cannot change the sums
    if (r.diverged) {
      ++run.diverged;
      continue;
    }
    for (int k = 0; k < L; ++k) run.periodogram[k] += r.periodogram[k];
    run.segments += r.segments;
    run.carrier_sum += r.carrier_sum;
    run.carrier_count += r.carrier_count;
    if (opt.record_phase) run.phase.push_back(r.phase);
  }
  if (run.segments == 0) throw InsufficientRecord("no complete Welch segment (all paths diverged?)");
  return run;
}

// Upper-sideband density relative to the carrier, averaged over log bands around each offset.
inline SpectrumResult estimate_psd(const EnsembleRun& run, const std::vector<double>& offsets_hz) {
  const int L = run.segment_length;
  const double fs = 1.0 / run.T0, df = fs / L;
  const double pc = run.carrier_sum / double(run.carrier_count);
  if (!(pc > 0)) throw ZeroCarrier("oracle record has no carrier at the fundamental");
  const double scale = 1.0 / (double(run.segments) * fs * run.window_power * pc);
  const double fmin = std::max(10.0 / run.T_total, 4 * df);

  SpectrumResult r;
  r.method = Method::Oracle;
  r.offsets_hz = offsets_hz;
  for (std::size_t i = 0; i < offsets_hz.size(); ++i) {
    const double f = offsets_hz[i];
    if (f < fmin)
      throw InsufficientRecord("offset " + std::to_string(f) + " Hz is below the record resolution (" +
                               std::to_string(fmin) + " Hz)");
    if (f >= 0.5 * fs) throw ConfigError("offset above the demodulated Nyquist frequency");
    const double lo = i > 0 ? std::sqrt(f * offsets_hz[i - 1]) : f * f / std::sqrt(f * offsets_hz[i + 1]);
    const double hi = i + 1 < offsets_hz.size() ? std::sqrt(f * offsets_hz[i + 1])
                                                 : f * f / std::sqrt(f * offsets_hz[i - 1]);
    int k0 = std::max(1, static_cast<int>(std::ceil(lo / df))), k1 = static_cast<int>(std::floor(hi / df));
    k1 = std::min(k1, L / 2 - 1);
    if (k1 < k0) k0 = k1 = std::clamp(static_cast<int>(std::lround(f / df)), 1, L / 2 - 1);
    double s = 0;
    for (int k = k0; k <= k1; ++k) s += run.periodogram[k];
    const int bins = k1 - k0 + 1;
    r.density.push_back(s / bins * scale);
    r.std_error_db.push_back(10 / std::log(10.0) / std::sqrt(double(bins) * run.segments));
  }
  return r;
}

struct DiffusionFit {
  double slope = 0;      // rad^2/s, estimates w0^2 c
  double intercept = 0;  // rad^2
  std::vector<double> lag_s, variance;
};

// Variance of phase increments versus lag, pooled over paths, then least squares.
inline DiffusionFit phase_diffusion_slope(const EnsembleRun& run, int min_lag = 64, int lags = 12) {
  if (run.phase.empty()) throw InsufficientRecord("phase was not recorded");
  std::size_t shortest = run.phase[0].size();
  for (const auto& p : run.phase) shortest = std::min(shortest, p.size());
  const std::size_t max_lag = shortest / 8;
  if (max_lag <= static_cast<std::size_t>(min_lag)) throw InsufficientRecord("phase record too short");
  DiffusionFit fit;
  for (int j = 0; j < lags; ++j) {
    const auto tau = static_cast<std::size_t>(
        std::llround(min_lag * std::pow(double(max_lag) / min_lag, double(j) / (lags - 1))));
    double s = 0, s2 = 0;
    long cnt = 0;
    for (const auto& p : run.phase)
      for (std::size_t i = 0; i + tau < p.size(); ++i) {
        const double d = p[i + tau] - p[i];
        s += d;
        s2 += d * d;
        ++cnt;
      }
    const double mean = s / cnt;
    fit.lag_s.push_back(double(tau) * run.T0);
    fit.variance.push_back(s2 / cnt - mean * mean);
  }
  // OLS line through (lag, variance).
  const double n = fit.lag_s.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < fit.lag_s.size(); ++i) {
    sx += fit.lag_s[i];
    sy += fit.variance[i];
    sxx += fit.lag_s[i] * fit.lag_s[i];
    sxy += fit.lag_s[i] * fit.variance[i];
  }
  fit.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  fit.intercept = (sy - fit.slope * sx) / n;
  return fit;
}

}  // namespace ilopn
