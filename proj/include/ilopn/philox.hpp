#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace ilopn {

// Philox4x32-10 (Salmon et al., SC'11). Stateless: output is a pure function of (counter, key).
struct Philox4x32 {
  using ctr_type = std::array<std::uint32_t, 4>;
  using key_type = std::array<std::uint32_t, 2>;

  static ctr_type generate(ctr_type c, key_type k) {
    constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
    constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
    for (int r = 0; r < 10; ++r) {
      const std::uint64_t p0 = std::uint64_t(M0) * c[0];
      const std::uint64_t p1 = std::uint64_t(M1) * c[2];
      c = {std::uint32_t(p1 >> 32) ^ c[1] ^ k[0], std::uint32_t(p1), std::uint32_t(p0 >> 32) ^ c[3] ^ k[1],
           std::uint32_t(p0)};
      k[0] += W0;
      k[1] += W1;
    }
    return c;
  }
};

// Normal variates addressed by (seed, path, step, lane); any order, any thread.
class CounterNormals {
 public:
  CounterNormals(std::uint64_t seed, std::uint32_t path)
      : key_{std::uint32_t(seed), std::uint32_t(seed >> 32)}, path_(path) {}

  // Two standard normals for block `lane` of step `step` (Box-Muller on one Philox block).
  std::array<double, 2> normals(std::uint64_t step, std::uint32_t lane) const {
    const auto r = Philox4x32::generate({std::uint32_t(step), std::uint32_t(step >> 32), path_, lane}, key_);
    const double a = std::sqrt(-2 * std::log(unit(r[0], r[1])));
    const double t = 2 * std::numbers::pi * unit(r[2], r[3]);
    return {a * std::cos(t), a * std::sin(t)};
  }

  // Uniform in (0, 1) for auxiliary draws (initial phase etc.).
  double uniform(std::uint32_t tag) const {
    const auto r = Philox4x32::generate({0xFFFFFFFFu, 0xFFFFFFFFu, path_, 0x80000000u | tag}, key_);
    return unit(r[0], r[1]);
  }

 private:
  // 53 random bits mapped to the open interval (0, 1).
  static double unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t m = (std::uint64_t(hi) << 21) ^ (lo >> 11);
    return (double(m & ((1ull << 53) - 1)) + 0.5) * 0x1.0p-53;
  }

  std::array<std::uint32_t, 2> key_;
  std::uint32_t path_;
};

}  // namespace ilopn
