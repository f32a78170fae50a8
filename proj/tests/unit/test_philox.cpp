#include <gtest/gtest.h>

#include <ilopn/philox.hpp>

using ilopn::CounterNormals;
using ilopn::Philox4x32;

// Known-answer vectors from the Random123 distribution (philox4x32_10).
TEST(Philox, KnownAnswerZero) {
  const auto r = Philox4x32::generate({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(r, (Philox4x32::ctr_type{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
}

TEST(Philox, KnownAnswerOnes) {
  const auto r = Philox4x32::generate({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
  EXPECT_EQ(r, (Philox4x32::ctr_type{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
}

TEST(Philox, KnownAnswerPi) {
  const auto r = Philox4x32::generate({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u});
  EXPECT_EQ(r, (Philox4x32::ctr_type{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(Philox, NormalMoments) {
  const CounterNormals g(7, 3);
  const int n = 500000;
  double s = 0, s2 = 0, s4 = 0;
  for (int k = 0; k < n; ++k)
    for (double x : g.normals(k, 0)) {
      s += x;
      s2 += x * x;
      s4 += x * x * x * x;
    }
  const double m = 2.0 * n;
  EXPECT_NEAR(s / m, 0.0, 5e-3);
  EXPECT_NEAR(s2 / m, 1.0, 1e-2);
  EXPECT_NEAR(s4 / m, 3.0, 5e-2);
}

TEST(Philox, StreamsAreAddressable) {
  const CounterNormals a(1, 0), b(1, 1), c(2, 0);
  EXPECT_EQ(a.normals(5, 0), CounterNormals(1, 0).normals(5, 0));
  EXPECT_NE(a.normals(5, 0), b.normals(5, 0));
  EXPECT_NE(a.normals(5, 0), c.normals(5, 0));
  EXPECT_NE(a.normals(5, 0), a.normals(5, 1));
  const double u = a.uniform(0);
  EXPECT_GT(u, 0.0);
  EXPECT_LT(u, 1.0);
  EXPECT_NE(u, a.uniform(1));
}
