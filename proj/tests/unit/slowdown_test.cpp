#include "pfguard/slowdown.h"

#include <gtest/gtest.h>

#include <limits>

namespace pfguard {
namespace {

TEST(Slowdown, NearlyAllSwitchingGivesSwitchOverhead) {
  EXPECT_NEAR(estimate_slowdown({1.0 - 1e-12, 0.006, 0.002}), 0.006, 1e-12);
}

TEST(Slowdown, HalfAndHalf) { EXPECT_NEAR(estimate_slowdown({0.5, 0.006, 0.002}), 0.004, 1e-15); }

TEST(Slowdown, NoSwitchingGivesNonswitchOverhead) {
  EXPECT_NEAR(estimate_slowdown({1e-12, 0.006, 0.002}), 0.002, 1e-12);
}

TEST(Slowdown, LinearInX) {
  for (double a : {0.0, 0.001, 0.04}) {
    for (double b : {0.0, 0.002, 0.5}) {
      const double s1 = estimate_slowdown({0.1, a, b});
      const double s2 = estimate_slowdown({0.2, a, b});
      const double s3 = estimate_slowdown({0.3, a, b});
      EXPECT_NEAR(s2 - s1, s3 - s2, 1e-15);
      EXPECT_NEAR(s2 - s1, 0.1 * (a - b), 1e-15);
    }
  }
}

TEST(Slowdown, MonotoneInEachOverhead) {
  for (double x : {0.01, 0.3, 0.99}) {
    double prev = -1.0;
    for (double a = 0.0; a <= 0.1; a += 0.01) {
      const double s = estimate_slowdown({x, a, 0.002});
      EXPECT_GT(s, prev);
      prev = s;
    }
    prev = -1.0;
    for (double b = 0.0; b <= 0.1; b += 0.01) {
      const double s = estimate_slowdown({x, 0.006, b});
      EXPECT_GT(s, prev);
      prev = s;
    }
  }
}

TEST(Slowdown, RejectsBadInputs) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(estimate_slowdown({0.0, 0.006, 0.002}), InputError);
  EXPECT_THROW(estimate_slowdown({1.0, 0.006, 0.002}), InputError);
  EXPECT_THROW(estimate_slowdown({-0.1, 0.006, 0.002}), InputError);
  EXPECT_THROW(estimate_slowdown({nan, 0.006, 0.002}), InputError);
  EXPECT_THROW(estimate_slowdown({0.5, -0.001, 0.002}), InputError);
  EXPECT_THROW(estimate_slowdown({0.5, 0.006, -0.001}), InputError);
  EXPECT_THROW(estimate_slowdown({0.5, nan, 0.002}), InputError);
}

}  // namespace
}  // namespace pfguard
