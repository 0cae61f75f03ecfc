#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "adeye/rng.hpp"

using namespace adeye;

// Vectors from tests/oracles/rng_vectors.py (an independent Python
// implementation); mix(gamma) is also the first SplitMix64 output for seed 0.
TEST(Rng, MixVectors) {
  EXPECT_EQ(splitmix64_mix(0), 0u);
  EXPECT_EQ(splitmix64_mix(kGoldenGamma), 0xe220a8397b1dcdafULL);
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("lidar"), 0x29b704a9d5124e35ULL);
}

TEST(Rng, RunSeedVectors) {
  EXPECT_EQ(derive_run_seed(0, 0), 0xe220a8397b1dcdafULL);
  EXPECT_EQ(derive_run_seed(42, 0), 0xbdd732262feb6e95ULL);
  EXPECT_EQ(derive_run_seed(42, 11), 0x7e348a0e451650beULL);
  EXPECT_EQ(derive_run_seed(~0ULL, 3), 0x6d1db36ccba982d2ULL);
}

TEST(Rng, StreamSeedVectors) {
  const auto rs = derive_run_seed(42, 0);
  EXPECT_EQ(derive_stream_seed(rs, "gps"), 0x49b425e65306815aULL);
  EXPECT_EQ(derive_stream_seed(rs, "lidar"), 0x1dcec607653cdb75ULL);
  EXPECT_EQ(derive_stream_seed(7, "gps"), 0x4a3feb7626ebb3e1ULL);
}

TEST(Rng, GeneratorVectors) {
  Rng a(0);
  EXPECT_EQ(a.next_u64(), 0x99ec5f36cb75f2b4ULL);
  EXPECT_EQ(a.next_u64(), 0xbf6e1f784956452aULL);
  EXPECT_EQ(a.next_u64(), 0x1a5f849d4933e6e0ULL);
  EXPECT_EQ(a.next_u64(), 0x6aa594f1262d2d2cULL);

  Rng u(42);
  EXPECT_EQ(u.uniform(), 0.08386297105988216);
  EXPECT_EQ(u.uniform(), 0.3789802506626686);
  EXPECT_EQ(u.uniform(), 0.6800434110281394);

  Rng g(42);
  EXPECT_DOUBLE_EQ(g.gaussian(), -0.303263064678738);
  EXPECT_DOUBLE_EQ(g.gaussian(), 1.3438117634372806);
  EXPECT_DOUBLE_EQ(g.gaussian(), 0.3834617912676943);
}

TEST(Rng, RunSeedsDistinctAcrossIds) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t id = 0; id < 10000; ++id) seen.insert(derive_run_seed(7, id));
  EXPECT_EQ(seen.size(), 10000u);
}

TEST(Rng, UniformRangeAndMoments) {
  Rng r(123);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    sq += u * u;
  }
  EXPECT_NEAR(sum / n, 0.5, 0.005);
  EXPECT_NEAR(sq / n - (sum / n) * (sum / n), 1.0 / 12.0, 0.002);
}

TEST(Rng, GaussianMoments) {
  Rng r(99);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double g = r.gaussian();
    ASSERT_TRUE(std::isfinite(g));
    sum += g;
    sq += g * g;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(std::sqrt(sq / n), 1.0, 0.01);
}
