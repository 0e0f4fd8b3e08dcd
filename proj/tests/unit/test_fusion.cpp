#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "trendwatch/error.hpp"
#include "trendwatch/fusion.hpp"
#include "trendwatch/normal.hpp"

using namespace trendwatch;

TEST(Stouffer, NullSymmetry) {
  const auto c = stouffer_combine(std::vector<double>{0.5, 0.5});
  EXPECT_NEAR(c.z, 0.0, 1e-15);
  EXPECT_NEAR(c.p, 0.5, 1e-15);
}

TEST(Stouffer, TwoFivePercentValues) {
  const auto c = stouffer_combine(std::vector<double>{0.05, 0.05}, std::vector<double>{1, 1});
  EXPECT_NEAR(c.z, 2.3262, 1e-4);
  EXPECT_NEAR(c.p, 0.0100, 2e-4);
}

TEST(Stouffer, SingleValueIsIdentity) {
  for (double p : {1e-9, 0.01, 0.3, 0.999})
    for (double w : {0.1, 1.0, 42.0}) EXPECT_NEAR(stouffer_combine(std::vector{p}, std::vector{w}).p, p, 1e-10);
}

TEST(Stouffer, ClipsSaturatedValues) {
  const auto c = stouffer_combine(std::vector<double>{0.0, 1.0});
  EXPECT_TRUE(std::isfinite(c.z));
  // 1 − 1e−15 is not exactly representable, so the two clipped tails cancel
  // only approximately.
  EXPECT_NEAR(c.z, 0.0, 0.01);
  EXPECT_NEAR(stouffer_combine(std::vector<double>{0.0}).z, normal_isf(kPValueClip), 1e-12);
}

TEST(Stouffer, InputErrors) {
  EXPECT_THROW(stouffer_combine(std::vector<double>{}), UsageError);
  EXPECT_THROW(stouffer_combine(std::vector<double>{0.1}, std::vector<double>{0.0}), UsageError);
  EXPECT_THROW(stouffer_combine(std::vector<double>{0.1, 0.2}, std::vector<double>{1.0}), UsageError);
}

TEST(Stouffer, MonotonePermutationAndScaleInvariant) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.001, 0.999), w(0.1, 3);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> p(5), wt(5);
    for (int i = 0; i < 5; ++i) {
      p[i] = u(rng);
      wt[i] = w(rng);
    }
    const auto base = stouffer_combine(p, wt);
    EXPECT_NEAR(base.p, normal_sf(base.z), 1e-15);
    auto lower = p;
    lower[rep % 5] *= 0.5;
    EXPECT_LT(stouffer_combine(lower, wt).p, base.p);
    std::vector<double> rp(p.rbegin(), p.rend()), rw(wt.rbegin(), wt.rend());
    EXPECT_NEAR(stouffer_combine(rp, rw).z, base.z, 1e-12);
    auto scaled = wt;
    for (auto& x : scaled) x *= 13.7;
    const auto s = stouffer_combine(p, scaled);
    EXPECT_NEAR(s.z, base.z, 1e-12);
    EXPECT_NEAR(s.p, base.p, 1e-12);
  }
}

TEST(Stouffer, NullUniformity) {
  std::mt19937_64 rng(1234);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k : {2, 5, 12}) {
    std::vector<double> combined(10000), p(k);
    for (auto& c : combined) {
      for (auto& x : p) x = u(rng);
      c = stouffer_combine(p).p;
    }
    EXPECT_GT(oracle::ks_uniform(combined).p_value, 0.01) << "k = " << k;
  }
}

namespace {

FitSeries stream(const std::string& id, Date first, const std::vector<double>& pvalues) {
  FitSeries s;
  s.region_id = "r";
  s.stream_id = id;
  for (std::size_t i = 0; i < pvalues.size(); ++i) {
    RegressionFit f;
    f.converged = !std::isnan(pvalues[i]);
    f.se_beta = 1;
    f.z_score = f.converged ? normal_isf(pvalues[i]) : 0.0;
    f.beta_hat = f.z_score;
    f.p_one_sided = f.converged ? pvalues[i] : 0.5;
    s.fits.push_back({first + static_cast<int>(i), f});
  }
  return s;
}

}  // namespace

TEST(FuseRegion, AvailabilityAndRenormalisation) {
  const Date d0 = Date::parse("2021-06-01");
  const double nan = std::nan("");
  const std::vector<FitSeries> s{stream("a", d0, {0.5, 0.05, nan}), stream("b", d0, {0.5, 0.05, nan}),
                                 stream("c", d0, {0.5, 0.05, nan}), stream("d", d0, {0.5, nan, nan})};
  const auto fused = fuse_region(s);
  ASSERT_EQ(fused.points.size(), 3u);
  EXPECT_NEAR(fused.points[0].p, 0.5, 1e-12);
  EXPECT_EQ(fused.points[0].streams.size(), 4u);
  EXPECT_EQ(fused.points[1].streams, (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_NEAR(fused.points[1].z, 3 * normal_isf(0.05) / std::sqrt(3.0), 1e-9);
  EXPECT_TRUE(std::isnan(fused.at(d0 + 2)->p));
  EXPECT_TRUE(fused.points[2].streams.empty());
}

TEST(FuseRegion, WeightsApply) {
  const Date d0 = Date::parse("2021-06-01");
  const std::vector<FitSeries> s{stream("a", d0, {0.01}), stream("b", d0, {0.4})};
  const auto fused = fuse_region(s, {{"a", 3.0}});
  const double expect = (3 * normal_isf(0.01) + normal_isf(0.4)) / std::sqrt(10.0);
  EXPECT_NEAR(fused.points[0].z, expect, 1e-9);
}
