#include <gtest/gtest.h>

#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "trendwatch/error.hpp"
#include "trendwatch/local_regression.hpp"
#include "trendwatch/normal.hpp"

using namespace trendwatch;

namespace {

std::vector<double> exponential(int n, double a, double b) {
  std::vector<double> y(n);
  for (int i = 0; i < n; ++i) y[i] = std::exp(a + b * (i + 1));
  return y;
}

std::vector<double> poisson_window(std::mt19937_64& rng, int n, double a, double b) {
  std::vector<double> y(n);
  for (int i = 0; i < n; ++i) y[i] = std::poisson_distribution<long>(std::exp(a + b * (i + 1)))(rng);
  return y;
}

std::vector<double> negbin_window(std::mt19937_64& rng, int n, double a, double b, double c) {
  std::vector<double> y(n);
  for (int i = 0; i < n; ++i) {
    const double mu = std::exp(a + b * (i + 1));
    const double lambda = std::gamma_distribution<double>(1.0 / c, c * mu)(rng);
    y[i] = std::poisson_distribution<long>(lambda)(rng);
  }
  return y;
}

}  // namespace

TEST(Normal, MatchesBoostReference) {
  const boost::math::normal_distribution<double> n01;
  for (double x = -37.0; x <= 8.0; x += 0.173) {
    const double ref_cdf = boost::math::cdf(n01, x);
    const double ref_sf = boost::math::cdf(boost::math::complement(n01, x));
    EXPECT_NEAR(normal_cdf(x), ref_cdf, 1e-15 + 1e-12 * ref_cdf) << x;
    EXPECT_NEAR(normal_sf(x), ref_sf, 1e-15 + 1e-12 * ref_sf) << x;
  }
  for (double p : {1e-300, 1e-15, 1e-6, 0.01, 0.05, 0.3, 0.5, 0.77, 0.975, 1 - 1e-9}) {
    const double ref = boost::math::quantile(n01, p);
    EXPECT_NEAR(normal_quantile(p), ref, 1e-10 * std::max(1.0, std::abs(ref))) << p;
    EXPECT_NEAR(normal_isf(p), -ref, 1e-10 * std::max(1.0, std::abs(ref))) << p;
  }
  EXPECT_TRUE(std::isinf(normal_quantile(0.0)));
  EXPECT_TRUE(std::isnan(normal_quantile(1.5)));
}

TEST(LinearLog, NoiselessExponentialIsExact) {
  const auto y = exponential(21, 1.0, 0.1);
  const auto f = fit_linear_log(y);
  EXPECT_NEAR(f.beta_hat, 0.1, 1e-12);
  EXPECT_NEAR(f.alpha_hat, 1.0, 1e-11);
  EXPECT_NEAR(f.se_beta, 0.0, 1e-12);
  EXPECT_TRUE(f.converged);
}

TEST(LinearLog, ConstantSeriesHasNullPValue) {
  const std::vector<double> y(14, 50.0);
  const auto f = fit_linear_log(y);
  EXPECT_EQ(f.beta_hat, 0.0);
  EXPECT_EQ(f.p_one_sided, 0.5);
}

TEST(LinearLog, MatchesNormalEquationsOracle) {
  std::mt19937_64 rng(11);
  std::lognormal_distribution<double> ln(3.0, 0.8);
  for (int rep = 0; rep < 200; ++rep) {
    const int n = 3 + rep % 40;
    std::vector<double> y(n);
    for (auto& v : y) v = ln(rng);
    const auto f = fit_linear_log(y);
    const auto o = oracle::normal_equations(y);
    EXPECT_NEAR(f.beta_hat, o.slope, 1e-10);
    EXPECT_NEAR(f.alpha_hat, o.intercept, 1e-9);
  }
}

TEST(LinearLog, ZeroRuleShiftsWholeWindow) {
  std::vector<double> y{0, 3, 5, 9, 12, 20, 31};
  const auto f = fit_linear_log(y);
  std::vector<double> shifted = y;
  for (auto& v : shifted) v += 0.5;
  EXPECT_NEAR(f.beta_hat, oracle::normal_equations(shifted).slope, 1e-12);
}

TEST(LinearLog, VarianceLawAtThree) {
  // For n = 3 the closed form weights are (−1/2, 0, 1/2), so Var β̂ = σ²/2 = 12σ²/24.
  std::mt19937_64 rng(3);
  std::normal_distribution<double> eps(0.0, std::sqrt(2.0));
  double sum = 0, sum2 = 0;
  const int reps = 200000;
  for (int r = 0; r < reps; ++r) {
    std::vector<double> y{std::exp(eps(rng)), std::exp(eps(rng)), std::exp(eps(rng))};
    const double b = fit_linear_log(y).beta_hat;
    sum += b;
    sum2 += b * b;
  }
  const double var = (sum2 - sum * sum / reps) / (reps - 1);
  EXPECT_NEAR(var, 1.0, 0.02);
}

TEST(LinearLog, ScaleEquivarianceAndTimeReversal) {
  std::mt19937_64 rng(5);
  std::lognormal_distribution<double> ln(2.0, 0.5);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> y(21);
    for (auto& v : y) v = ln(rng);
    const auto f = fit_linear_log(y);
    std::vector<double> scaled = y, reversed(y.rbegin(), y.rend());
    for (auto& v : scaled) v *= 7.3;
    const auto g = fit_linear_log(scaled);
    EXPECT_NEAR(g.alpha_hat, f.alpha_hat + std::log(7.3), 1e-12);
    EXPECT_NEAR(g.beta_hat, f.beta_hat, 1e-12);
    EXPECT_NEAR(g.se_beta, f.se_beta, 1e-12);
    EXPECT_NEAR(g.p_one_sided, f.p_one_sided, 1e-12);
    EXPECT_NEAR(fit_linear_log(reversed).beta_hat, -f.beta_hat, 1e-14);
  }
}

TEST(LinearLog, RejectsBadInput) {
  EXPECT_THROW(fit_linear_log(std::vector<double>{1, 2}), Error);
  EXPECT_THROW(fit_linear_log(std::vector<double>{1, -2, 3}), Error);
}

TEST(Poisson, MatchesQuasiNewtonOracle) {
  std::mt19937_64 rng(42);
  const auto y = poisson_window(rng, 21, 3.0, 0.05);
  const auto f = fit_poisson(y);
  const auto o = oracle::quasi_newton_mle(y, 0.0);
  ASSERT_TRUE(f.converged);
  EXPECT_NEAR(f.beta_hat, o.b, 1e-6);
  EXPECT_NEAR(f.alpha_hat, o.a, 1e-5);
  EXPECT_LT(f.score_norm, 1e-8);
}

TEST(Poisson, ConstantWindowHasZeroScoreAtNull) {
  const std::vector<double> y(7, 10.0);
  const auto f = fit_poisson(y);
  EXPECT_NEAR(f.beta_hat, 0.0, 1e-12);
  EXPECT_NEAR(f.alpha_hat, std::log(10.0), 1e-12);
  const auto [sa, sb] = count_score(y, std::log(10.0), 0.0, 0.0);
  EXPECT_NEAR(sa, 0.0, 1e-12);
  EXPECT_NEAR(sb, 0.0, 1e-12);
}

TEST(Poisson, NullStandardErrorFormula) {
  const std::vector<double> y(21, 25.0);
  const auto f = fit_poisson(y);
  const double n = 21;
  EXPECT_NEAR(f.se_beta * f.se_beta, 12.0 / (std::exp(f.alpha_hat) * n * (n + 1) * (n - 1)), 1e-14);
}

TEST(Poisson, RejectsNonIntegerAndAllZero) {
  EXPECT_THROW(fit_poisson(std::vector<double>{1.5, 2, 3, 4}), Error);
  EXPECT_THROW(fit_poisson(std::vector<double>(10, 0.0)), Error);
}

TEST(Dispersion, MomentIdentityRecoversC) {
  for (double c : {0.0, 0.1, 0.7, 2.0}) {
    const double e_mu = 40.0, e_mu2 = 1900.0;
    const double v = e_mu + c * e_mu2 + e_mu2 - e_mu * e_mu;
    EXPECT_NEAR(dispersion_from_moments(v, e_mu, e_mu2), c, 1e-12);
  }
}

TEST(Dispersion, EquidispersedClampsToZero) {
  const std::vector<double> y{10, 10, 10, 10, 10, 10, 10};
  const std::vector<double> mu(7, 10.0);
  EXPECT_EQ(estimate_dispersion(y, mu), 0.0);
}

TEST(Dispersion, SimulatedOverdispersionRecovered) {
  std::mt19937_64 rng(9);
  double total = 0;
  const int reps = 10000;
  const double c = 2.0, mu = 30.0;
  for (int r = 0; r < reps; ++r) {
    std::vector<double> y(50);
    for (auto& v : y) v = std::poisson_distribution<long>(std::gamma_distribution<double>(1 / c, c * mu)(rng))(rng);
    total += estimate_dispersion(y, std::vector<double>(50, mu));
  }
  EXPECT_NEAR(total / reps, c, 0.15 * c);
}

TEST(NegBin, PoissonLimitWhenClamped) {
  const std::vector<double> y{20, 21, 19, 22, 24, 23, 25, 26, 24, 27};
  const auto nb = fit_negbin(y);
  ASSERT_EQ(nb.dispersion_c, 0.0);
  EXPECT_NEAR(nb.beta_hat, fit_poisson(y).beta_hat, 1e-6);
}

TEST(NegBin, MatchesOracleAndInflatesStandardError) {
  std::mt19937_64 rng(77);
  int checked = 0;
  for (int rep = 0; rep < 30; ++rep) {
    const auto y = negbin_window(rng, 21, 3.5, 0.03, 0.3);
    const auto nb = fit_negbin(y);
    if (!nb.converged || nb.dispersion_c == 0.0) continue;
    const auto o = oracle::quasi_newton_mle(y, nb.dispersion_c);
    EXPECT_NEAR(nb.beta_hat, o.b, 1e-5);
    EXPECT_GE(nb.se_beta, fit_poisson(y).se_beta);
    ++checked;
  }
  EXPECT_GT(checked, 20);
}

TEST(NegBin, ConstantWindow) {
  EXPECT_NEAR(fit_negbin(std::vector<double>(14, 12.0)).beta_hat, 0.0, 1e-12);
}

TEST(GrowthPValue, TailValues) {
  RegressionFit f;
  f.converged = true;
  f.se_beta = 1.0;
  const auto with_beta = [&](double b) {
    f.beta_hat = b;
    f.z_score = b / f.se_beta;
  };
  with_beta(0.0);
  EXPECT_EQ(*growth_pvalue(f), 0.5);
  with_beta(1.6449);
  EXPECT_NEAR(*growth_pvalue(f), 0.05, 1e-4);
  with_beta(-2.0);
  EXPECT_NEAR(*growth_pvalue(f), 0.97725, 1e-5);
  f.converged = false;
  EXPECT_FALSE(growth_pvalue(f).has_value());
}

TEST(GrowthPValue, PoissonNullIsUniform) {
  std::mt19937_64 rng(2024);
  std::vector<double> p;
  for (int r = 0; r < 10000; ++r) {
    const auto f = fit_poisson(poisson_window(rng, 21, std::log(200.0), 0.0));
    if (auto q = growth_pvalue(f)) p.push_back(*q);
  }
  EXPECT_GT(p.size(), 9900u);
  EXPECT_GT(oracle::ks_uniform(p).p_value, 0.01);
}

class RollingFitTest : public ::testing::Test {
 protected:
  StreamPanel panel_from(const std::vector<double>& v) {
    PanelBuilder b;
    b.add_series("r", "s", d0, v);
    return b.build();
  }
  Date d0 = Date::parse("2021-05-01");
};

TEST_F(RollingFitTest, CountsEligibleDates) {
  const auto fs = rolling_fit(panel_from(exponential(30, 2.0, 0.04)), "r", "s", 21, RegressionModel::linear_log);
  ASSERT_EQ(fs.fits.size(), 10u);
  EXPECT_EQ(fs.fits.front().date, d0 + 20);
  for (const auto& f : fs.fits) EXPECT_NEAR(f.fit.beta_hat, 0.04, 1e-12);
}

TEST_F(RollingFitTest, EightDayHoleSuppressesOverlappingWindows) {
  auto v = exponential(60, 2.0, 0.01);
  for (int i = 25; i < 33; ++i) v[i] = std::nan("");
  const auto fs = rolling_fit(panel_from(v), "r", "s", 14, RegressionModel::linear_log);
  for (const auto& f : fs.fits) {
    const int end = f.date - d0;
    EXPECT_TRUE(end < 25 || end - 13 > 32) << end;
  }
  EXPECT_FALSE(fs.failures.empty());
}

TEST_F(RollingFitTest, CsvHasDocumentedHeader) {
  const auto fs = rolling_fit(panel_from(exponential(25, 2.0, 0.04)), "r", "s", 21, RegressionModel::linear_log);
  std::ostringstream out;
  write_fit_series_csv(out, std::span(&fs, 1));
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "region_id,stream_id,date,model,beta,se,z,p,converged");
}
