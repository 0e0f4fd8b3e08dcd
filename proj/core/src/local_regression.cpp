#include "trendwatch/local_regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "trendwatch/csv.hpp"
#include "trendwatch/error.hpp"
#include "trendwatch/normal.hpp"

namespace trendwatch {

namespace {

constexpr int kMaxGlmIterations = 50;
constexpr double kScoreTolerance = 1e-8;
constexpr double kIntegerTolerance = 1e-9;
constexpr double kMaxLinearPredictor = 700.0;

void check_window_size(std::size_t n) {
  if (n < 3) throw DataError("window_size", "window must contain at least 3 observations");
}

void finish_test_statistic(RegressionFit& fit) {
  if (fit.se_beta > 0.0) {
    fit.z_score = fit.beta_hat / fit.se_beta;
  } else if (fit.beta_hat == 0.0) {
    fit.z_score = 0.0;
  } else {
    fit.z_score = fit.beta_hat > 0.0 ? std::numeric_limits<double>::infinity()
                                     : -std::numeric_limits<double>::infinity();
  }
  fit.p_one_sided = normal_sf(fit.z_score);
}

void check_counts(std::span<const double> y) {
  check_window_size(y.size());
  bool any_positive = false;
  for (double v : y) {
    if (!std::isfinite(v) || v < 0.0) throw DataError("negative_value", "counts must be finite and >= 0");
    if (std::abs(v - std::round(v)) > kIntegerTolerance) {
      throw DataError("non_integer", "count models require integer-valued observations");
    }
    any_positive = any_positive || v > 0.0;
  }
  if (!any_positive) throw NumericError("degenerate", "all-zero window has no finite maximum likelihood");
}

struct GlmState {
  double a = 0.0;  // intercept at the window centre
  double b = 0.0;  // slope
};

/// Log-likelihood (up to y-only constants) under log link with centred
/// predictor a + b·(i − ī). Returns −inf if the predictor overflows.
double count_loglik(std::span<const double> y, GlmState s, double c) {
  const double centre = 0.5 * static_cast<double>(y.size() + 1);
  long double ll = 0.0L;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double eta = s.a + s.b * (static_cast<double>(i + 1) - centre);
    if (eta > kMaxLinearPredictor) return -std::numeric_limits<double>::infinity();
    const double mu = std::exp(eta);
    if (c > 0.0) {
      ll += y[i] * eta - (y[i] + 1.0 / c) * std::log1p(c * mu);
    } else {
      ll += y[i] * eta - mu;
    }
  }
  return static_cast<double>(ll);
}

struct ScoreInfo {
  long double g0 = 0, g1 = 0;            // score in the centred parametrisation
  long double h00 = 0, h01 = 0, h11 = 0;  // observed information
  long double e00 = 0, e01 = 0, e11 = 0;  // expected (Fisher) information
  long double u_alpha = 0, u_beta = 0;    // score in the x = i parametrisation
};

ScoreInfo score_and_information(std::span<const double> y, GlmState s, double c) {
  const double centre = 0.5 * static_cast<double>(y.size() + 1);
  ScoreInfo r;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double x = static_cast<double>(i + 1);
    const double xc = x - centre;
    const double mu = std::exp(s.a + s.b * xc);
    const double denom = 1.0 + c * mu;
    const long double score = (static_cast<long double>(y[i]) - mu) / denom;
    const long double h = mu * (1.0 + c * y[i]) / (denom * denom);
    const long double e = mu / denom;
    r.g0 += score;
    r.g1 += score * xc;
    r.h00 += h;
    r.h01 += h * xc;
    r.h11 += h * xc * xc;
    r.e00 += e;
    r.e01 += e * xc;
    r.e11 += e * xc * xc;
    r.u_alpha += score;
    r.u_beta += score * x;
  }
  return r;
}

double score_inf_norm(const ScoreInfo& r) {
  return static_cast<double>(std::max(std::fabs(r.u_alpha), std::fabs(r.u_beta)));
}

RegressionFit fit_count_glm_from(std::span<const double> y, double c, GlmState state) {
  RegressionFit fit;
  fit.n = static_cast<int>(y.size());
  fit.dispersion_c = c;
  fit.model = c > 0.0 ? RegressionModel::negbin : RegressionModel::poisson;

  double ll = count_loglik(y, state, c);
  if (!std::isfinite(ll)) {
    double mean = 0.0;
    for (double v : y) mean += v;
    state = {std::log(mean / static_cast<double>(y.size())), 0.0};
    ll = count_loglik(y, state, c);
  }

  ScoreInfo si = score_and_information(y, state, c);
  int iter = 0;
  while (score_inf_norm(si) >= kScoreTolerance && iter < kMaxGlmIterations) {
    ++iter;
    const long double det = si.h00 * si.h11 - si.h01 * si.h01;
    if (!(det > 0.0L)) break;
    const double da = static_cast<double>((si.h11 * si.g0 - si.h01 * si.g1) / det);
    const double db = static_cast<double>((si.h00 * si.g1 - si.h01 * si.g0) / det);
    double step = 1.0;
    bool accepted = false;
    for (int halving = 0; halving < 40; ++halving) {
      const GlmState trial{state.a + step * da, state.b + step * db};
      const double trial_ll = count_loglik(y, trial, c);
      if (std::isfinite(trial_ll) && trial_ll >= ll - 1e-12 * std::max(1.0, std::fabs(ll))) {
        state = trial;
        ll = trial_ll;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    si = score_and_information(y, state, c);
    if (!accepted) break;
  }

  const double centre = 0.5 * static_cast<double>(y.size() + 1);
  fit.iterations = iter;
  fit.beta_hat = state.b;
  fit.alpha_hat = state.a - state.b * centre;
  fit.score_norm = score_inf_norm(si);
  fit.converged = fit.score_norm < kScoreTolerance;
  const long double det = si.e00 * si.e11 - si.e01 * si.e01;
  fit.se_beta = det > 0.0L ? std::sqrt(static_cast<double>(si.e00 / det))
                           : std::numeric_limits<double>::infinity();
  finish_test_statistic(fit);
  return fit;
}

GlmState initial_state(std::span<const double> y) {
  std::vector<double> shifted(y.begin(), y.end());
  for (double& v : shifted) v += 0.5;
  const RegressionFit start = fit_linear_log(shifted);
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  const double slope = std::clamp(start.beta_hat, -1.0, 1.0);
  return {std::log(mean), slope};
}

}  // namespace

std::string to_string(RegressionModel model) {
  switch (model) {
    case RegressionModel::linear_log: return "linear_log";
    case RegressionModel::poisson: return "poisson";
    case RegressionModel::negbin: return "negbin";
  }
  return "unknown";
}

RegressionModel parse_regression_model(std::string_view text) {
  if (text == "linear_log" || text == "lognormal" || text == "linear") return RegressionModel::linear_log;
  if (text == "poisson") return RegressionModel::poisson;
  if (text == "negbin" || text == "negative_binomial") return RegressionModel::negbin;
  throw UsageError("unknown regression model '" + std::string(text) +
                   "' (expected linear_log|poisson|negbin)");
}

RegressionFit fit_linear_log(std::span<const double> values) {
  const std::size_t n = values.size();
  check_window_size(n);
  bool has_zero = false;
  for (double v : values) {
    if (!std::isfinite(v) || v < 0.0) throw DataError("negative_value", "window values must be finite and >= 0");
    has_zero = has_zero || v == 0.0;
  }
  std::vector<double> logs(n);
  for (std::size_t i = 0; i < n; ++i) logs[i] = std::log(has_zero ? values[i] + 0.5 : values[i]);

  const double nd = static_cast<double>(n);
  const double denom = nd * (nd + 1.0) * (nd - 1.0);
  // β̂ = Σ w_i log y_i with w_i = 6(2i − n − 1)/(n(n+1)(n−1)); the weights are
  // antisymmetric, so pair opposite days to keep the estimate shift-free.
  double beta = 0.0;
  for (std::size_t i = 1; i <= n / 2; ++i) {
    const std::size_t j = n + 1 - i;
    const double w = 6.0 * (2.0 * static_cast<double>(j) - nd - 1.0) / denom;
    beta += w * (logs[j - 1] - logs[i - 1]);
  }
  double mean = 0.0;
  for (double l : logs) mean += l;
  mean /= nd;
  const double centre = 0.5 * (nd + 1.0);
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = (logs[i] - mean) - beta * (static_cast<double>(i + 1) - centre);
    rss += r * r;
  }
  RegressionFit fit;
  fit.model = RegressionModel::linear_log;
  fit.n = static_cast<int>(n);
  fit.beta_hat = beta;
  fit.alpha_hat = mean - beta * centre;
  const double sigma2 = rss / (nd - 2.0);
  fit.se_beta = std::sqrt(12.0 * sigma2 / denom);
  fit.converged = true;
  finish_test_statistic(fit);
  return fit;
}

RegressionFit fit_count_glm(std::span<const double> counts, double dispersion_c) {
  check_counts(counts);
  if (!(dispersion_c >= 0.0)) throw UsageError("dispersion must be >= 0");
  return fit_count_glm_from(counts, dispersion_c, initial_state(counts));
}

RegressionFit fit_poisson(std::span<const double> counts) { return fit_count_glm(counts, 0.0); }

double estimate_dispersion(std::span<const double> counts, std::span<const double> mu) {
  if (counts.size() != mu.size() || counts.size() < 2) {
    throw UsageError("estimate_dispersion needs matching windows of at least 2 values");
  }
  const double n = static_cast<double>(counts.size());
  double ymean = 0.0, mu_mean = 0.0, mu_sq = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    ymean += counts[i];
    mu_mean += mu[i];
    mu_sq += mu[i] * mu[i];
  }
  ymean /= n;
  mu_mean /= n;
  mu_sq /= n;
  double var_y = 0.0;
  for (double v : counts) var_y += (v - ymean) * (v - ymean);
  var_y /= n - 1.0;
  if (!(mu_sq > 0.0)) return 0.0;
  return std::max(0.0, dispersion_from_moments(var_y, mu_mean, mu_sq));
}

double dispersion_from_moments(double var_y, double mean_mu, double mean_mu_sq) {
  return (var_y - mean_mu + mean_mu * mean_mu) / mean_mu_sq - 1.0;
}

RegressionFit fit_negbin(std::span<const double> counts) {
  check_counts(counts);
  const RegressionFit pois = fit_count_glm_from(counts, 0.0, initial_state(counts));
  std::vector<double> mu(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    mu[i] = std::exp(pois.alpha_hat + pois.beta_hat * static_cast<double>(i + 1));
  }
  const double c = estimate_dispersion(counts, mu);
  const double centre = 0.5 * static_cast<double>(counts.size() + 1);
  RegressionFit fit = fit_count_glm_from(
      counts, c, GlmState{pois.alpha_hat + pois.beta_hat * centre, pois.beta_hat});
  fit.model = RegressionModel::negbin;
  fit.dispersion_c = c;
  fit.converged = fit.converged && pois.converged;
  return fit;
}

std::optional<double> growth_pvalue(const RegressionFit& fit) {
  if (!fit.converged || std::isnan(fit.z_score)) return std::nullopt;
  return normal_sf(fit.z_score);
}

std::pair<double, double> count_score(std::span<const double> counts, double alpha, double beta,
                                      double dispersion_c) {
  long double ua = 0.0L, ub = 0.0L;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double x = static_cast<double>(i + 1);
    const double mu = std::exp(alpha + beta * x);
    const long double s = (static_cast<long double>(counts[i]) - mu) / (1.0 + dispersion_c * mu);
    ua += s;
    ub += s * x;
  }
  return {static_cast<double>(ua), static_cast<double>(ub)};
}

RegressionFit fit_window(std::span<const double> values, RegressionModel model) {
  switch (model) {
    case RegressionModel::linear_log: return fit_linear_log(values);
    case RegressionModel::poisson: return fit_poisson(values);
    case RegressionModel::negbin: return fit_negbin(values);
  }
  throw UsageError("unknown regression model");
}

const RegressionFit* FitSeries::at(Date d) const {
  auto it = std::lower_bound(fits.begin(), fits.end(), d,
                             [](const DatedFit& f, Date x) { return f.date < x; });
  return it != fits.end() && it->date == d ? &it->fit : nullptr;
}

FitSeries rolling_fit(const StreamPanel& panel, const std::string& region, const std::string& stream,
                      int window_n, RegressionModel model, GapPolicy gap_policy) {
  if (window_n < 3) throw UsageError("window size must be at least 3");
  const DailySeries& series = panel.series(region, stream);
  if (model != RegressionModel::linear_log && panel.stream_kind(stream) == StreamKind::rate) {
    throw DataError("stream_kind", "stream '" + stream + "' holds rates; " + to_string(model) +
                                       " requires counts (use linear_log)");
  }
  FitSeries out;
  out.region_id = region;
  out.stream_id = stream;
  out.model = model;
  out.window_n = window_n;
  const auto n = static_cast<std::size_t>(window_n);
  for (Date end = series.first() + window_n - 1; end <= series.last(); ++end) {
    try {
      Window w = extract_window(series, end, n, gap_policy);
      if (model != RegressionModel::linear_log && w.any_interpolated()) {
        for (double& v : w.values) v = std::round(v);
      }
      out.fits.push_back({end, fit_window(w.values, model)});
    } catch (const Error& e) {
      out.failures.push_back({end, e.what()});
    }
  }
  return out;
}

void write_fit_series_csv(std::ostream& out, std::span<const FitSeries> series) {
  out << "region_id,stream_id,date,model,beta,se,z,p,converged\n";
  for (const auto& s : series) {
    for (const auto& f : s.fits) {
      write_csv_record(out, {s.region_id, s.stream_id, f.date.iso(), to_string(f.fit.model),
                             format_double(f.fit.beta_hat), format_double(f.fit.se_beta),
                             format_double(f.fit.z_score), format_double(f.fit.p_one_sided),
                             f.fit.converged ? "true" : "false"});
    }
  }
}

}  // namespace trendwatch
