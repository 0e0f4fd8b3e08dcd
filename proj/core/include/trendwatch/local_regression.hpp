#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trendwatch/date.hpp"
#include "trendwatch/panel.hpp"

namespace trendwatch {

enum class RegressionModel { linear_log, poisson, negbin };

std::string to_string(RegressionModel model);
RegressionModel parse_regression_model(std::string_view text);

/// Growth-rate fit over one window with day index x = 1..n.
struct RegressionFit {
  RegressionModel model = RegressionModel::linear_log;
  double alpha_hat = 0.0;
  double beta_hat = 0.0;  ///< per-day growth rate
  double se_beta = 0.0;
  double z_score = 0.0;
  double p_one_sided = 0.5;  ///< 1 − Φ(z): evidence against β ≤ 0
  int n = 0;
  double dispersion_c = 0.0;  ///< NegBin only: c = 1/r
  bool converged = false;
  int iterations = 0;
  /// Infinity norm of the score at the returned estimate (GLM fits).
  double score_norm = 0.0;
};

/// Ordinary least squares of log y on x. Applies the y + 0.5 correction to
/// the whole window when any value is 0. se uses σ̂² = RSS / (n − 2).
RegressionFit fit_linear_log(std::span<const double> values);

/// Poisson regression with log link, fitted by Newton–Raphson with step
/// halving. se from the inverse Fisher information. Non-convergence is
/// reported through `converged`, not thrown.
RegressionFit fit_poisson(std::span<const double> counts);

/// Plug-in dispersion ĉ = (V̂(y) − Ê(μ) + Ê²(μ)) / Ê(μ²) − 1, clamped at 0.
double estimate_dispersion(std::span<const double> counts, std::span<const double> mu);
/// The same estimator from precomputed moments, without the clamp.
double dispersion_from_moments(double var_y, double mean_mu, double mean_mu_sq);

/// Negative Binomial regression at the fixed plug-in dispersion obtained
/// from a Poisson fit on the same window.
RegressionFit fit_negbin(std::span<const double> counts);

/// Maximum likelihood at a given dispersion c (c = 0 is Poisson).
RegressionFit fit_count_glm(std::span<const double> counts, double dispersion_c);

/// One-sided p-value 1 − Φ(β̂/se). Absent for non-converged fits.
std::optional<double> growth_pvalue(const RegressionFit& fit);

/// Score vector (∂ℓ/∂α, ∂ℓ/∂β) of the count likelihood at (alpha, beta).
std::pair<double, double> count_score(std::span<const double> counts, double alpha, double beta,
                                      double dispersion_c);

RegressionFit fit_window(std::span<const double> values, RegressionModel model);

struct DatedFit {
  Date date;
  RegressionFit fit;
};

struct FitFailure {
  Date date;
  std::string reason;
};

/// Per-date fits of one (region, stream) pair; each fit's window ends on its date.
struct FitSeries {
  std::string region_id;
  std::string stream_id;
  RegressionModel model = RegressionModel::linear_log;
  int window_n = 0;
  std::vector<DatedFit> fits;         ///< strictly increasing dates
  std::vector<FitFailure> failures;  ///< eligible dates whose window could not be fitted

  const RegressionFit* at(Date d) const;
};

/// Fits every end date with window_n days of trailing history. Windows that
/// hit a gap or a fit error are recorded in `failures`.
FitSeries rolling_fit(const StreamPanel& panel, const std::string& region, const std::string& stream,
                      int window_n, RegressionModel model, GapPolicy gap_policy = GapPolicy::interpolate);

/// `region_id,stream_id,date,model,beta,se,z,p,converged`
void write_fit_series_csv(std::ostream& out, std::span<const FitSeries> series);

}  // namespace trendwatch
