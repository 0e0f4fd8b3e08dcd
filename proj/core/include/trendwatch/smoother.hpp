#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trendwatch/date.hpp"
#include "trendwatch/panel.hpp"

namespace trendwatch {

enum class SmoothModel { poisson, lognormal };
enum class PenaltyKind { l1, l2 };
/// Where the third-difference penalty acts. log_phi keeps the objective
/// convex; phi follows the literal formulation and carries no such guarantee.
enum class PenaltySpace { log_phi, phi };

std::string to_string(SmoothModel model);
std::string to_string(PenaltyKind kind);
std::string to_string(PenaltySpace space);
SmoothModel parse_smooth_model(std::string_view text);
PenaltyKind parse_penalty_kind(std::string_view text);
PenaltySpace parse_penalty_space(std::string_view text);

using WeekdayEffects = std::array<double, 7>;  // index 0 = Monday

struct SeriesSpec {
  std::string name;
  DailySeries series;  ///< NaN entries are treated as unobserved
  SmoothModel model = SmoothModel::poisson;
  bool correct_weekday = true;
};

struct SmoothConfig {
  PenaltyKind penalty = PenaltyKind::l1;
  double lambda = 1e4;
  int max_iter = 500;
  double tol = 1e-8;        ///< relative objective change
  double sigma_tol = 1e-6;  ///< relative change of each lognormal σ²
  PenaltySpace space = PenaltySpace::log_phi;

  void validate() const;
};

inline constexpr std::size_t kMinSmoothLength = 21;

struct SeriesFit {
  std::string name;
  SmoothModel model = SmoothModel::poisson;
  bool corrected = false;
  WeekdayEffects alpha{};  ///< sums to zero; all zero when uncorrected
  double theta = 0.0;      ///< log scale relative to the first series
  double sigma2 = 0.0;     ///< lognormal residual variance; 0 for Poisson
  std::vector<double> corrected_xi;  ///< y · exp(−α_wd), NaN where unobserved
};

struct SmoothResult {
  Date start;
  std::vector<double> log_phi;
  std::vector<SeriesFit> series;
  /// Objective at the initial point followed by one value per iteration.
  std::vector<double> objective_trace;
  double lambda = 0.0;
  PenaltyKind penalty = PenaltyKind::l1;
  PenaltySpace space = PenaltySpace::log_phi;
  bool converged = false;
  int iterations = 0;

  std::size_t size() const { return log_phi.size(); }
  Date end() const { return start + static_cast<int>(log_phi.size()) - 1; }
  const SeriesFit& fit(std::string_view name) const;
};

/// Penalized likelihood smoothing of one series: α, z = log φ minimise
/// NLL(y | α, z) + λ P(Δ³z). Non-convergence within max_iter is reported in
/// `converged` together with the best iterate.
SmoothResult smooth_univariate(const SeriesSpec& series, const SmoothConfig& config);

/// Joint smoothing with a shared trend: log μ_{s,t} = θ_s + α_{s,wd(t)} + z_t,
/// θ_1 = 0. The likelihood terms of all series are summed. Series are cut to
/// their common date range.
SmoothResult smooth_multivariate(std::span<const SeriesSpec> series, const SmoothConfig& config);

/// ξ_t = y_t · exp(−α_{wd(t)}).
DailySeries weekday_correct(const DailySeries& series, const WeekdayEffects& alpha);
/// Inverse of weekday_correct.
DailySeries weekday_restore(const DailySeries& series, const WeekdayEffects& alpha);

/// g_t = log φ_t − log φ_{t−1}, dated t; the first entry is start + 1.
DailySeries growth_series(const SmoothResult& result);

/// `date,log_phi,xi_<name>...`
void write_smooth_csv(std::ostream& out, const SmoothResult& result);
/// Sidecar with α, θ, σ², λ, objective trace and convergence flags.
std::string smooth_result_json(const SmoothResult& result);

}  // namespace trendwatch
