#include "trendwatch/smoother.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include <nlohmann/json.hpp>

#include "trendwatch/csv.hpp"
#include "trendwatch/error.hpp"
#include "trendwatch/trend_filter.hpp"

namespace trendwatch {

std::string to_string(SmoothModel model) {
  return model == SmoothModel::poisson ? "poisson" : "lognormal";
}
std::string to_string(PenaltyKind kind) { return kind == PenaltyKind::l1 ? "L1" : "L2"; }
std::string to_string(PenaltySpace space) {
  return space == PenaltySpace::log_phi ? "log_phi" : "phi";
}

SmoothModel parse_smooth_model(std::string_view text) {
  if (text == "poisson") return SmoothModel::poisson;
  if (text == "lognormal") return SmoothModel::lognormal;
  throw UsageError("unknown smoothing model '" + std::string(text) + "'");
}

PenaltyKind parse_penalty_kind(std::string_view text) {
  if (text == "L1" || text == "l1") return PenaltyKind::l1;
  if (text == "L2" || text == "l2") return PenaltyKind::l2;
  throw UsageError("unknown penalty kind '" + std::string(text) + "'");
}

PenaltySpace parse_penalty_space(std::string_view text) {
  if (text == "log_phi") return PenaltySpace::log_phi;
  if (text == "phi") return PenaltySpace::phi;
  throw UsageError("unknown penalty space '" + std::string(text) + "'");
}

void SmoothConfig::validate() const {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw UsageError("lambda must be positive");
  if (!(tol > 0.0)) throw UsageError("tol must be positive");
  if (!(sigma_tol > 0.0)) throw UsageError("sigma_tol must be positive");
  if (max_iter < 1) throw UsageError("max_iter must be at least 1");
}

const SeriesFit& SmoothResult::fit(std::string_view name) const {
  for (const auto& s : series) {
    if (s.name == name) return s;
  }
  throw UsageError("no smoothed series named '" + std::string(name) + "'");
}

namespace {

constexpr double kLogTwoPi = 1.8378770664093454836;
constexpr double kSigmaFloor = 1e-12;
constexpr double kZeroTotalFloor = 1e-3;
constexpr int kOrder = 3;

struct Track {
  SmoothModel model = SmoothModel::poisson;
  bool corrected = false;
  std::vector<double> y;    // NaN where unobserved
  std::vector<double> ell;  // lognormal: log of (possibly shifted) y
  std::vector<double> lg;   // Poisson: lgamma(y + 1)
  std::array<double, 7> a{};  // θ + α per weekday
  double sigma2 = 1.0;
  std::size_t nobs = 0;
};

struct Problem {
  std::size_t T = 0;
  std::vector<int> wd;
  std::vector<Track> tracks;
  PenaltyKind penalty = PenaltyKind::l1;
  PenaltySpace space = PenaltySpace::log_phi;
  double lambda = 1.0;
};

double penalty_on(const Problem& p, std::span<const double> values) {
  return p.penalty == PenaltyKind::l1 ? difference_l1(values, kOrder)
                                      : difference_l2_squared(values, kOrder);
}

double penalty_of_z(const Problem& p, std::span<const double> z) {
  if (p.space == PenaltySpace::log_phi) return penalty_on(p, z);
  std::vector<double> phi(z.size());
  std::transform(z.begin(), z.end(), phi.begin(), [](double v) { return std::exp(v); });
  return penalty_on(p, phi);
}

double track_nll(const Problem& p, const Track& tr, std::span<const double> z) {
  long double acc = 0.0L;
  if (tr.model == SmoothModel::poisson) {
    for (std::size_t t = 0; t < p.T; ++t) {
      if (std::isnan(tr.y[t])) continue;
      const double eta = tr.a[p.wd[t]] + z[t];
      acc += std::exp(eta) - tr.y[t] * eta + tr.lg[t];
    }
  } else {
    const double half_log = 0.5 * (kLogTwoPi + std::log(tr.sigma2));
    for (std::size_t t = 0; t < p.T; ++t) {
      if (std::isnan(tr.y[t])) continue;
      const double r = tr.ell[t] - tr.a[p.wd[t]] - z[t];
      acc += half_log + r * r / (2.0 * tr.sigma2);
    }
  }
  return static_cast<double>(acc);
}

double objective(const Problem& p, std::span<const double> z) {
  double f = 0.0;
  for (const auto& tr : p.tracks) f += track_nll(p, tr, z);
  return f + p.lambda * penalty_of_z(p, z);
}

void update_sigma(const Problem& p, Track& tr, std::span<const double> z) {
  if (tr.model != SmoothModel::lognormal) return;
  long double rss = 0.0L;
  for (std::size_t t = 0; t < p.T; ++t) {
    if (std::isnan(tr.y[t])) continue;
    const double r = tr.ell[t] - tr.a[p.wd[t]] - z[t];
    rss += static_cast<long double>(r) * r;
  }
  tr.sigma2 = std::max(static_cast<double>(rss / static_cast<long double>(tr.nobs)), kSigmaFloor);
}

// Σ_d log((Y_d + κ) / S_d) = 0 for κ > −min Y_d: the weekday block of a
// Poisson series whose level is pinned (Σα = 0, no free θ).
std::array<double, 7> pinned_poisson_effects(const std::array<double, 7>& Y,
                                             const std::array<double, 7>& S) {
  const auto total = [&](double kappa) {
    double s = 0.0;
    for (int d = 0; d < 7; ++d) s += std::log((Y[d] + kappa) / S[d]);
    return s;
  };
  const double ymin = *std::min_element(Y.begin(), Y.end());
  double lo = -ymin * (1.0 - 1e-12);
  double hi = std::max(1.0, std::fabs(lo));
  while (total(hi) < 0.0) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, std::fabs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (total(mid) < 0.0 ? lo : hi) = mid;
  }
  const double kappa = 0.5 * (lo + hi);
  std::array<double, 7> out{};
  for (int d = 0; d < 7; ++d) out[d] = std::log((Y[d] + kappa) / S[d]);
  return out;
}

void update_levels(const Problem& p, Track& tr, std::span<const double> z, bool pinned) {
  const int groups = tr.corrected ? 7 : 1;
  std::array<double, 7> num{}, den{};
  std::array<int, 7> count{};
  for (std::size_t t = 0; t < p.T; ++t) {
    if (std::isnan(tr.y[t])) continue;
    const int g = tr.corrected ? p.wd[t] : 0;
    ++count[g];
    if (tr.model == SmoothModel::poisson) {
      num[g] += tr.y[t];
      den[g] += std::exp(z[t]);
    } else {
      num[g] += tr.ell[t] - z[t];
    }
  }
  // A weekday with no observations keeps the pooled value.
  double pooled_num = 0.0, pooled_den = 0.0;
  int pooled_count = 0;
  for (int g = 0; g < groups; ++g) {
    pooled_num += num[g];
    pooled_den += den[g];
    pooled_count += count[g];
  }
  for (int g = 0; g < groups; ++g) {
    if (count[g] == 0) {
      num[g] = pooled_num / groups;
      den[g] = pooled_den / groups;
      count[g] = std::max(1, pooled_count / groups);
    }
  }

  std::array<double, 7> a{};
  if (tr.model == SmoothModel::poisson) {
    for (int g = 0; g < groups; ++g) num[g] = std::max(num[g], kZeroTotalFloor);
    if (!pinned) {
      for (int g = 0; g < groups; ++g) a[g] = std::log(num[g] / den[g]);
    } else if (groups == 7) {
      a = pinned_poisson_effects(num, den);
    }
  } else {
    std::array<double, 7> mean{};
    for (int g = 0; g < groups; ++g) mean[g] = num[g] / count[g];
    if (!pinned) {
      a = mean;
    } else if (groups == 7) {
      // min Σ n_d (α_d − m_d)² subject to Σ α_d = 0
      double sm = 0.0, sinv = 0.0;
      for (int d = 0; d < 7; ++d) {
        sm += mean[d];
        sinv += 1.0 / count[d];
      }
      const double kappa = sm / sinv;
      for (int d = 0; d < 7; ++d) a[d] = mean[d] - kappa / count[d];
    }
  }
  if (groups == 1) a.fill(a[0]);
  tr.a = a;
}

double mean_level(const Track& tr) {
  return std::accumulate(tr.a.begin(), tr.a.end(), 0.0) / 7.0;
}

std::vector<double> solve_subproblem(const Problem& p, std::span<const double> w,
                                     std::span<const double> u) {
  if (p.penalty == PenaltyKind::l1) {
    return weighted_l1_trend_filter(w, u, p.lambda, kOrder).solution;
  }
  return weighted_l2_trend_filter(w, u, p.lambda, kOrder);
}

// One proximal-Newton step with a diagonal Hessian on the trend block,
// followed by backtracking on the full objective. Returns the new objective.
double update_trend(const Problem& p, std::vector<double>& z, double f_current) {
  const std::size_t T = p.T;
  const bool in_phi = p.space == PenaltySpace::phi;
  std::vector<double> x(T);  // the variable the penalty acts on
  for (std::size_t t = 0; t < T; ++t) x[t] = in_phi ? std::exp(z[t]) : z[t];

  std::vector<double> g(T, 0.0), h(T, 0.0);
  for (const auto& tr : p.tracks) {
    for (std::size_t t = 0; t < T; ++t) {
      if (std::isnan(tr.y[t])) continue;
      const double a = tr.a[p.wd[t]];
      if (tr.model == SmoothModel::poisson) {
        if (!in_phi) {
          const double mu = std::exp(a + z[t]);
          g[t] += mu - tr.y[t];
          h[t] += mu;
        } else {
          g[t] += std::exp(a) - tr.y[t] / x[t];
          h[t] += std::max(tr.y[t], 0.5) / (x[t] * x[t]);
        }
      } else {
        const double r = tr.ell[t] - a - z[t];
        if (!in_phi) {
          g[t] -= r / tr.sigma2;
          h[t] += 1.0 / tr.sigma2;
        } else {
          g[t] -= r / (tr.sigma2 * x[t]);
          h[t] += 1.0 / (tr.sigma2 * x[t] * x[t]);
        }
      }
    }
  }
  const double hmax = *std::max_element(h.begin(), h.end());
  const double hmin = std::max(hmax * 1e-8, std::numeric_limits<double>::min());
  std::vector<double> u(T);
  for (std::size_t t = 0; t < T; ++t) {
    h[t] = std::max(h[t], hmin);
    u[t] = x[t] - g[t] / h[t];
  }
  const std::vector<double> v = solve_subproblem(p, h, u);

  std::vector<double> d(T);
  double decrement = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    d[t] = v[t] - x[t];
    decrement += g[t] * d[t];
  }
  decrement += p.lambda * (penalty_on(p, v) - penalty_on(p, x));
  if (!(decrement < 0.0)) return f_current;

  std::vector<double> trial(T);
  double step = 1.0;
  for (int ls = 0; ls < 60; ++ls, step *= 0.5) {
    bool valid = true;
    for (std::size_t t = 0; t < T && valid; ++t) {
      const double xt = x[t] + step * d[t];
      if (in_phi) {
        valid = xt > 0.0;
        trial[t] = std::log(xt);
      } else {
        trial[t] = xt;
      }
    }
    if (!valid) continue;
    const double f = objective(p, trial);
    if (f <= f_current + 1e-4 * step * decrement) {
      z = trial;
      return f;
    }
  }
  return f_current;
}

std::vector<double> initial_trend(const Track& tr) {
  const std::size_t T = tr.y.size();
  double total = 0.0;
  std::size_t n = 0;
  for (double v : tr.y) {
    if (!std::isnan(v)) {
      total += v;
      ++n;
    }
  }
  const double fallback = n > 0 ? total / static_cast<double>(n) : 0.0;
  std::vector<double> z(T);
  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t lo = t >= 3 ? t - 3 : 0;
    const std::size_t hi = std::min(T - 1, t + 3);
    double s = 0.0;
    int c = 0;
    for (std::size_t k = lo; k <= hi; ++k) {
      if (std::isnan(tr.y[k])) continue;
      s += tr.y[k];
      ++c;
    }
    z[t] = std::log((c > 0 ? s / c : fallback) + 0.5);
  }
  return z;
}

Problem build_problem(std::span<const SeriesSpec> specs, const SmoothConfig& config, Date& start) {
  if (specs.empty()) throw UsageError("no series to smooth");
  Date first = specs.front().series.first();
  Date last = specs.front().series.last();
  for (const auto& s : specs) {
    if (s.series.empty()) throw DataError("empty_series", "series '" + s.name + "' is empty");
    first = std::max(first, s.series.first());
    last = std::min(last, s.series.last());
  }
  if (last < first) throw DataError("empty_intersection", "smoothed series share no dates");
  const std::size_t T = static_cast<std::size_t>(last - first + 1);
  if (T < kMinSmoothLength) {
    throw DataError("too_short", "smoothing needs at least " + std::to_string(kMinSmoothLength) +
                                     " days, got " + std::to_string(T));
  }
  start = first;

  Problem p;
  p.T = T;
  p.penalty = config.penalty;
  p.space = config.space;
  p.lambda = config.lambda;
  p.wd.resize(T);
  for (std::size_t t = 0; t < T; ++t) p.wd[t] = (first + static_cast<int>(t)).weekday();

  for (const auto& s : specs) {
    Track tr;
    tr.model = s.model;
    tr.corrected = s.correct_weekday;
    tr.y.resize(T);
    const auto raw = s.series.raw();
    const int offset = first - s.series.first();
    bool any_zero = false;
    double total = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      const double v = raw[static_cast<std::size_t>(offset) + t];
      tr.y[t] = v;
      if (std::isnan(v)) continue;
      if (v < 0.0 || !std::isfinite(v)) {
        throw DataError("invalid_value", "series '" + s.name + "' has a negative or infinite value");
      }
      any_zero = any_zero || v == 0.0;
      total += v;
      ++tr.nobs;
    }
    if (tr.nobs == 0) throw DataError("empty_series", "series '" + s.name + "' has no observations");
    if (s.model == SmoothModel::poisson) {
      if (total <= 0.0) throw DataError("degenerate", "series '" + s.name + "' is all zero");
      tr.lg.resize(T);
      for (std::size_t t = 0; t < T; ++t) {
        tr.lg[t] = std::isnan(tr.y[t]) ? 0.0 : std::lgamma(tr.y[t] + 1.0);
      }
    } else {
      const double shift = any_zero ? 0.5 : 0.0;
      tr.ell.resize(T);
      for (std::size_t t = 0; t < T; ++t) {
        tr.ell[t] = std::isnan(tr.y[t]) ? tr.y[t] : std::log(tr.y[t] + shift);
      }
    }
    p.tracks.push_back(std::move(tr));
  }
  return p;
}

}  // namespace

SmoothResult smooth_multivariate(std::span<const SeriesSpec> specs, const SmoothConfig& config) {
  config.validate();
  SmoothResult result;
  Problem p = build_problem(specs, config, result.start);
  result.lambda = config.lambda;
  result.penalty = config.penalty;
  result.space = config.space;

  std::vector<double> z = initial_trend(p.tracks.front());
  for (auto& tr : p.tracks) update_sigma(p, tr, z);
  double f = objective(p, z);
  result.objective_trace.push_back(f);

  const bool in_phi = p.space == PenaltySpace::phi;
  for (int iter = 1; iter <= config.max_iter; ++iter) {
    const double f_before = f;
    std::vector<double> sigma_before;
    for (const auto& tr : p.tracks) sigma_before.push_back(tr.sigma2);

    // Variance block: exact minimiser.
    for (auto& tr : p.tracks) update_sigma(p, tr, z);
    double f_sigma = objective(p, z);
    if (f_sigma > f) {
      for (std::size_t k = 0; k < p.tracks.size(); ++k) p.tracks[k].sigma2 = sigma_before[k];
    } else {
      f = f_sigma;
    }

    // Weekday and scale block: exact minimiser, then fix the gauge θ_1 = 0.
    {
      std::vector<std::array<double, 7>> saved;
      for (const auto& tr : p.tracks) saved.push_back(tr.a);
      for (std::size_t k = 0; k < p.tracks.size(); ++k) {
        update_levels(p, p.tracks[k], z, in_phi && k == 0);
      }
      std::vector<double> z_shifted = z;
      if (!in_phi) {
        const double shift = mean_level(p.tracks.front());
        for (auto& v : z_shifted) v += shift;
        for (auto& tr : p.tracks) {
          for (auto& v : tr.a) v -= shift;
        }
      }
      const double f_levels = objective(p, z_shifted);
      if (f_levels > f) {
        for (std::size_t k = 0; k < p.tracks.size(); ++k) p.tracks[k].a = saved[k];
      } else {
        z = std::move(z_shifted);
        f = f_levels;
      }
    }

    f = update_trend(p, z, f);
    result.objective_trace.push_back(f);
    result.iterations = iter;

    double sigma_change = 0.0;
    for (std::size_t k = 0; k < p.tracks.size(); ++k) {
      if (p.tracks[k].model != SmoothModel::lognormal) continue;
      sigma_change = std::max(sigma_change,
                              std::fabs(p.tracks[k].sigma2 - sigma_before[k]) / sigma_before[k]);
    }
    if ((f_before - f) <= config.tol * std::max(1.0, std::fabs(f)) && sigma_change < config.sigma_tol) {
      result.converged = true;
      break;
    }
  }

  result.log_phi = z;
  for (std::size_t k = 0; k < p.tracks.size(); ++k) {
    const Track& tr = p.tracks[k];
    SeriesFit fit;
    fit.name = specs[k].name;
    fit.model = tr.model;
    fit.corrected = tr.corrected;
    fit.theta = mean_level(tr);
    for (int d = 0; d < 7; ++d) fit.alpha[d] = tr.corrected ? tr.a[d] - fit.theta : 0.0;
    fit.sigma2 = tr.model == SmoothModel::lognormal ? tr.sigma2 : 0.0;
    fit.corrected_xi.resize(p.T);
    for (std::size_t t = 0; t < p.T; ++t) {
      fit.corrected_xi[t] = tr.y[t] * std::exp(-fit.alpha[p.wd[t]]);
    }
    result.series.push_back(std::move(fit));
  }
  return result;
}

SmoothResult smooth_univariate(const SeriesSpec& series, const SmoothConfig& config) {
  return smooth_multivariate(std::span<const SeriesSpec>(&series, 1), config);
}

DailySeries weekday_correct(const DailySeries& series, const WeekdayEffects& alpha) {
  std::vector<double> out(series.raw().begin(), series.raw().end());
  for (std::size_t t = 0; t < out.size(); ++t) {
    out[t] *= std::exp(-alpha[(series.first() + static_cast<int>(t)).weekday()]);
  }
  return DailySeries(series.first(), std::move(out));
}

DailySeries weekday_restore(const DailySeries& series, const WeekdayEffects& alpha) {
  std::vector<double> out(series.raw().begin(), series.raw().end());
  for (std::size_t t = 0; t < out.size(); ++t) {
    out[t] *= std::exp(alpha[(series.first() + static_cast<int>(t)).weekday()]);
  }
  return DailySeries(series.first(), std::move(out));
}

DailySeries growth_series(const SmoothResult& result) {
  if (result.log_phi.size() < 2) throw UsageError("growth_series needs at least two trend values");
  std::vector<double> g(result.log_phi.size() - 1);
  for (std::size_t t = 0; t < g.size(); ++t) g[t] = result.log_phi[t + 1] - result.log_phi[t];
  return DailySeries(result.start + 1, std::move(g));
}

void write_smooth_csv(std::ostream& out, const SmoothResult& result) {
  std::vector<std::string> header{"date", "log_phi"};
  for (const auto& s : result.series) header.push_back("xi_" + s.name);
  write_csv_record(out, header);
  std::vector<std::string> row;
  for (std::size_t t = 0; t < result.size(); ++t) {
    row.clear();
    row.push_back((result.start + static_cast<int>(t)).iso());
    row.push_back(format_double(result.log_phi[t]));
    for (const auto& s : result.series) row.push_back(format_double(s.corrected_xi[t]));
    write_csv_record(out, row);
  }
}

std::string smooth_result_json(const SmoothResult& result) {
  nlohmann::ordered_json j;
  j["start"] = result.start.iso();
  j["end"] = result.end().iso();
  j["lambda"] = result.lambda;
  j["penalty"] = to_string(result.penalty);
  j["penalty_space"] = to_string(result.space);
  j["converged"] = result.converged;
  j["iterations"] = result.iterations;
  j["objective_trace"] = result.objective_trace;
  auto& series = j["series"] = nlohmann::ordered_json::array();
  for (const auto& s : result.series) {
    nlohmann::ordered_json e;
    e["name"] = s.name;
    e["model"] = to_string(s.model);
    e["corrected"] = s.corrected;
    e["alpha"] = s.alpha;
    e["theta"] = s.theta;
    if (s.model == SmoothModel::lognormal) e["sigma2"] = s.sigma2;
    series.push_back(std::move(e));
  }
  return j.dump(2);
}

}  // namespace trendwatch
