#include "trendwatch/trend_filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "banded.hpp"
#include "trendwatch/error.hpp"

namespace trendwatch {

namespace {

constexpr double kBarrierGrowth = 2.0;  // μ in the update of the barrier parameter t
constexpr double kArmijo = 0.01;
constexpr double kBacktrack = 0.5;

void apply_d(std::span<const double> coef, std::span<const double> z, std::span<double> out) {
  const std::size_t width = coef.size();
  for (std::size_t i = 0; i < out.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < width; ++j) s += coef[j] * z[i + j];
    out[i] = s;
  }
}

// out (length T) = Dᵀ v
void apply_dt(std::span<const double> coef, std::span<const double> v, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (std::size_t j = 0; j < coef.size(); ++j) out[i + j] += coef[j] * v[i];
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

std::vector<double> difference(std::span<const double> z, int order) {
  if (static_cast<int>(z.size()) <= order) return {};
  const auto coef = detail::difference_coefficients(order);
  std::vector<double> out(z.size() - static_cast<std::size_t>(order));
  apply_d(coef, z, out);
  return out;
}

double difference_l1(std::span<const double> z, int order) {
  double s = 0.0;
  for (double d : difference(z, order)) s += std::fabs(d);
  return s;
}

double difference_l2_squared(std::span<const double> z, int order) {
  double s = 0.0;
  for (double d : difference(z, order)) s += d * d;
  return s;
}

TrendFilterResult weighted_l1_trend_filter(std::span<const double> w, std::span<const double> u,
                                           double lambda, int order, double rel_tol, int max_iter) {
  if (w.size() != u.size()) throw UsageError("trend filter: weight and target lengths differ");
  if (!(lambda > 0.0)) throw UsageError("trend filter: lambda must be positive");
  const std::size_t n = u.size();
  TrendFilterResult result;
  result.solution.assign(u.begin(), u.end());
  if (n <= static_cast<std::size_t>(order)) {
    result.converged = true;
    return result;
  }
  const std::size_t m = n - static_cast<std::size_t>(order);
  const auto coef = detail::difference_coefficients(order);
  const std::size_t width = coef.size();

  std::vector<double> winv(n);
  for (std::size_t t = 0; t < n; ++t) winv[t] = 1.0 / w[t];

  // D W⁻¹ Dᵀ, banded with `order` sub-diagonals.
  detail::BandedSpd dwd(m, static_cast<std::size_t>(order));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = (i >= static_cast<std::size_t>(order) ? i - order : 0); j <= i; ++j) {
      double s = 0.0;
      // columns t shared by rows i and j: t ∈ [i, j + width)
      for (std::size_t t = i; t < j + width; ++t) s += coef[t - i] * coef[t - j] * winv[t];
      dwd.lower(i, j) = s;
    }
  }
  std::vector<double> du(m);
  apply_d(coef, u, du);

  std::vector<double> nu(m, 0.0), mu1(m, 1.0), mu2(m, 1.0), f1(m, -lambda), f2(m, -lambda);
  std::vector<double> dwd_nu(m), rhs(m), dnu(m), dmu1(m), dmu2(m);
  std::vector<double> new_nu(m), new_mu1(m), new_mu2(m), new_f1(m), new_f2(m), tmp(m);
  double t = 1e-10;
  double step = std::numeric_limits<double>::infinity();
  double gap = std::numeric_limits<double>::infinity();

  const auto residual_norm = [&](std::span<const double> nu_, std::span<const double> m1,
                                 std::span<const double> m2, std::span<const double> g1,
                                 std::span<const double> g2, double tt) {
    dwd.multiply(nu_, tmp);
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double rd = tmp[i] - du[i] + m1[i] - m2[i];
      const double rc1 = -m1[i] * g1[i] - 1.0 / tt;
      const double rc2 = -m2[i] * g2[i] - 1.0 / tt;
      s += rd * rd + rc1 * rc1 + rc2 * rc2;
    }
    return std::sqrt(s);
  };

  int iter = 0;
  for (; iter < max_iter; ++iter) {
    dwd.multiply(nu, dwd_nu);
    double quad = dot(nu, dwd_nu);
    double penalty = 0.0;
    for (std::size_t i = 0; i < m; ++i) penalty += std::fabs(du[i] - dwd_nu[i]);
    const double pobj = 0.5 * quad + lambda * penalty;
    const double dobj = -0.5 * quad + dot(du, nu);
    gap = pobj - dobj;
    if (gap <= rel_tol * std::max(1.0, std::fabs(pobj))) {
      result.converged = true;
      break;
    }
    if (step >= 0.2) t = std::max(2.0 * static_cast<double>(m) * kBarrierGrowth / gap, 1.2 * t);

    detail::BandedSpd system = dwd;
    for (std::size_t i = 0; i < m; ++i) {
      system.lower(i, i) -= mu1[i] / f1[i] + mu2[i] / f2[i];
      rhs[i] = -dwd_nu[i] + du[i] + (1.0 / t) / f1[i] - (1.0 / t) / f2[i];
    }
    if (!system.factorize()) break;
    dnu = rhs;
    system.solve(dnu);
    for (std::size_t i = 0; i < m; ++i) {
      dmu1[i] = -(mu1[i] + ((1.0 / t) + dnu[i] * mu1[i]) / f1[i]);
      dmu2[i] = -(mu2[i] + ((1.0 / t) - dnu[i] * mu2[i]) / f2[i]);
    }
    const double res0 = residual_norm(nu, mu1, mu2, f1, f2, t);

    step = 1.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (dmu1[i] < 0.0) step = std::min(step, -0.99 * mu1[i] / dmu1[i]);
      if (dmu2[i] < 0.0) step = std::min(step, -0.99 * mu2[i] / dmu2[i]);
    }
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls) {
      bool feasible = true;
      for (std::size_t i = 0; i < m; ++i) {
        new_nu[i] = nu[i] + step * dnu[i];
        new_mu1[i] = mu1[i] + step * dmu1[i];
        new_mu2[i] = mu2[i] + step * dmu2[i];
        new_f1[i] = new_nu[i] - lambda;
        new_f2[i] = -new_nu[i] - lambda;
        feasible = feasible && new_f1[i] < 0.0 && new_f2[i] < 0.0;
      }
      if (feasible &&
          residual_norm(new_nu, new_mu1, new_mu2, new_f1, new_f2, t) <= (1.0 - kArmijo * step) * res0) {
        moved = true;
        break;
      }
      step *= kBacktrack;
    }
    if (!moved) break;
    nu.swap(new_nu);
    mu1.swap(new_mu1);
    mu2.swap(new_mu2);
    f1.swap(new_f1);
    f2.swap(new_f2);
  }
  result.iterations = iter;
  result.duality_gap = gap;

  std::vector<double> dt_nu(n);
  apply_dt(coef, nu, dt_nu);
  for (std::size_t i = 0; i < n; ++i) result.solution[i] = u[i] - winv[i] * dt_nu[i];
  return result;
}

std::vector<double> weighted_l2_trend_filter(std::span<const double> w, std::span<const double> u,
                                             double lambda, int order) {
  if (w.size() != u.size()) throw UsageError("trend filter: weight and target lengths differ");
  if (!(lambda > 0.0)) throw UsageError("trend filter: lambda must be positive");
  const std::size_t n = u.size();
  detail::BandedSpd a(n, static_cast<std::size_t>(order));
  a.add_diagonal(w);
  detail::add_scaled_gram(a, order, 2.0 * lambda);
  if (!a.factorize()) throw NumericError("not_spd", "L2 trend-filter system is not positive definite");
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = w[i] * u[i];
  a.solve(x);
  return x;
}

}  // namespace trendwatch
