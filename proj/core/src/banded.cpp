#include "banded.hpp"

#include <algorithm>
#include <cmath>

namespace trendwatch::detail {

BandedSpd::BandedSpd(std::size_t n, std::size_t bandwidth)
    : n_(n), p_(bandwidth), band_(n * (bandwidth + 1), 0.0) {}

void BandedSpd::add_diagonal(std::span<const double> d) {
  for (std::size_t i = 0; i < n_; ++i) lower(i, i) += d[i];
}

void BandedSpd::multiply(std::span<const double> x, std::span<double> y) const {
  for (std::size_t i = 0; i < n_; ++i) y[i] = 0.0;
  for (std::size_t i = 0; i < n_; ++i) {
    const std::size_t j0 = i >= p_ ? i - p_ : 0;
    for (std::size_t j = j0; j < i; ++j) {
      const double a = lower(i, j);
      y[i] += a * x[j];
      y[j] += a * x[i];
    }
    y[i] += lower(i, i) * x[i];
  }
}

bool BandedSpd::factorize() {
  for (std::size_t i = 0; i < n_; ++i) {
    const std::size_t j0 = i >= p_ ? i - p_ : 0;
    for (std::size_t j = j0; j <= i; ++j) {
      double s = lower(i, j);
      const std::size_t k0 = std::max(j0, j >= p_ ? j - p_ : std::size_t{0});
      for (std::size_t k = k0; k < j; ++k) s -= lower(i, k) * lower(j, k);
      if (i == j) {
        if (!(s > 0.0) || !std::isfinite(s)) return false;
        lower(i, i) = std::sqrt(s);
      } else {
        lower(i, j) = s / lower(j, j);
      }
    }
  }
  return true;
}

void BandedSpd::solve(std::span<double> b) const {
  for (std::size_t i = 0; i < n_; ++i) {
    const std::size_t j0 = i >= p_ ? i - p_ : 0;
    double s = b[i];
    for (std::size_t j = j0; j < i; ++j) s -= lower(i, j) * b[j];
    b[i] = s / lower(i, i);
  }
  for (std::size_t ii = n_; ii-- > 0;) {
    double s = b[ii];
    const std::size_t j1 = std::min(n_ - 1, ii + p_);
    for (std::size_t j = ii + 1; j <= j1; ++j) s -= lower(j, ii) * b[j];
    b[ii] = s / lower(ii, ii);
  }
}

std::vector<double> difference_coefficients(int order) {
  std::vector<double> c{1.0};
  for (int k = 0; k < order; ++k) {
    std::vector<double> next(c.size() + 1, 0.0);
    for (std::size_t j = 0; j < c.size(); ++j) {
      next[j] -= c[j];
      next[j + 1] += c[j];
    }
    c = std::move(next);
  }
  return c;
}

void add_scaled_gram(BandedSpd& a, int order, double scale) {
  const auto coef = difference_coefficients(order);
  const std::size_t width = coef.size();
  const std::size_t n = a.size();
  if (n < width) return;
  for (std::size_t row = 0; row + width <= n; ++row) {
    for (std::size_t p = 0; p < width; ++p) {
      for (std::size_t q = 0; q <= p; ++q) {
        a.lower(row + p, row + q) += scale * coef[p] * coef[q];
      }
    }
  }
}

}  // namespace trendwatch::detail
