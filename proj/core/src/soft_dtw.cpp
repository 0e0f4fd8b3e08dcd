#include "trendwatch/soft_dtw.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "trendwatch/error.hpp"

namespace trendwatch {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// exp(−40) is below double resolution relative to the leading term of 1.
constexpr double kNegligible = 40.0;

inline double softmin3(double a, double b, double c, double gamma, double inv_gamma) {
  // Order so that m is the minimum; its own term contributes exp(0) = 1.
  double m = a, u = b, v = c;
  if (u < m) std::swap(m, u);
  if (v < m) std::swap(m, v);
  if (m == kInf) return kInf;
  const double du = std::min((u - m) * inv_gamma, kNegligible);
  const double dv = std::min((v - m) * inv_gamma, kNegligible);
  return m - gamma * std::log(1.0 + std::exp(-du) + std::exp(-dv));
}

}  // namespace

double softmin(std::span<const double> x, double gamma) {
  if (x.empty()) throw UsageError("softmin of an empty set");
  if (!(gamma > 0.0)) throw UsageError("gamma must be positive");
  const double m = *std::min_element(x.begin(), x.end());
  if (m == kInf) return kInf;
  double s = 0.0;
  for (double v : x) s += std::exp(-(v - m) / gamma);
  return m - gamma * std::log(s);
}

double soft_dtw(std::span<const double> a, std::span<const double> b, double gamma) {
  if (a.empty() || b.empty()) throw UsageError("soft_dtw needs non-empty sequences");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw UsageError("gamma must be positive");
  const double inv_gamma = 1.0 / gamma;
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  // Sweep anti-diagonals k = i + j so that cells within a sweep are
  // independent. Each buffer is indexed by i; r[0][0] = 0, other borders inf.
  std::vector<double> d2(n + 2, kInf), d1(n + 2, kInf), cur(n + 2, kInf);
  d2[0] = 0.0;
  for (std::size_t k = 2; k <= n + m; ++k) {
    const std::size_t lo = k > m ? k - m : 1;
    const std::size_t hi = std::min(n, k - 1);
    cur[0] = kInf;
    cur[hi + 1] = kInf;
    for (std::size_t i = lo; i <= hi; ++i) {
      const double d = a[i - 1] - b[k - i - 1];
      cur[i] = d * d + softmin3(d1[i - 1], d1[i], d2[i - 1], gamma, inv_gamma);
    }
    std::swap(d2, d1);
    std::swap(d1, cur);
  }
  return d1[n];
}

}  // namespace trendwatch
