#pragma once

#include <span>
#include <vector>

namespace trendwatch {

/// Order-k forward differences; length z.size() − k (empty if shorter).
std::vector<double> difference(std::span<const double> z, int order);
double difference_l1(std::span<const double> z, int order);
double difference_l2_squared(std::span<const double> z, int order);

struct TrendFilterResult {
  std::vector<double> solution;
  double duality_gap = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// argmin_v ½ Σ w_t (v_t − u_t)² + λ ‖Δᵏ v‖₁ for w > 0.
///
/// Solved through the box-constrained dual
///   min_ν ½ νᵀ D W⁻¹ Dᵀ ν − νᵀ D u,  |ν| ≤ λ,
/// with a primal-dual interior-point method; v = u − W⁻¹ Dᵀ ν. The banded
/// Newton systems cost O(T k²) each. Stops when the duality gap drops below
/// rel_tol · max(1, |primal|).
TrendFilterResult weighted_l1_trend_filter(std::span<const double> w, std::span<const double> u,
                                           double lambda, int order = 3, double rel_tol = 1e-10,
                                           int max_iter = 100);

/// argmin_v ½ Σ w_t (v_t − u_t)² + λ ‖Δᵏ v‖₂², i.e. (W + 2λ DᵀD) v = W u.
std::vector<double> weighted_l2_trend_filter(std::span<const double> w, std::span<const double> u,
                                             double lambda, int order = 3);

}  // namespace trendwatch
