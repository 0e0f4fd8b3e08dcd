#pragma once

#include <span>

namespace trendwatch {

/// softmin_γ(x) = −γ log Σ exp(−x_i / γ), evaluated with a max shift.
double softmin(std::span<const double> x, double gamma);

/// Soft dynamic time warping with squared-difference cost:
/// r[i][j] = (a_i − b_j)² + softmin_γ(r[i−1][j], r[i][j−1], r[i−1][j−1]).
/// O(|a|·|b|) time, O(|b|) memory.
double soft_dtw(std::span<const double> a, std::span<const double> b, double gamma);

}  // namespace trendwatch
