#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace trendwatch::detail {

/// Symmetric positive-definite matrix with `bandwidth` sub-diagonals,
/// factorised in place by banded Cholesky.
class BandedSpd {
 public:
  BandedSpd(std::size_t n, std::size_t bandwidth);

  std::size_t size() const { return n_; }
  std::size_t bandwidth() const { return p_; }

  /// Element (i, j) with i − bandwidth <= j <= i.
  double& lower(std::size_t i, std::size_t j) { return band_[i * (p_ + 1) + (i - j)]; }
  double lower(std::size_t i, std::size_t j) const { return band_[i * (p_ + 1) + (i - j)]; }
  void add_diagonal(std::span<const double> d);

  /// y = A x using the (unfactorised) lower band.
  void multiply(std::span<const double> x, std::span<double> y) const;

  /// Factorises; returns false if the matrix is not numerically SPD.
  bool factorize();
  /// Solves A x = b in place; requires a successful factorize().
  void solve(std::span<double> b) const;

 private:
  std::size_t n_;
  std::size_t p_;
  std::vector<double> band_;
};

/// Rows of the order-k forward difference operator: (Δᵏz)_t = Σ_j coef[j] z_{t+j}.
std::vector<double> difference_coefficients(int order);

/// Accumulates s · DᵀD (D the order-k difference operator on n points) into A.
void add_scaled_gram(BandedSpd& a, int order, double scale);

}  // namespace trendwatch::detail
