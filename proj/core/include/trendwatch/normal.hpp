#pragma once

namespace trendwatch {

/// Standard normal CDF Φ(x).
double normal_cdf(double x);
/// Upper tail 1 − Φ(x), accurate far into the tail.
double normal_sf(double x);
/// Φ⁻¹(p) for p in (0, 1); ±inf at the endpoints, NaN outside.
double normal_quantile(double p);
/// Φ⁻¹(1 − p) without forming 1 − p.
double normal_isf(double p);

}  // namespace trendwatch
