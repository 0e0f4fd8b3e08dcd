#pragma once

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "trendwatch/date.hpp"
#include "trendwatch/local_regression.hpp"

namespace trendwatch {

inline constexpr double kPValueClip = 1e-15;

struct Combined {
  double z = 0.0;
  double p = 0.5;
};

/// Weighted Stouffer: Z = Σ w_i Φ⁻¹(1 − p_i) / √(Σ w_i²), p = 1 − Φ(Z).
/// p-values are clipped to [1e−15, 1 − 1e−15].
Combined stouffer_combine(std::span<const double> pvalues, std::span<const double> weights);
/// Equal weights.
Combined stouffer_combine(std::span<const double> pvalues);

struct FusedPoint {
  Date date;
  double z = 0.0;  ///< NaN when no stream contributes
  double p = 0.0;  ///< NaN when no stream contributes
  std::vector<std::string> streams;  ///< contributing stream ids, sorted
};

struct FusedSeries {
  std::string region_id;
  std::map<std::string, double> weights;
  std::vector<FusedPoint> points;  ///< one per date any stream covers, ascending

  const FusedPoint* at(Date d) const;
};

/// Per date, fuses the converged fits of the given streams of one region.
/// Streams absent from `weights` get weight 1.
FusedSeries fuse_region(std::span<const FitSeries> streams, const std::map<std::string, double>& weights = {});

/// `region_id,date,z,p,n_streams`
void write_fused_csv(std::ostream& out, std::span<const FusedSeries> series);

}  // namespace trendwatch
