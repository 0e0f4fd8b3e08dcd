#include "trendwatch/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <set>

#include "trendwatch/csv.hpp"
#include "trendwatch/error.hpp"
#include "trendwatch/normal.hpp"

namespace trendwatch {

Combined stouffer_combine(std::span<const double> pvalues, std::span<const double> weights) {
  if (pvalues.empty()) throw UsageError("stouffer_combine: no p-values");
  if (pvalues.size() != weights.size()) throw UsageError("stouffer_combine: p-value and weight counts differ");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < pvalues.size(); ++i) {
    const double w = weights[i];
    if (!(w > 0.0) || !std::isfinite(w)) throw UsageError("stouffer_combine: weights must be positive");
    const double p = pvalues[i];
    if (std::isnan(p)) throw UsageError("stouffer_combine: p-value is NaN");
    num += w * normal_isf(std::clamp(p, kPValueClip, 1.0 - kPValueClip));
    den += w * w;
  }
  Combined c;
  c.z = num / std::sqrt(den);
  c.p = normal_sf(c.z);
  return c;
}

Combined stouffer_combine(std::span<const double> pvalues) {
  const std::vector<double> ones(pvalues.size(), 1.0);
  return stouffer_combine(pvalues, ones);
}

const FusedPoint* FusedSeries::at(Date d) const {
  const auto it = std::lower_bound(points.begin(), points.end(), d,
                                   [](const FusedPoint& p, Date x) { return p.date < x; });
  return it != points.end() && it->date == d ? &*it : nullptr;
}

FusedSeries fuse_region(std::span<const FitSeries> streams, const std::map<std::string, double>& weights) {
  FusedSeries out;
  if (streams.empty()) return out;
  out.region_id = streams.front().region_id;
  std::set<Date> dates;
  for (const auto& s : streams) {
    if (s.region_id != out.region_id) throw UsageError("fuse_region: streams from different regions");
    const auto w = weights.find(s.stream_id);
    const double weight = w == weights.end() ? 1.0 : w->second;
    if (!(weight > 0.0)) throw UsageError("fuse_region: weight for " + s.stream_id + " must be positive");
    out.weights[s.stream_id] = weight;
    for (const auto& f : s.fits) dates.insert(f.date);
    for (const auto& f : s.failures) dates.insert(f.date);
  }

  std::vector<double> p, w;
  for (const Date d : dates) {
    FusedPoint point;
    point.date = d;
    p.clear();
    w.clear();
    for (const auto& s : streams) {
      const RegressionFit* fit = s.at(d);
      if (fit == nullptr || !fit->converged) continue;
      const auto pv = growth_pvalue(*fit);
      if (!pv) continue;
      p.push_back(*pv);
      w.push_back(out.weights[s.stream_id]);
      point.streams.push_back(s.stream_id);
    }
    if (p.empty()) {
      point.z = point.p = std::numeric_limits<double>::quiet_NaN();
    } else {
      const Combined c = stouffer_combine(p, w);
      point.z = c.z;
      point.p = c.p;
    }
    std::sort(point.streams.begin(), point.streams.end());
    out.points.push_back(std::move(point));
  }
  return out;
}

void write_fused_csv(std::ostream& out, std::span<const FusedSeries> series) {
  write_csv_record(out, {"region_id", "date", "z", "p", "n_streams"});
  for (const auto& s : series) {
    for (const auto& pt : s.points) {
      write_csv_record(out, {s.region_id, pt.date.iso(), format_double(pt.z), format_double(pt.p),
                             std::to_string(pt.streams.size())});
    }
  }
}

}  // namespace trendwatch
