#include "trendwatch/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include <nlohmann/json.hpp>

#include "trendwatch/csv.hpp"
#include "trendwatch/error.hpp"

namespace trendwatch {

IntervalMap group_intervals(std::span<const LabeledInterval> intervals) {
  IntervalMap out;
  for (const auto& i : intervals) out[i.region_id].push_back(i.range);
  for (auto& [region, list] : out) {
    std::sort(list.begin(), list.end(), [](const DateRange& a, const DateRange& b) { return a.first < b.first; });
  }
  return out;
}

std::string to_string(CalibrationScope scope) {
  return scope == CalibrationScope::pooled ? "pooled" : "per_region";
}

CalibrationScope parse_calibration_scope(std::string_view text) {
  if (text == "pooled") return CalibrationScope::pooled;
  if (text == "per_region") return CalibrationScope::per_region;
  throw UsageError("unknown calibration scope '" + std::string(text) + "'");
}

double quantile_threshold(std::vector<double> null_stats, double fpr) {
  if (!(fpr > 0.0 && fpr < 1.0)) throw UsageError("fpr must lie in (0, 1)");
  std::erase_if(null_stats, [](double v) { return !std::isfinite(v); });
  if (null_stats.size() < kMinNullStatistics) {
    throw DataError("insufficient_null", "calibration needs at least " + std::to_string(kMinNullStatistics) +
                                             " null statistics, got " + std::to_string(null_stats.size()));
  }
  std::sort(null_stats.begin(), null_stats.end());
  const std::size_t n = null_stats.size();
  // Guard against fpr · n landing a rounding error below an integer.
  const auto allowed = static_cast<std::size_t>(std::floor(fpr * static_cast<double>(n) + 1e-9));
  return null_stats[n - 1 - std::min(allowed, n - 1)];
}

double Calibration::threshold_for(const std::string& region) const {
  if (scope == CalibrationScope::pooled) return threshold;
  const auto it = per_region.find(region);
  if (it == per_region.end()) throw UsageError("no calibrated threshold for region " + region);
  return it->second;
}

namespace {

std::vector<double> null_values(const DailySeries& stat, const std::vector<DateRange>& ranges,
                                std::optional<Date> cutoff) {
  std::vector<double> out;
  for (const auto& r : ranges) {
    Date last = r.last;
    if (cutoff) last = std::min(last, *cutoff);
    for (Date d = std::max(r.first, stat.first()); d <= std::min(last, stat.last()); ++d) {
      const double v = stat.raw()[static_cast<std::size_t>(d - stat.first())];
      if (std::isfinite(v)) out.push_back(v);
    }
  }
  return out;
}

}  // namespace

Calibration calibrate_threshold(const RegionStats& stats, const IntervalMap& nulls, double fpr,
                                CalibrationScope scope, std::optional<Date> cutoff) {
  Calibration c;
  c.scope = scope;
  c.fpr_target = fpr;
  std::vector<double> pooled;
  for (const auto& [region, stat] : stats) {
    const auto it = nulls.find(region);
    if (it == nulls.end() || stat.empty()) continue;
    auto values = null_values(stat, it->second, cutoff);
    if (scope == CalibrationScope::per_region) {
      c.per_region[region] = quantile_threshold(values, fpr);
      c.null_count += values.size();
    } else {
      pooled.insert(pooled.end(), values.begin(), values.end());
    }
  }
  if (scope == CalibrationScope::pooled) {
    c.threshold = quantile_threshold(pooled, fpr);
    c.null_count = pooled.size();
  }
  return c;
}

std::vector<Date> emit_alarms(const DailySeries& stat, double threshold) {
  std::vector<Date> out;
  const auto raw = stat.raw();
  for (std::size_t t = 0; t < raw.size(); ++t) {
    if (raw[t] > threshold) out.push_back(stat.first() + static_cast<int>(t));
  }
  return out;
}

std::map<std::string, std::vector<Date>> emit_alarms(const RegionStats& stats, const Calibration& calibration) {
  std::map<std::string, std::vector<Date>> out;
  for (const auto& [region, stat] : stats) {
    if (calibration.scope == CalibrationScope::per_region && !calibration.per_region.contains(region)) continue;
    out[region] = emit_alarms(stat, calibration.threshold_for(region));
  }
  return out;
}

EvalReport score_power_delay(const std::map<std::string, std::vector<Date>>& alarms,
                             std::span<const LabeledInterval> truth,
                             const std::map<std::string, std::vector<Date>>& null_dates, int max_delay) {
  if (truth.empty()) throw UsageError("scoring needs at least one ground-truth interval");
  if (max_delay < 0) throw UsageError("max_delay must be non-negative");
  EvalReport report;
  report.max_delay = max_delay;
  static const std::vector<Date> kNone;
  std::size_t detected = 0;
  double delay_total = 0.0;
  for (const auto& interval : truth) {
    const auto it = alarms.find(interval.region_id);
    const std::vector<Date>& list = it == alarms.end() ? kNone : it->second;
    IntervalRecord rec;
    rec.region_id = interval.region_id;
    rec.range = interval.range;
    rec.delay = max_delay;
    const Date s = interval.range.first;
    const Date limit = std::min(interval.range.last, s + max_delay);
    // Alarm lists may be unsorted or repeat dates; only the earliest qualifying one matters.
    for (const Date a : list) {
      if (a < s || a > limit) continue;
      if (!rec.first_alarm || a < *rec.first_alarm) rec.first_alarm = a;
    }
    if (rec.first_alarm) {
      rec.detected = true;
      rec.delay = *rec.first_alarm - s;
      ++detected;
    }
    delay_total += rec.delay;
    report.records.push_back(std::move(rec));
  }
  report.power = 100.0 * static_cast<double>(detected) / static_cast<double>(truth.size());
  report.mean_delay = delay_total / static_cast<double>(truth.size());

  for (const auto& [region, dates] : null_dates) {
    const auto it = alarms.find(region);
    std::vector<Date> sorted_alarms = it == alarms.end() ? std::vector<Date>{} : it->second;
    std::sort(sorted_alarms.begin(), sorted_alarms.end());
    for (const Date d : dates) {
      ++report.null_dates;
      if (std::binary_search(sorted_alarms.begin(), sorted_alarms.end(), d)) ++report.null_alarms;
    }
  }
  report.realized_fpr = report.null_dates == 0
                            ? 0.0
                            : static_cast<double>(report.null_alarms) / static_cast<double>(report.null_dates);
  return report;
}

std::map<std::string, std::vector<Date>> null_dates_with_stat(const RegionStats& stats, const IntervalMap& nulls) {
  std::map<std::string, std::vector<Date>> out;
  for (const auto& [region, ranges] : nulls) {
    const auto it = stats.find(region);
    if (it == stats.end() || it->second.empty()) continue;
    const DailySeries& stat = it->second;
    auto& dates = out[region];
    for (const auto& r : ranges) {
      for (Date d = std::max(r.first, stat.first()); d <= std::min(r.last, stat.last()); ++d) {
        if (std::isfinite(stat.raw()[static_cast<std::size_t>(d - stat.first())])) dates.push_back(d);
      }
    }
  }
  return out;
}

DailySeries moving_average_stat(const DailySeries& series, int n) {
  if (n < 2) throw UsageError("moving average needs n >= 2");
  const auto raw = series.raw();
  if (raw.size() < static_cast<std::size_t>(n) + 1) {
    throw InsufficientHistoryError("moving average needs " + std::to_string(n + 1) + " days of history");
  }
  const bool any_zero = std::any_of(raw.begin(), raw.end(), [](double v) { return v == 0.0; });
  const double shift = any_zero ? 0.5 : 0.0;
  std::vector<double> ma(raw.size(), std::nan(""));
  for (std::size_t t = static_cast<std::size_t>(n) - 1; t < raw.size(); ++t) {
    double s = 0.0;
    bool complete = true;
    for (std::size_t k = t + 1 - static_cast<std::size_t>(n); k <= t; ++k) {
      if (std::isnan(raw[k])) {
        complete = false;
        break;
      }
      s += raw[k] + shift;
    }
    if (complete) ma[t] = s / n;
  }
  std::vector<double> stat(raw.size(), std::nan(""));
  for (std::size_t t = 1; t < raw.size(); ++t) {
    if (!std::isnan(ma[t]) && !std::isnan(ma[t - 1]) && ma[t] > 0.0 && ma[t - 1] > 0.0) {
      stat[t] = std::log(ma[t]) - std::log(ma[t - 1]);
    }
  }
  return DailySeries(series.first(), std::move(stat));
}

void write_alarms_csv(std::ostream& out, const RegionStats& stats, const Calibration& calibration,
                      const std::map<std::string, std::vector<Date>>& alarms) {
  write_csv_record(out, {"region_id", "date", "statistic", "threshold"});
  for (const auto& [region, dates] : alarms) {
    const DailySeries& stat = stats.at(region);
    const std::string threshold = format_double(calibration.threshold_for(region));
    for (const Date d : dates) {
      write_csv_record(out, {region, d.iso(), format_double(*stat.at(d)), threshold});
    }
  }
}

std::string eval_report_json(const EvalReport& report, const Calibration& calibration) {
  nlohmann::ordered_json j;
  j["fpr_target"] = calibration.fpr_target;
  j["calibration_scope"] = to_string(calibration.scope);
  if (calibration.scope == CalibrationScope::pooled) {
    j["threshold"] = calibration.threshold;
  } else {
    j["thresholds"] = calibration.per_region;
  }
  j["null_statistics"] = calibration.null_count;
  j["power"] = report.power;
  j["mean_delay"] = report.mean_delay;
  j["max_delay"] = report.max_delay;
  j["realized_fpr"] = report.realized_fpr;
  j["null_dates"] = report.null_dates;
  j["null_alarms"] = report.null_alarms;
  auto& records = j["intervals"] = nlohmann::ordered_json::array();
  for (const auto& r : report.records) {
    nlohmann::ordered_json e;
    e["region_id"] = r.region_id;
    e["start"] = r.range.first.iso();
    e["end"] = r.range.last.iso();
    e["detected"] = r.detected;
    e["delay"] = r.delay;
    e["first_alarm"] = r.first_alarm ? nlohmann::ordered_json(r.first_alarm->iso()) : nlohmann::ordered_json();
    records.push_back(std::move(e));
  }
  return j.dump(2);
}

}  // namespace trendwatch
