#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trendwatch/date.hpp"
#include "trendwatch/ground_truth.hpp"
#include "trendwatch/panel.hpp"

namespace trendwatch {

/// Per-region daily detection statistic; NaN where undefined.
using RegionStats = std::map<std::string, DailySeries>;
/// Per-region sorted, disjoint date ranges.
using IntervalMap = std::map<std::string, std::vector<DateRange>>;

IntervalMap group_intervals(std::span<const LabeledInterval> intervals);

enum class CalibrationScope { pooled, per_region };

std::string to_string(CalibrationScope scope);
CalibrationScope parse_calibration_scope(std::string_view text);

inline constexpr std::size_t kMinNullStatistics = 100;

/// The smallest observed null statistic q with #(stat > q) ≤ ⌊fpr · N⌋.
/// Requires at least 100 finite values.
double quantile_threshold(std::vector<double> null_stats, double fpr);

struct Calibration {
  CalibrationScope scope = CalibrationScope::pooled;
  double fpr_target = 0.05;
  double threshold = 0.0;  ///< pooled threshold
  std::map<std::string, double> per_region;
  std::size_t null_count = 0;

  double threshold_for(const std::string& region) const;
};

/// Threshold(s) from the statistic on null dates. With `cutoff`, only null
/// dates on or before it are used.
Calibration calibrate_threshold(const RegionStats& stats, const IntervalMap& nulls, double fpr,
                                CalibrationScope scope = CalibrationScope::pooled,
                                std::optional<Date> cutoff = std::nullopt);

/// Dates whose statistic is strictly above the threshold.
std::vector<Date> emit_alarms(const DailySeries& stat, double threshold);
std::map<std::string, std::vector<Date>> emit_alarms(const RegionStats& stats, const Calibration& calibration);

struct IntervalRecord {
  std::string region_id;
  DateRange range;
  bool detected = false;
  int delay = 0;
  std::optional<Date> first_alarm;
};

struct EvalReport {
  std::vector<IntervalRecord> records;
  double power = 0.0;  ///< percent
  double mean_delay = 0.0;
  int max_delay = 60;
  std::size_t null_dates = 0;
  std::size_t null_alarms = 0;
  double realized_fpr = 0.0;
};

/// An interval [s, e] is detected when an alarm falls in [s, min(e, s + max_delay)];
/// its delay is the first such alarm minus s, otherwise max_delay. The realized
/// FPR is the share of `null_dates` carrying an alarm.
EvalReport score_power_delay(const std::map<std::string, std::vector<Date>>& alarms,
                             std::span<const LabeledInterval> truth,
                             const std::map<std::string, std::vector<Date>>& null_dates = {}, int max_delay = 60);

/// Null dates that carry a finite statistic.
std::map<std::string, std::vector<Date>> null_dates_with_stat(const RegionStats& stats, const IntervalMap& nulls);

/// log MA_n(t) − log MA_n(t−1), MA over the trailing n days, with y + 0.5
/// applied to the whole series when it contains a zero. Undefined (NaN) until
/// n + 1 days of history exist or when a trailing window has missing days.
DailySeries moving_average_stat(const DailySeries& series, int n);

/// `region_id,date,statistic,threshold`
void write_alarms_csv(std::ostream& out, const RegionStats& stats, const Calibration& calibration,
                      const std::map<std::string, std::vector<Date>>& alarms);
std::string eval_report_json(const EvalReport& report, const Calibration& calibration);

}  // namespace trendwatch
