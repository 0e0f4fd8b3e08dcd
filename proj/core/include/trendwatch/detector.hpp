#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trendwatch/evaluation.hpp"
#include "trendwatch/local_regression.hpp"
#include "trendwatch/network.hpp"
#include "trendwatch/panel.hpp"

namespace trendwatch {

enum class DetectorMethod { local_regression, moving_average };
/// Single-stream detectors threshold β̂ (growth) or β̂/se (z); fused detectors
/// always threshold the combined z.
enum class StatKind { beta, z };

std::string to_string(DetectorMethod method);
std::string to_string(StatKind kind);
DetectorMethod parse_detector_method(std::string_view text);
StatKind parse_stat_kind(std::string_view text);

struct DetectorSpec {
  DetectorMethod method = DetectorMethod::local_regression;
  std::vector<std::string> streams;
  RegressionModel model = RegressionModel::linear_log;
  int window_n = 21;
  StatKind stat = StatKind::beta;
  bool fuse = false;
  std::map<std::string, double> fusion_weights;
  /// When set, each stream's fits are replaced by their neighbour aggregate
  /// (before fusion, if both are on).
  std::optional<NeighborGraph> graph;
  AggregateOptions aggregate;
  GapPolicy gap_policy = GapPolicy::interpolate;
  /// Restrict to these regions; empty means every panel region.
  std::vector<std::string> regions;

  void validate(const StreamPanel& panel) const;
};

struct DetectionConfig {
  double fpr_target = 0.05;
  std::vector<int> window_sizes{7, 14, 21, 28, 35};
  int max_delay = 60;
  CalibrationScope scope = CalibrationScope::pooled;
  std::optional<Date> calibration_cutoff;  ///< honest real-time calibration
  int jobs = 1;

  void validate() const;
};

/// Rolling fits of every (region, stream) the spec needs, grouped by stream.
std::map<std::string, std::vector<FitSeries>> detector_fits(const StreamPanel& panel, const DetectorSpec& spec,
                                                            int jobs = 1);

/// The per-region daily statistic the spec thresholds.
RegionStats detector_statistics(const StreamPanel& panel, const DetectorSpec& spec, int jobs = 1);

struct DetectionRun {
  RegionStats stats;
  Calibration calibration;
  std::map<std::string, std::vector<Date>> alarms;
  EvalReport report;
};

/// Statistic → calibration on the null intervals → alarms → power and delay.
DetectionRun run_detection(const StreamPanel& panel, const DetectorSpec& spec,
                           std::span<const LabeledInterval> truth, std::span<const LabeledInterval> nulls,
                           const DetectionConfig& config);
/// Calibration, alarms and scoring for precomputed statistics.
DetectionRun evaluate_statistics(RegionStats stats, std::span<const LabeledInterval> truth,
                                 std::span<const LabeledInterval> nulls, const DetectionConfig& config);

struct SweepRow {
  int window = 0;
  bool ok = false;
  double power = 0.0;
  double mean_delay = 0.0;
  double realized_fpr = 0.0;
  std::string error;  ///< why the cell is missing
};

/// run_detection for every window size; failures become missing rows.
std::vector<SweepRow> window_sweep(const StreamPanel& panel, const DetectorSpec& spec,
                                   std::span<const LabeledInterval> truth, std::span<const LabeledInterval> nulls,
                                   const DetectionConfig& config);

/// `window,power,mean_delay,realized_fpr` (missing cells left empty).
void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows);

}  // namespace trendwatch
