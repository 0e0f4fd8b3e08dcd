#include "trendwatch/detector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <set>

#include "trendwatch/csv.hpp"
#include "trendwatch/error.hpp"
#include "trendwatch/fusion.hpp"
#include "trendwatch/parallel.hpp"

namespace trendwatch {

std::string to_string(DetectorMethod method) {
  return method == DetectorMethod::local_regression ? "local_regression" : "moving_average";
}

std::string to_string(StatKind kind) { return kind == StatKind::beta ? "beta" : "z"; }

DetectorMethod parse_detector_method(std::string_view text) {
  if (text == "local_regression") return DetectorMethod::local_regression;
  if (text == "moving_average") return DetectorMethod::moving_average;
  throw UsageError("unknown detector method '" + std::string(text) + "'");
}

StatKind parse_stat_kind(std::string_view text) {
  if (text == "beta") return StatKind::beta;
  if (text == "z") return StatKind::z;
  throw UsageError("unknown statistic '" + std::string(text) + "'");
}

void DetectorSpec::validate(const StreamPanel& panel) const {
  if (streams.empty()) throw UsageError("detector needs at least one stream");
  for (const auto& s : streams) {
    if (!panel.streams().contains(s)) throw UsageError("unknown stream '" + s + "'");
  }
  if (!fuse && streams.size() != 1) throw UsageError("several streams need fusion enabled");
  for (const auto& r : regions) {
    if (!panel.regions().contains(r)) throw UsageError("unknown region '" + r + "'");
  }
  if (method == DetectorMethod::moving_average) {
    if (window_n < 2) throw UsageError("moving-average window must be at least 2");
    if (fuse || graph) throw UsageError("the moving-average baseline supports neither fusion nor a network");
  } else {
    if (window_n < 3) throw UsageError("window size must be at least 3");
    if (model != RegressionModel::linear_log) {
      for (const auto& s : streams) {
        if (panel.stream_kind(s) == StreamKind::rate) {
          throw UsageError("stream '" + s + "' holds rates; use the linear_log model");
        }
      }
    }
  }
}

void DetectionConfig::validate() const {
  if (!(fpr_target > 0.0 && fpr_target < 1.0)) throw UsageError("fpr must lie in (0, 1)");
  if (max_delay < 0) throw UsageError("max_delay must be non-negative");
  for (int w : window_sizes) {
    if (w < 3) throw UsageError("window sizes must be at least 3");
  }
}

namespace {

std::vector<std::string> target_regions(const StreamPanel& panel, const DetectorSpec& spec) {
  if (!spec.regions.empty()) {
    std::set<std::string> unique(spec.regions.begin(), spec.regions.end());
    return {unique.begin(), unique.end()};
  }
  return {panel.regions().begin(), panel.regions().end()};
}

// Regions whose fits are needed: the targets plus every graph neighbour.
std::vector<std::string> fitted_regions(const StreamPanel& panel, const DetectorSpec& spec) {
  auto targets = target_regions(panel, spec);
  if (!spec.graph) return targets;
  std::set<std::string> all(targets.begin(), targets.end());
  for (const auto& r : targets) {
    const auto it = spec.graph->neighbors.find(r);
    if (it == spec.graph->neighbors.end()) continue;
    for (const auto& n : it->second) all.insert(n.region_id);
  }
  return {all.begin(), all.end()};
}

DailySeries statistic_of(const FitSeries& fits, StatKind kind) {
  if (fits.fits.empty()) return {};
  const Date first = fits.fits.front().date;
  std::vector<double> values(static_cast<std::size_t>(fits.fits.back().date - first + 1),
                             std::numeric_limits<double>::quiet_NaN());
  for (const auto& f : fits.fits) {
    if (!f.fit.converged) continue;
    values[static_cast<std::size_t>(f.date - first)] = kind == StatKind::beta ? f.fit.beta_hat : f.fit.z_score;
  }
  return DailySeries(first, std::move(values));
}

DailySeries statistic_of(const FusedSeries& fused) {
  if (fused.points.empty()) return {};
  const Date first = fused.points.front().date;
  std::vector<double> values(static_cast<std::size_t>(fused.points.back().date - first + 1),
                             std::numeric_limits<double>::quiet_NaN());
  for (const auto& p : fused.points) values[static_cast<std::size_t>(p.date - first)] = p.z;
  return DailySeries(first, std::move(values));
}

}  // namespace

std::map<std::string, std::vector<FitSeries>> detector_fits(const StreamPanel& panel, const DetectorSpec& spec,
                                                            int jobs) {
  spec.validate(panel);
  const auto regions = fitted_regions(panel, spec);
  struct Task {
    std::string region;
    std::string stream;
  };
  std::vector<Task> tasks;
  for (const auto& s : spec.streams) {
    for (const auto& r : regions) {
      if (panel.find(r, s) != nullptr) tasks.push_back({r, s});
    }
  }
  std::vector<FitSeries> results(tasks.size());
  parallel_for(tasks.size(), jobs, [&](std::size_t i) {
    results[i] = rolling_fit(panel, tasks[i].region, tasks[i].stream, spec.window_n, spec.model, spec.gap_policy);
  });
  std::map<std::string, std::vector<FitSeries>> out;
  for (std::size_t i = 0; i < tasks.size(); ++i) out[tasks[i].stream].push_back(std::move(results[i]));
  return out;
}

RegionStats detector_statistics(const StreamPanel& panel, const DetectorSpec& spec, int jobs) {
  spec.validate(panel);
  const auto targets = target_regions(panel, spec);
  RegionStats stats;

  if (spec.method == DetectorMethod::moving_average) {
    const std::string& stream = spec.streams.front();
    std::vector<DailySeries> values(targets.size());
    std::vector<bool> present(targets.size(), false);
    parallel_for(targets.size(), jobs, [&](std::size_t i) {
      const DailySeries* series = panel.find(targets[i], stream);
      if (series == nullptr || series->size() < static_cast<std::size_t>(spec.window_n) + 1) return;
      values[i] = moving_average_stat(*series, spec.window_n);
      present[i] = true;
    });
    for (std::size_t i = 0; i < targets.size(); ++i) {
      if (present[i]) stats[targets[i]] = std::move(values[i]);
    }
    return stats;
  }

  auto fits = detector_fits(panel, spec, jobs);
  if (spec.graph) {
    // Aggregate only over the target regions that are in the graph.
    NeighborGraph sub = *spec.graph;
    std::erase_if(sub.neighbors, [&](const auto& entry) {
      return !std::binary_search(targets.begin(), targets.end(), entry.first);
    });
    for (auto& [stream, list] : fits) {
      std::set<std::string> have;
      for (const auto& f : list) have.insert(f.region_id);
      NeighborGraph usable = sub;
      std::erase_if(usable.neighbors, [&](const auto& entry) { return !have.contains(entry.first); });
      for (auto& [region, neighbors] : usable.neighbors) {
        std::erase_if(neighbors, [&](const Neighbor& n) { return !have.contains(n.region_id); });
      }
      list = aggregate_growth(list, usable, spec.aggregate);
    }
  }

  std::map<std::string, std::vector<const FitSeries*>> by_region;
  for (const auto& [stream, list] : fits) {
    for (const auto& f : list) by_region[f.region_id].push_back(&f);
  }
  for (const auto& region : targets) {
    const auto it = by_region.find(region);
    if (it == by_region.end()) continue;
    if (spec.fuse) {
      std::vector<FitSeries> streams;
      for (const FitSeries* f : it->second) streams.push_back(*f);
      stats[region] = statistic_of(fuse_region(streams, spec.fusion_weights));
    } else {
      stats[region] = statistic_of(*it->second.front(), spec.stat);
    }
  }
  return stats;
}

DetectionRun evaluate_statistics(RegionStats stats, std::span<const LabeledInterval> truth,
                                 std::span<const LabeledInterval> nulls, const DetectionConfig& config) {
  config.validate();
  DetectionRun run;
  run.stats = std::move(stats);
  const IntervalMap null_map = group_intervals(nulls);
  run.calibration =
      calibrate_threshold(run.stats, null_map, config.fpr_target, config.scope, config.calibration_cutoff);
  run.alarms = emit_alarms(run.stats, run.calibration);
  run.report = score_power_delay(run.alarms, truth, null_dates_with_stat(run.stats, null_map), config.max_delay);
  return run;
}

DetectionRun run_detection(const StreamPanel& panel, const DetectorSpec& spec,
                           std::span<const LabeledInterval> truth, std::span<const LabeledInterval> nulls,
                           const DetectionConfig& config) {
  config.validate();
  return evaluate_statistics(detector_statistics(panel, spec, config.jobs), truth, nulls, config);
}

std::vector<SweepRow> window_sweep(const StreamPanel& panel, const DetectorSpec& spec,
                                   std::span<const LabeledInterval> truth, std::span<const LabeledInterval> nulls,
                                   const DetectionConfig& config) {
  config.validate();
  std::vector<SweepRow> rows;
  for (int w : config.window_sizes) {
    SweepRow row;
    row.window = w;
    try {
      DetectorSpec s = spec;
      s.window_n = w;
      const DetectionRun run = run_detection(panel, s, truth, nulls, config);
      row.ok = true;
      row.power = run.report.power;
      row.mean_delay = run.report.mean_delay;
      row.realized_fpr = run.report.realized_fpr;
    } catch (const Error& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
  write_csv_record(out, {"window", "power", "mean_delay", "realized_fpr"});
  for (const auto& r : rows) {
    if (r.ok) {
      write_csv_record(out, {std::to_string(r.window), format_double(r.power), format_double(r.mean_delay),
                             format_double(r.realized_fpr)});
    } else {
      write_csv_record(out, {std::to_string(r.window), "", "", ""});
    }
  }
}

}  // namespace trendwatch
