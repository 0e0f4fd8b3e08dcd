#pragma once

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trendwatch/date.hpp"
#include "trendwatch/panel.hpp"
#include "trendwatch/smoother.hpp"

namespace trendwatch {

struct ConsensusOptions {
  int min_duration = 7;  ///< shorter increasing runs are dropped
  double epsilon = 0.0;  ///< a config agrees on "increasing" when g > ε
};

struct Consensus {
  std::vector<DateRange> increasing;  ///< sorted, disjoint, each ≥ min_duration
  std::vector<DateRange> null;        ///< maximal runs where every config has g ≤ ε
};

/// Dates where every growth series is above ε, as maximal runs of at least
/// min_duration days, plus the complementary unanimous non-increasing runs.
/// All growth series must share the same dates.
Consensus consensus_trends(std::span<const DailySeries> growth, const ConsensusOptions& options = {});

/// Maximal runs of dates where pred(index) holds, on the axis starting at `first`.
template <typename Pred>
std::vector<DateRange> runs_where(Date first, std::size_t n, Pred pred) {
  std::vector<DateRange> out;
  std::size_t t = 0;
  while (t < n) {
    if (!pred(t)) {
      ++t;
      continue;
    }
    const std::size_t begin = t;
    while (t < n && pred(t)) ++t;
    out.push_back({first + static_cast<int>(begin), first + static_cast<int>(t - 1)});
  }
  return out;
}

/// Default λ grid per penalty kind.
std::vector<double> default_lambda_grid(PenaltyKind kind);

enum class ConsensusMode {
  shared,      ///< growth of the shared trend from the multivariate smooth
  per_stream,  ///< growth of a univariate smooth of every stream
};

struct GroundTruthConfig {
  std::vector<std::string> streams;
  /// One smoother configuration per consensus member; defaults to the L1 grid.
  std::vector<SmoothConfig> smoothers;
  /// Model per stream; unlisted count streams use Poisson, rate streams Log-Normal.
  std::map<std::string, SmoothModel> models;
  bool correct_weekday = true;
  ConsensusOptions consensus;
  ConsensusMode mode = ConsensusMode::shared;
  double count_floor = 100.0;  ///< a region is excluded if any stream totals less
  int jobs = 1;
};

struct RegionGroundTruth {
  std::string region_id;
  bool excluded = false;
  std::string reason;  ///< why the region was excluded
  std::vector<std::string> warnings;
  /// The growth series that entered the consensus, in config (then stream) order.
  std::vector<DailySeries> growth;
  std::vector<std::string> growth_labels;
  Consensus consensus;
};

struct GroundTruth {
  std::vector<RegionGroundTruth> regions;  ///< sorted by region_id
  std::vector<std::string> streams;
  std::vector<SmoothConfig> smoothers;
  ConsensusMode mode = ConsensusMode::shared;

  const RegionGroundTruth* find(std::string_view region) const;
  std::size_t interval_count() const;
};

/// Per region: smooth the listed streams under each config, take the growth
/// of the fitted trend and form the consensus. Regions that fail the count
/// floor, lack a stream, or whose smoother throws are kept with `excluded`.
GroundTruth build_ground_truth(const StreamPanel& panel, const GroundTruthConfig& config);

/// `region_id,start,end`
struct LabeledInterval {
  std::string region_id;
  DateRange range;
};
std::vector<LabeledInterval> increasing_intervals(const GroundTruth& truth);
std::vector<LabeledInterval> null_intervals(const GroundTruth& truth);
void write_intervals_csv(std::ostream& out, std::span<const LabeledInterval> intervals);
std::vector<LabeledInterval> read_intervals_csv(std::istream& in);
std::vector<LabeledInterval> read_intervals_csv(const std::string& path);

}  // namespace trendwatch
