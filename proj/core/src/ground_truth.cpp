#include "trendwatch/ground_truth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>

#include "trendwatch/csv.hpp"
#include "trendwatch/error.hpp"
#include "trendwatch/parallel.hpp"

namespace trendwatch {

Consensus consensus_trends(std::span<const DailySeries> growth, const ConsensusOptions& options) {
  if (growth.empty()) throw UsageError("consensus needs at least one growth series");
  if (options.min_duration < 1) throw UsageError("min_duration must be at least 1");
  const Date first = growth.front().first();
  const std::size_t n = growth.front().size();
  for (const auto& g : growth) {
    if (g.first() != first || g.size() != n) {
      throw UsageError("growth series do not share a date axis");
    }
  }
  const double eps = options.epsilon;
  // Missing values count as disagreement in both directions.
  const auto all_up = [&](std::size_t t) {
    return std::all_of(growth.begin(), growth.end(), [&](const DailySeries& g) { return g.raw()[t] > eps; });
  };
  const auto all_down = [&](std::size_t t) {
    return std::all_of(growth.begin(), growth.end(), [&](const DailySeries& g) { return g.raw()[t] <= eps; });
  };
  Consensus out;
  for (const auto& run : runs_where(first, n, all_up)) {
    if (run.length() >= options.min_duration) out.increasing.push_back(run);
  }
  out.null = runs_where(first, n, all_down);
  return out;
}

std::vector<double> default_lambda_grid(PenaltyKind kind) {
  if (kind == PenaltyKind::l1) return {1e3, 1e4, 1e5};
  return {10.0, 1e3, 3e4};
}

const RegionGroundTruth* GroundTruth::find(std::string_view region) const {
  const auto it = std::lower_bound(regions.begin(), regions.end(), region,
                                   [](const RegionGroundTruth& r, std::string_view id) { return r.region_id < id; });
  return it != regions.end() && it->region_id == region ? &*it : nullptr;
}

std::size_t GroundTruth::interval_count() const {
  std::size_t n = 0;
  for (const auto& r : regions) n += r.excluded ? 0 : r.consensus.increasing.size();
  return n;
}

namespace {

std::vector<SmoothConfig> resolved_smoothers(const GroundTruthConfig& config) {
  if (!config.smoothers.empty()) return config.smoothers;
  std::vector<SmoothConfig> out;
  for (double lambda : default_lambda_grid(PenaltyKind::l1)) {
    SmoothConfig c;
    c.penalty = PenaltyKind::l1;
    c.lambda = lambda;
    out.push_back(c);
  }
  return out;
}

std::string config_label(const SmoothConfig& c) {
  return to_string(c.penalty) + ":" + format_double(c.lambda);
}

void process_region(const StreamPanel& panel, const GroundTruthConfig& config,
                    const std::vector<SmoothConfig>& smoothers, RegionGroundTruth& out) {
  std::vector<SeriesSpec> specs;
  for (const auto& stream : config.streams) {
    const DailySeries* series = panel.find(out.region_id, stream);
    if (series == nullptr || series->observed_count() == 0) {
      out.excluded = true;
      out.reason = "missing stream " + stream;
      return;
    }
    double total = 0.0;
    for (double v : series->raw()) {
      if (!std::isnan(v)) total += v;
    }
    if (total < config.count_floor) {
      out.excluded = true;
      out.reason = "stream " + stream + " totals " + format_double(total) + " < floor " +
                   format_double(config.count_floor);
      return;
    }
    SeriesSpec spec;
    spec.name = stream;
    spec.series = *series;
    const auto model = config.models.find(stream);
    if (model != config.models.end()) {
      spec.model = model->second;
    } else {
      spec.model = panel.stream_kind(stream) == StreamKind::count ? SmoothModel::poisson : SmoothModel::lognormal;
    }
    spec.correct_weekday = config.correct_weekday;
    specs.push_back(std::move(spec));
  }

  try {
    for (const auto& smoother : smoothers) {
      if (config.mode == ConsensusMode::shared) {
        SmoothResult r = smooth_multivariate(specs, smoother);
        if (!r.converged) out.warnings.push_back("smoother did not converge at " + config_label(smoother));
        out.growth.push_back(growth_series(r));
        out.growth_labels.push_back(config_label(smoother));
      } else {
        for (const auto& spec : specs) {
          SmoothResult r = smooth_univariate(spec, smoother);
          if (!r.converged) {
            out.warnings.push_back("smoother did not converge at " + config_label(smoother) + " for " + spec.name);
          }
          out.growth.push_back(growth_series(r));
          out.growth_labels.push_back(config_label(smoother) + ":" + spec.name);
        }
      }
    }
  } catch (const Error& e) {
    out.excluded = true;
    out.reason = std::string("smoother failed: ") + e.what();
    out.growth.clear();
    out.growth_labels.clear();
    return;
  }

  // Univariate smooths may cover different spans; agree on the common part.
  Date first = out.growth.front().first();
  Date last = out.growth.front().last();
  for (const auto& g : out.growth) {
    first = std::max(first, g.first());
    last = std::min(last, g.last());
  }
  for (auto& g : out.growth) {
    if (g.first() == first && g.last() == last) continue;
    const auto raw = g.raw();
    const auto begin = raw.begin() + (first - g.first());
    g = DailySeries(first, std::vector<double>(begin, begin + (last - first + 1)));
  }
  out.consensus = consensus_trends(out.growth, config.consensus);
}

}  // namespace

GroundTruth build_ground_truth(const StreamPanel& panel, const GroundTruthConfig& config) {
  if (config.streams.empty()) throw UsageError("ground truth needs at least one stream");
  for (const auto& s : config.streams) {
    if (!panel.streams().contains(s)) throw UsageError("unknown stream '" + s + "'");
  }
  GroundTruth truth;
  truth.streams = config.streams;
  truth.smoothers = resolved_smoothers(config);
  truth.mode = config.mode;
  if (truth.smoothers.size() * (config.mode == ConsensusMode::per_stream ? config.streams.size() : 1) < 2) {
    throw UsageError("consensus needs at least two smoothed configurations");
  }
  for (const auto& c : truth.smoothers) c.validate();

  for (const auto& region : panel.regions()) {
    RegionGroundTruth r;
    r.region_id = region;
    truth.regions.push_back(std::move(r));
  }
  parallel_for(truth.regions.size(), config.jobs, [&](std::size_t i) {
    process_region(panel, config, truth.smoothers, truth.regions[i]);
  });
  return truth;
}

std::vector<LabeledInterval> increasing_intervals(const GroundTruth& truth) {
  std::vector<LabeledInterval> out;
  for (const auto& r : truth.regions) {
    if (r.excluded) continue;
    for (const auto& range : r.consensus.increasing) out.push_back({r.region_id, range});
  }
  return out;
}

std::vector<LabeledInterval> null_intervals(const GroundTruth& truth) {
  std::vector<LabeledInterval> out;
  for (const auto& r : truth.regions) {
    if (r.excluded) continue;
    for (const auto& range : r.consensus.null) out.push_back({r.region_id, range});
  }
  return out;
}

void write_intervals_csv(std::ostream& out, std::span<const LabeledInterval> intervals) {
  write_csv_record(out, {"region_id", "start", "end"});
  for (const auto& i : intervals) {
    write_csv_record(out, {i.region_id, i.range.first.iso(), i.range.last.iso()});
  }
}

std::vector<LabeledInterval> read_intervals_csv(std::istream& in) {
  const CsvTable table = read_csv(in);
  const std::size_t c_region = table.require_column("region_id");
  const std::size_t c_start = table.require_column("start");
  const std::size_t c_end = table.require_column("end");
  std::vector<LabeledInterval> out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    Date start, end;
    if (!Date::try_parse(row[c_start], start) || !Date::try_parse(row[c_end], end) || end < start) {
      throw DataError("bad_interval", "invalid interval on line " + std::to_string(table.lines[i]));
    }
    out.push_back({row[c_region], DateRange{start, end}});
  }
  return out;
}

std::vector<LabeledInterval> read_intervals_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("io", "cannot open " + path);
  return read_intervals_csv(in);
}

}  // namespace trendwatch
