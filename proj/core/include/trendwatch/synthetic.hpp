#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "trendwatch/date.hpp"
#include "trendwatch/ground_truth.hpp"
#include "trendwatch/panel.hpp"
#include "trendwatch/smoother.hpp"

namespace trendwatch {

struct SyntheticRegion {
  std::string id;
  std::string state;
  double latitude = 0.0;
  double longitude = 0.0;
  double baseline_mu = 50.0;
  int cluster = 0;
};

struct SyntheticStream {
  std::string id;
  double scale = 1.0;  ///< multiplies the region's mean
  double noise = 1.0;  ///< multiplies the dispersion c
};

/// log μ rises by `rate` per day on days [start, start + duration), then falls
/// by decline_ratio · rate per day until it is back at baseline.
struct PlantedWave {
  int region = 0;  ///< index into ScenarioSpec::regions
  int start = 0;   ///< day offset from the scenario start
  int duration = 30;
  double rate = 0.05;
};

struct ScenarioSpec {
  std::uint64_t seed = 20240101;
  Date start_date = Date::from_ymd(2021, 1, 7);
  int n_days = 540;
  std::vector<SyntheticRegion> regions;
  std::vector<SyntheticStream> streams;
  std::vector<PlantedWave> waves;
  WeekdayEffects weekday_alpha{};
  double dispersion_c = 0.1;
  double decline_ratio = 0.5;

  void validate() const;
};

/// Parameters of the clustered scenario family the default benchmark uses.
struct ClusteredScenarioOptions {
  std::uint64_t seed = 20240101;
  Date start_date = Date::from_ymd(2021, 1, 7);
  int n_days = 540;
  int n_regions = 100;
  int n_clusters = 10;
  double mu_min = 20.0;
  double mu_max = 200.0;
  int min_waves = 2;
  int max_waves = 3;
  double rate_min = 0.04;
  double rate_max = 0.07;
  int duration_min = 25;
  int duration_max = 40;
  int jitter = 5;
  double weekday_amplitude = 0.2;
  double dispersion_c = 0.1;
  double decline_ratio = 0.5;
  std::vector<SyntheticStream> streams{{"clean", 1.0, 0.5}, {"medium", 0.6, 2.0}, {"noisy", 0.3, 5.0}};
};

/// Regions in `n_clusters` groups; each cluster draws a wave schedule that its
/// members share up to a start jitter.
ScenarioSpec clustered_scenario(const ClusteredScenarioOptions& options);
/// The default desk-scale benchmark: 100 regions, 3 streams, 540 days.
ScenarioSpec desk540(std::uint64_t seed = 20240101);

struct SyntheticPanel {
  StreamPanel panel;
  RegionMetaSet meta;
  std::vector<LabeledInterval> truth;  ///< planted increasing spans
  std::vector<LabeledInterval> nulls;  ///< every other day of each region
  std::map<std::string, int> clusters;
};

/// Negative Binomial counts (Poisson when c = 0) with
/// log μ = log(baseline · scale) + α_wd + Σ wave contributions.
/// Each region draws from its own generator derived from the seed.
SyntheticPanel generate_panel(const ScenarioSpec& spec);

/// log μ_t − log(baseline) for one region, without weekday effects.
std::vector<double> planted_log_trend(const ScenarioSpec& spec, int region);

/// Scenario files: either a full specification (with a "regions" array) or
/// clustered-scenario options, optionally {"preset": "desk540"} plus overrides.
ScenarioSpec scenario_from_json(const std::string& text);
std::string scenario_to_json(const ScenarioSpec& spec);

}  // namespace trendwatch
