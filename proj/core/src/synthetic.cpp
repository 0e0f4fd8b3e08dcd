#include "trendwatch/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "trendwatch/error.hpp"

namespace trendwatch {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Independent generator per purpose/region, derived from the master seed.
std::mt19937_64 derived_rng(std::uint64_t seed, std::uint64_t stream) {
  return std::mt19937_64(splitmix64(seed ^ splitmix64(stream)));
}

constexpr std::uint64_t kLayoutStream = 0xA5A5A5A5ULL;

int decline_days(const PlantedWave& w, double decline_ratio) {
  return static_cast<int>(std::ceil(static_cast<double>(w.duration) / decline_ratio - 1e-9));
}

}  // namespace

void ScenarioSpec::validate() const {
  if (n_days < 1) throw UsageError("scenario needs at least one day");
  if (regions.empty()) throw UsageError("scenario needs at least one region");
  if (streams.empty()) throw UsageError("scenario needs at least one stream");
  if (!(dispersion_c >= 0.0)) throw UsageError("dispersion c must be non-negative");
  if (!(decline_ratio > 0.0)) throw UsageError("decline_ratio must be positive");
  const double alpha_sum = std::accumulate(weekday_alpha.begin(), weekday_alpha.end(), 0.0);
  if (std::fabs(alpha_sum) > 1e-8) throw UsageError("weekday effects must sum to zero");
  std::set<std::string> ids;
  for (const auto& r : regions) {
    if (r.id.empty() || !ids.insert(r.id).second) throw UsageError("region ids must be unique and non-empty");
    if (!(r.baseline_mu > 0.0)) throw UsageError("baseline mean of " + r.id + " must be positive");
  }
  std::set<std::string> stream_ids;
  for (const auto& s : streams) {
    if (s.id.empty() || !stream_ids.insert(s.id).second) throw UsageError("stream ids must be unique and non-empty");
    if (!(s.scale > 0.0) || !(s.noise >= 0.0)) throw UsageError("stream " + s.id + " has an invalid scale or noise");
  }
  for (const auto& w : waves) {
    if (w.region < 0 || w.region >= static_cast<int>(regions.size())) throw UsageError("wave names an unknown region");
    if (w.duration < 1 || !(w.rate > 0.0)) throw UsageError("waves need a positive duration and rate");
    if (w.start < 0 || w.start + w.duration > n_days) throw UsageError("wave lies outside the date range");
  }
}

ScenarioSpec clustered_scenario(const ClusteredScenarioOptions& o) {
  if (o.n_regions < 1 || o.n_clusters < 1 || o.n_clusters > o.n_regions) {
    throw UsageError("need 1 <= n_clusters <= n_regions");
  }
  if (o.min_waves < 0 || o.max_waves < o.min_waves) throw UsageError("invalid wave count range");
  if (o.duration_min < 1 || o.duration_max < o.duration_min) throw UsageError("invalid duration range");
  if (!(o.rate_min > 0.0) || o.rate_max < o.rate_min) throw UsageError("invalid rate range");
  if (!(o.mu_min > 0.0) || o.mu_max < o.mu_min) throw UsageError("invalid baseline range");

  ScenarioSpec spec;
  spec.seed = o.seed;
  spec.start_date = o.start_date;
  spec.n_days = o.n_days;
  spec.dispersion_c = o.dispersion_c;
  spec.decline_ratio = o.decline_ratio;
  spec.streams = o.streams;
  for (int d = 0; d < 7; ++d) spec.weekday_alpha[d] = o.weekday_amplitude * std::cos(2.0 * kPi * d / 7.0);
  const double mean_alpha = std::accumulate(spec.weekday_alpha.begin(), spec.weekday_alpha.end(), 0.0) / 7.0;
  for (auto& a : spec.weekday_alpha) a -= mean_alpha;

  std::mt19937_64 rng = derived_rng(o.seed, kLayoutStream);
  const auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  const auto integer = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

  static constexpr const char* kStates[] = {"AK", "BL", "CN", "DV", "EW", "FR", "GT", "HM"};
  for (int i = 0; i < o.n_regions; ++i) {
    SyntheticRegion r;
    char id[16];
    std::snprintf(id, sizeof id, "R%03d", i + 1);
    r.id = id;
    r.cluster = i % o.n_clusters;
    r.baseline_mu = std::exp(uniform(std::log(o.mu_min), std::log(o.mu_max)));
    r.state = kStates[integer(0, 7)];
    r.latitude = uniform(30.0, 47.0);
    r.longitude = uniform(-120.0, -75.0);
    spec.regions.push_back(r);
  }

  struct Scheduled {
    int start;
    int duration;
    double rate;
  };
  for (int c = 0; c < o.n_clusters; ++c) {
    std::vector<Scheduled> schedule;
    const int n_waves = integer(o.min_waves, o.max_waves);
    int cursor = integer(30, 70);
    for (int w = 0; w < n_waves; ++w) {
      Scheduled s{cursor, integer(o.duration_min, o.duration_max), uniform(o.rate_min, o.rate_max)};
      if (s.start + s.duration + o.jitter > o.n_days) break;
      schedule.push_back(s);
      const PlantedWave probe{0, s.start, s.duration, s.rate};
      cursor = s.start + s.duration + decline_days(probe, o.decline_ratio) + 2 * o.jitter + integer(15, 45);
    }
    for (int i = c; i < o.n_regions; i += o.n_clusters) {
      for (const auto& s : schedule) {
        const int start = std::max(0, s.start + integer(-o.jitter, o.jitter));
        spec.waves.push_back({i, start, std::min(s.duration, o.n_days - start), s.rate});
      }
    }
  }
  std::sort(spec.waves.begin(), spec.waves.end(), [](const PlantedWave& a, const PlantedWave& b) {
    return a.region != b.region ? a.region < b.region : a.start < b.start;
  });
  spec.validate();
  return spec;
}

ScenarioSpec desk540(std::uint64_t seed) {
  ClusteredScenarioOptions o;
  o.seed = seed;
  return clustered_scenario(o);
}

std::vector<double> planted_log_trend(const ScenarioSpec& spec, int region) {
  std::vector<double> z(static_cast<std::size_t>(spec.n_days), 0.0);
  for (const auto& w : spec.waves) {
    if (w.region != region) continue;
    const double peak = w.rate * w.duration;
    const double fall = spec.decline_ratio * w.rate;
    for (int t = w.start; t < spec.n_days; ++t) {
      const int k = t - w.start + 1;  // days of the wave elapsed through t
      const double v = k <= w.duration ? w.rate * k : peak - fall * (k - w.duration);
      if (v <= 0.0) break;
      z[static_cast<std::size_t>(t)] += v;
    }
  }
  return z;
}

SyntheticPanel generate_panel(const ScenarioSpec& spec) {
  spec.validate();
  SyntheticPanel out;
  PanelBuilder builder;
  for (const auto& s : spec.streams) builder.set_stream_kind(s.id, StreamKind::count);

  for (std::size_t i = 0; i < spec.regions.size(); ++i) {
    const SyntheticRegion& region = spec.regions[i];
    const std::vector<double> trend = planted_log_trend(spec, static_cast<int>(i));
    std::mt19937_64 rng = derived_rng(spec.seed, i + 1);
    for (const auto& stream : spec.streams) {
      const double c = spec.dispersion_c * stream.noise;
      std::vector<double> counts(static_cast<std::size_t>(spec.n_days));
      for (int t = 0; t < spec.n_days; ++t) {
        const int wd = (spec.start_date + t).weekday();
        const double mu = region.baseline_mu * stream.scale *
                          std::exp(spec.weekday_alpha[wd] + trend[static_cast<std::size_t>(t)]);
        double rate = mu;
        if (c > 0.0) rate = std::gamma_distribution<double>(1.0 / c, c * mu)(rng);
        counts[static_cast<std::size_t>(t)] =
            rate > 0.0 ? static_cast<double>(std::poisson_distribution<long long>(rate)(rng)) : 0.0;
      }
      builder.add_series(region.id, stream.id, spec.start_date, std::move(counts));
    }

    RegionMeta meta;
    meta.region_id = region.id;
    meta.state_code = region.state;
    meta.latitude = region.latitude;
    meta.longitude = region.longitude;
    out.meta[region.id] = meta;
    out.clusters[region.id] = region.cluster;

    std::vector<bool> rising(static_cast<std::size_t>(spec.n_days), false);
    for (const auto& w : spec.waves) {
      if (w.region != static_cast<int>(i)) continue;
      out.truth.push_back({region.id, {spec.start_date + w.start, spec.start_date + (w.start + w.duration - 1)}});
      for (int t = w.start; t < w.start + w.duration; ++t) rising[static_cast<std::size_t>(t)] = true;
    }
    for (const auto& run : runs_where(spec.start_date, rising.size(), [&](std::size_t t) { return !rising[t]; })) {
      out.nulls.push_back({region.id, run});
    }
  }
  out.panel = builder.build();
  return out;
}

namespace {

using Json = nlohmann::ordered_json;

ClusteredScenarioOptions options_from_json(const Json& j) {
  ClusteredScenarioOptions o;
  if (j.contains("preset") && j["preset"].get<std::string>() != "desk540") {
    throw UsageError("unknown scenario preset '" + j["preset"].get<std::string>() + "'");
  }
  const auto read = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j[key].get<std::remove_reference_t<decltype(field)>>();
  };
  read("seed", o.seed);
  if (j.contains("start_date")) o.start_date = Date::parse(j["start_date"].get<std::string>());
  read("n_days", o.n_days);
  read("n_regions", o.n_regions);
  read("n_clusters", o.n_clusters);
  read("mu_min", o.mu_min);
  read("mu_max", o.mu_max);
  read("min_waves", o.min_waves);
  read("max_waves", o.max_waves);
  read("rate_min", o.rate_min);
  read("rate_max", o.rate_max);
  read("duration_min", o.duration_min);
  read("duration_max", o.duration_max);
  read("jitter", o.jitter);
  read("weekday_amplitude", o.weekday_amplitude);
  read("dispersion_c", o.dispersion_c);
  read("decline_ratio", o.decline_ratio);
  if (j.contains("streams")) {
    o.streams.clear();
    for (const auto& s : j["streams"]) {
      o.streams.push_back({s.at("id").get<std::string>(), s.value("scale", 1.0), s.value("noise", 1.0)});
    }
  }
  return o;
}

}  // namespace

ScenarioSpec scenario_from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("scenario file is not valid JSON: ") + e.what());
  }
  try {
    if (!j.contains("regions")) return clustered_scenario(options_from_json(j));
    ScenarioSpec spec;
    spec.seed = j.value("seed", spec.seed);
    if (j.contains("start_date")) spec.start_date = Date::parse(j["start_date"].get<std::string>());
    spec.n_days = j.value("n_days", spec.n_days);
    spec.dispersion_c = j.value("dispersion_c", spec.dispersion_c);
    spec.decline_ratio = j.value("decline_ratio", spec.decline_ratio);
    if (j.contains("weekday_alpha")) spec.weekday_alpha = j["weekday_alpha"].get<WeekdayEffects>();
    for (const auto& r : j["regions"]) {
      SyntheticRegion region;
      region.id = r.at("id").get<std::string>();
      region.state = r.value("state", std::string());
      region.latitude = r.value("latitude", 0.0);
      region.longitude = r.value("longitude", 0.0);
      region.baseline_mu = r.at("baseline_mu").get<double>();
      region.cluster = r.value("cluster", 0);
      spec.regions.push_back(region);
    }
    for (const auto& s : j.at("streams")) {
      spec.streams.push_back({s.at("id").get<std::string>(), s.value("scale", 1.0), s.value("noise", 1.0)});
    }
    std::map<std::string, int> index;
    for (std::size_t i = 0; i < spec.regions.size(); ++i) index[spec.regions[i].id] = static_cast<int>(i);
    if (j.contains("waves")) {
      for (const auto& w : j["waves"]) {
        const auto region_ids = w.at("regions").get<std::vector<std::string>>();
        for (const auto& id : region_ids) {
          const auto it = index.find(id);
          if (it == index.end()) throw UsageError("wave names unknown region '" + id + "'");
          spec.waves.push_back({it->second, w.at("start").get<int>(), w.at("duration").get<int>(),
                                w.at("rate").get<double>()});
        }
      }
    }
    spec.validate();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("invalid scenario: ") + e.what());
  }
}

std::string scenario_to_json(const ScenarioSpec& spec) {
  Json j;
  j["seed"] = spec.seed;
  j["start_date"] = spec.start_date.iso();
  j["n_days"] = spec.n_days;
  j["dispersion_c"] = spec.dispersion_c;
  j["decline_ratio"] = spec.decline_ratio;
  j["weekday_alpha"] = spec.weekday_alpha;
  auto& regions = j["regions"] = Json::array();
  for (const auto& r : spec.regions) {
    regions.push_back({{"id", r.id},
                       {"state", r.state},
                       {"latitude", r.latitude},
                       {"longitude", r.longitude},
                       {"baseline_mu", r.baseline_mu},
                       {"cluster", r.cluster}});
  }
  auto& streams = j["streams"] = Json::array();
  for (const auto& s : spec.streams) streams.push_back({{"id", s.id}, {"scale", s.scale}, {"noise", s.noise}});
  auto& waves = j["waves"] = Json::array();
  for (const auto& w : spec.waves) {
    waves.push_back({{"regions", {spec.regions[static_cast<std::size_t>(w.region)].id}},
                     {"start", w.start},
                     {"duration", w.duration},
                     {"rate", w.rate}});
  }
  return j.dump(2);
}

}  // namespace trendwatch
