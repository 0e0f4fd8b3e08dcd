#include "trendwatch/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "trendwatch/csv.hpp"
#include "trendwatch/error.hpp"
#include "trendwatch/normal.hpp"
#include "trendwatch/parallel.hpp"
#include "trendwatch/soft_dtw.hpp"

namespace trendwatch {

DistanceMatrix::DistanceMatrix(std::vector<std::string> regions, double fill)
    : regions_(std::move(regions)), values_(regions_.size() * regions_.size(), fill) {
  for (std::size_t i = 0; i < size(); ++i) (*this)(i, i) = 0.0;
}

std::optional<std::size_t> DistanceMatrix::index_of(std::string_view region) const {
  const auto it = std::find(regions_.begin(), regions_.end(), region);
  if (it == regions_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - regions_.begin());
}

double DistanceMatrix::at(std::string_view a, std::string_view b) const {
  const auto i = index_of(a);
  const auto j = index_of(b);
  if (!i || !j) throw UsageError("region not in distance matrix");
  return (*this)(*i, *j);
}

void DistanceMatrix::symmetrize() {
  for (std::size_t i = 0; i < size(); ++i) {
    for (std::size_t j = i + 1; j < size(); ++j) {
      const double v = 0.5 * ((*this)(i, j) + (*this)(j, i));
      (*this)(i, j) = (*this)(j, i) = v;
    }
  }
}

void write_distance_csv(std::ostream& out, const DistanceMatrix& d) {
  std::vector<std::string> row{"region_id"};
  row.insert(row.end(), d.regions().begin(), d.regions().end());
  write_csv_record(out, row);
  for (std::size_t i = 0; i < d.size(); ++i) {
    row.assign(1, d.regions()[i]);
    for (std::size_t j = 0; j < d.size(); ++j) row.push_back(format_double(d(i, j)));
    write_csv_record(out, row);
  }
}

DistanceMatrix read_distance_csv(std::istream& in) {
  const CsvTable table = read_csv(in);
  if (table.header.empty() || table.header.front() != "region_id") {
    throw SchemaError("distance matrix needs a leading region_id column");
  }
  std::vector<std::string> regions(table.header.begin() + 1, table.header.end());
  if (table.rows.size() != regions.size()) throw SchemaError("distance matrix is not square");
  DistanceMatrix d(regions);
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const auto& row = table.rows[i];
    if (row.size() != regions.size() + 1 || row[0] != regions[i]) {
      throw SchemaError("distance matrix row " + std::to_string(i + 1) + " does not match the header");
    }
    for (std::size_t j = 0; j < regions.size(); ++j) {
      const auto v = parse_double(row[j + 1]);
      if (!v) throw DataError("bad_value", "non-numeric distance on line " + std::to_string(table.lines[i]));
      d(i, j) = *v;
    }
  }
  return d;
}

std::string to_string(HistoryPolicy policy) {
  return policy == HistoryPolicy::fail ? "fail" : "truncate_to_longest_block";
}

HistoryPolicy parse_history_policy(std::string_view text) {
  if (text == "fail") return HistoryPolicy::fail;
  if (text == "truncate_to_longest_block" || text == "truncate") return HistoryPolicy::truncate_to_longest_block;
  throw UsageError("unknown history policy '" + std::string(text) + "'");
}

std::vector<double> beta_history(const FitSeries& fits, const NetworkOptions& options) {
  std::vector<DatedFit> usable;
  for (const auto& f : fits.fits) {
    if (f.fit.converged && std::isfinite(f.fit.beta_hat)) usable.push_back(f);
  }
  if (usable.empty()) throw InsufficientHistoryError("no converged fits");
  const Date first = usable.front().date;
  std::vector<double> beta(static_cast<std::size_t>(usable.back().date - first + 1), std::nan(""));
  for (const auto& f : usable) beta[static_cast<std::size_t>(f.date - first)] = f.fit.beta_hat;

  // Fill short interior gaps; collect the blocks separated by long ones.
  std::vector<std::pair<std::size_t, std::size_t>> blocks;  // [begin, end)
  std::size_t block_begin = 0;
  std::size_t t = 0;
  while (t < beta.size()) {
    if (!std::isnan(beta[t])) {
      ++t;
      continue;
    }
    const std::size_t gap_begin = t;
    while (std::isnan(beta[t])) ++t;  // the last entry is observed
    const std::size_t gap = t - gap_begin;
    if (gap <= static_cast<std::size_t>(kMaxInterpolatedGap)) {
      const double left = beta[gap_begin - 1];
      const double right = beta[t];
      for (std::size_t k = gap_begin; k < t; ++k) {
        const double w = static_cast<double>(k - gap_begin + 1) / static_cast<double>(gap + 1);
        beta[k] = left + w * (right - left);
      }
    } else {
      if (options.history_policy == HistoryPolicy::fail) {
        throw GapError("gap of " + std::to_string(gap) + " days in the beta history");
      }
      blocks.emplace_back(block_begin, gap_begin);
      block_begin = t;
    }
  }
  blocks.emplace_back(block_begin, beta.size());
  const auto longest = std::max_element(blocks.begin(), blocks.end(), [](const auto& a, const auto& b) {
    return a.second - a.first < b.second - b.first;
  });
  std::vector<double> out(beta.begin() + static_cast<std::ptrdiff_t>(longest->first),
                          beta.begin() + static_cast<std::ptrdiff_t>(longest->second));
  if (out.size() < options.min_history) {
    throw InsufficientHistoryError("beta history has " + std::to_string(out.size()) + " values, need " +
                                   std::to_string(options.min_history));
  }
  if (options.standardize) {
    const double n = static_cast<double>(out.size());
    const double mean = std::accumulate(out.begin(), out.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : out) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    for (double& v : out) v = sd > 0.0 ? (v - mean) / sd : 0.0;
  }
  return out;
}

DistanceMatrix distance_matrix(std::span<const FitSeries> fits, const NetworkOptions& options) {
  if (!(options.gamma > 0.0)) throw UsageError("gamma must be positive");
  std::vector<const FitSeries*> ordered;
  for (const auto& f : fits) ordered.push_back(&f);
  std::sort(ordered.begin(), ordered.end(),
            [](const FitSeries* a, const FitSeries* b) { return a->region_id < b->region_id; });
  for (std::size_t i = 1; i < ordered.size(); ++i) {
    if (ordered[i]->region_id == ordered[i - 1]->region_id) {
      throw UsageError("region " + ordered[i]->region_id + " appears twice in the network input");
    }
  }

  std::vector<std::string> regions;
  std::vector<std::vector<double>> histories;
  std::map<std::string, std::string> excluded;
  for (const FitSeries* f : ordered) {
    try {
      histories.push_back(beta_history(*f, options));
      regions.push_back(f->region_id);
    } catch (const DataError& e) {
      excluded[f->region_id] = e.what();
    }
  }

  DistanceMatrix d(regions);
  d.gamma = options.gamma;
  d.excluded = std::move(excluded);
  const std::size_t n = regions.size();
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  }
  // soft-DTW with a symmetric cost is symmetric in its arguments, so each
  // unordered pair is evaluated once.
  std::vector<double> values(pairs.size());
  parallel_for(pairs.size(), options.jobs, [&](std::size_t p) {
    values[p] = soft_dtw(histories[pairs[p].first], histories[pairs[p].second], options.gamma);
  });
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    d(pairs[p].first, pairs[p].second) = d(pairs[p].second, pairs[p].first) = values[p];
  }
  return d;
}

std::string to_string(NeighborScope scope) { return scope == NeighborScope::all ? "all" : "in_state"; }

NeighborScope parse_neighbor_scope(std::string_view text) {
  if (text == "all") return NeighborScope::all;
  if (text == "in_state") return NeighborScope::in_state;
  throw UsageError("unknown neighbor scope '" + std::string(text) + "'");
}

const std::vector<Neighbor>& NeighborGraph::of(std::string_view region) const {
  const auto it = neighbors.find(std::string(region));
  if (it == neighbors.end()) throw UsageError("region " + std::string(region) + " is not in the graph");
  return it->second;
}

NeighborGraph knn_graph(const DistanceMatrix& d, int k, NeighborScope scope, const RegionMetaSet& meta) {
  if (k < 1) throw UsageError("k must be at least 1");
  const auto state_of = [&](const std::string& region) -> const std::string& {
    const auto it = meta.find(region);
    if (it == meta.end() || it->second.state_code.empty()) {
      throw UsageError("in_state scope needs a state code for region " + region);
    }
    return it->second.state_code;
  };
  NeighborGraph g;
  g.k = k;
  g.scope = scope;
  const auto& regions = d.regions();
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < regions.size(); ++i) {
    pool.clear();
    for (std::size_t j = 0; j < regions.size(); ++j) {
      if (j == i || std::isnan(d(i, j))) continue;
      if (scope == NeighborScope::in_state && state_of(regions[j]) != state_of(regions[i])) continue;
      pool.push_back(j);
    }
    std::sort(pool.begin(), pool.end(), [&](std::size_t a, std::size_t b) {
      if (d(i, a) != d(i, b)) return d(i, a) < d(i, b);
      return regions[a] < regions[b];
    });
    if (pool.size() < static_cast<std::size_t>(k)) g.short_of_k.insert(regions[i]);
    auto& list = g.neighbors[regions[i]];
    for (std::size_t r = 0; r < std::min(pool.size(), static_cast<std::size_t>(k)); ++r) {
      list.push_back({regions[pool[r]], d(i, pool[r])});
    }
  }
  return g;
}

void write_graph_csv(std::ostream& out, const NeighborGraph& graph) {
  write_csv_record(out, {"region_id", "neighbor_id", "rank", "distance"});
  for (const auto& [region, list] : graph.neighbors) {
    for (std::size_t r = 0; r < list.size(); ++r) {
      write_csv_record(out, {region, list[r].region_id, std::to_string(r + 1), format_double(list[r].distance)});
    }
  }
}

NeighborGraph read_graph_csv(std::istream& in) {
  const CsvTable table = read_csv(in);
  const std::size_t c_region = table.require_column("region_id");
  const std::size_t c_neighbor = table.require_column("neighbor_id");
  const std::size_t c_rank = table.require_column("rank");
  const std::size_t c_distance = table.require_column("distance");
  std::map<std::string, std::vector<std::pair<int, Neighbor>>> ranked;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const auto rank = parse_double(row[c_rank]);
    const auto dist = parse_double(row[c_distance]);
    if (!rank || !dist) throw DataError("bad_value", "bad graph row on line " + std::to_string(table.lines[i]));
    ranked[row[c_region]].push_back({static_cast<int>(*rank), {row[c_neighbor], *dist}});
  }
  NeighborGraph g;
  for (auto& [region, list] : ranked) {
    std::sort(list.begin(), list.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    auto& out = g.neighbors[region];
    for (auto& [rank, n] : list) out.push_back(std::move(n));
    g.k = std::max(g.k, static_cast<int>(out.size()));
  }
  return g;
}

std::vector<FitSeries> aggregate_growth(std::span<const FitSeries> fits, const NeighborGraph& graph,
                                        const AggregateOptions& options) {
  std::map<std::string, const FitSeries*> by_region;
  for (const auto& f : fits) by_region[f.region_id] = &f;
  const auto lookup = [&](const std::string& region) {
    const auto it = by_region.find(region);
    if (it == by_region.end()) throw UsageError("no fit series for graph region " + region);
    return it->second;
  };
  const auto weight_of = [&](const std::string& region) {
    const auto it = options.weights.find(region);
    const double w = it == options.weights.end() ? 1.0 : it->second;
    if (!(w > 0.0)) throw UsageError("aggregation weight for " + region + " must be positive");
    return w;
  };

  std::vector<FitSeries> out;
  for (const auto& [region, list] : graph.neighbors) {
    const FitSeries* focal = lookup(region);
    std::vector<std::pair<const FitSeries*, double>> members;
    if (options.include_self) members.emplace_back(focal, weight_of(region));
    for (const auto& n : list) members.emplace_back(lookup(n.region_id), weight_of(n.region_id));

    FitSeries agg;
    agg.region_id = region;
    agg.stream_id = focal->stream_id;
    agg.model = focal->model;
    agg.window_n = focal->window_n;
    std::set<Date> dates;
    for (const auto& [m, w] : members) {
      for (const auto& f : m->fits) dates.insert(f.date);
    }
    for (const Date d : dates) {
      double sw = 0.0, sw2se2 = 0.0, swb = 0.0, swa = 0.0;
      const RegressionFit* only = nullptr;
      int available = 0;
      for (const auto& [m, w] : members) {
        const RegressionFit* f = m->at(d);
        if (f == nullptr || !f->converged) continue;
        ++available;
        only = f;
        sw += w;
        swb += w * f->beta_hat;
        swa += w * f->alpha_hat;
        sw2se2 += w * w * f->se_beta * f->se_beta;
      }
      if (available == 0) continue;
      if (available == 1) {
        agg.fits.push_back({d, *only});
        continue;
      }
      RegressionFit r;
      r.model = focal->model;
      r.n = focal->window_n;
      r.converged = true;
      r.alpha_hat = swa / sw;
      r.beta_hat = swb / sw;
      r.se_beta = std::sqrt(sw2se2) / sw;
      if (r.se_beta > 0.0) {
        r.z_score = r.beta_hat / r.se_beta;
      } else {
        r.z_score = r.beta_hat == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), r.beta_hat);
      }
      r.p_one_sided = normal_sf(r.z_score);
      agg.fits.push_back({d, r});
    }
    out.push_back(std::move(agg));
  }
  return out;
}

double haversine_km(double lat1, double lon1, double lat2, double lon2) {
  constexpr double kRad = 3.14159265358979323846 / 180.0;
  const double dlat = (lat2 - lat1) * kRad;
  const double dlon = (lon2 - lon1) * kRad;
  const double s = std::sin(dlat / 2.0);
  const double c = std::sin(dlon / 2.0);
  const double h = s * s + std::cos(lat1 * kRad) * std::cos(lat2 * kRad) * c * c;
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

std::vector<Edge> read_edge_list_csv(std::istream& in) {
  const CsvTable table = read_csv(in);
  if (table.header.size() < 3) throw SchemaError("edge list needs region_id,region_id,weight columns");
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const auto w = parse_double(row[2]);
    if (!w || *w < 0.0) {
      throw DataError("bad_value", "edge weight must be a non-negative number on line " +
                                       std::to_string(table.lines[i]));
    }
    edges.push_back({row[0], row[1], *w});
  }
  return edges;
}

DistanceMatrix baseline_network(std::span<const Edge> edges, std::vector<std::string> regions) {
  if (regions.empty()) {
    std::set<std::string> ids;
    for (const auto& e : edges) {
      ids.insert(e.a);
      ids.insert(e.b);
    }
    regions.assign(ids.begin(), ids.end());
  }
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < regions.size(); ++i) index[regions[i]] = i;
  const std::size_t n = regions.size();
  std::vector<double> w(n * n, 0.0);
  for (const auto& e : edges) {
    const auto a = index.find(e.a);
    const auto b = index.find(e.b);
    if (a == index.end() || b == index.end()) {
      throw DataError("unknown_region", "edge " + e.a + " - " + e.b + " names an unknown region");
    }
    if (a->second == b->second) continue;
    w[a->second * n + b->second] += e.weight;
    w[b->second * n + a->second] += e.weight;
  }
  DistanceMatrix d(std::move(regions));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) d(i, j) = 1.0 / (w[i * n + j] + kEdgeEpsilon);
    }
  }
  return d;
}

DistanceMatrix baseline_network(const RegionMetaSet& meta) {
  std::vector<std::string> regions;
  for (const auto& [id, m] : meta) {
    if (!m.latitude || !m.longitude) throw DataError("missing_coordinates", "region " + id + " has no coordinates");
    regions.push_back(id);
  }
  DistanceMatrix d(regions);
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const auto& a = meta.at(regions[i]);
    for (std::size_t j = i + 1; j < regions.size(); ++j) {
      const auto& b = meta.at(regions[j]);
      d(i, j) = d(j, i) = haversine_km(*a.latitude, *a.longitude, *b.latitude, *b.longitude);
    }
  }
  return d;
}

InStateSummary in_state_fraction(const NeighborGraph& graph, const RegionMetaSet& meta) {
  const auto state_of = [&](const std::string& region) -> const std::string& {
    const auto it = meta.find(region);
    if (it == meta.end() || it->second.state_code.empty()) {
      throw UsageError("no state code for region " + region);
    }
    return it->second.state_code;
  };
  InStateSummary s;
  std::map<std::string, std::pair<double, double>> sums;  // state -> (Σ fraction, Σ count)
  for (const auto& [region, list] : graph.neighbors) {
    if (list.empty()) continue;
    const std::string& state = state_of(region);
    int same = 0;
    for (const auto& n : list) same += state_of(n.region_id) == state ? 1 : 0;
    auto& r = s.per_region[region];
    r.count = same;
    r.fraction = static_cast<double>(same) / static_cast<double>(list.size());
    auto& acc = sums[state];
    acc.first += r.fraction;
    acc.second += same;
    ++s.per_state[state].regions;
  }
  if (s.per_state.empty()) return s;
  std::vector<double> fractions;
  double count_total = 0.0;
  for (auto& [state, share] : s.per_state) {
    share.mean_fraction = sums[state].first / share.regions;
    share.mean_count = sums[state].second / share.regions;
    fractions.push_back(share.mean_fraction);
    count_total += share.mean_count;
  }
  const double m = static_cast<double>(fractions.size());
  s.mean_fraction = std::accumulate(fractions.begin(), fractions.end(), 0.0) / m;
  s.mean_count = count_total / m;
  double half = 0.0;
  if (fractions.size() > 1) {
    double ss = 0.0;
    for (double f : fractions) ss += (f - s.mean_fraction) * (f - s.mean_fraction);
    half = normal_quantile(0.975) * std::sqrt(ss / (m - 1.0)) / std::sqrt(m);
  }
  s.ci_low = s.mean_fraction - half;
  s.ci_high = s.mean_fraction + half;
  return s;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> rank(x.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = r;
    i = j + 1;
  }
  return rank;
}

}  // namespace

double network_correlation(const DistanceMatrix& a, const DistanceMatrix& b) {
  std::vector<std::string> common;
  for (const auto& r : a.regions()) {
    if (b.index_of(r)) common.push_back(r);
  }
  std::sort(common.begin(), common.end());
  std::vector<std::size_t> ia, ib;
  for (const auto& r : common) {
    ia.push_back(*a.index_of(r));
    ib.push_back(*b.index_of(r));
  }
  std::vector<double> x, y;
  for (std::size_t i = 0; i < common.size(); ++i) {
    for (std::size_t j = i + 1; j < common.size(); ++j) {
      x.push_back(a(ia[i], ia[j]));
      y.push_back(b(ib[i], ib[j]));
    }
  }
  if (x.size() < 10) {
    throw DataError("insufficient_overlap", "networks share " + std::to_string(x.size()) + " region pairs, need 10");
  }
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(rx.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw NumericError("degenerate", "a network has constant distances");
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace trendwatch
