#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trendwatch/local_regression.hpp"
#include "trendwatch/panel.hpp"

namespace trendwatch {

/// Symmetric region-by-region distance matrix.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  explicit DistanceMatrix(std::vector<std::string> regions, double fill = 0.0);

  std::size_t size() const { return regions_.size(); }
  const std::vector<std::string>& regions() const { return regions_; }
  std::optional<std::size_t> index_of(std::string_view region) const;

  double operator()(std::size_t i, std::size_t j) const { return values_[i * size() + j]; }
  double& operator()(std::size_t i, std::size_t j) { return values_[i * size() + j]; }
  double at(std::string_view a, std::string_view b) const;

  /// Replaces D by (D + Dᵀ) / 2.
  void symmetrize();

  double gamma = 0.0;  ///< soft-DTW temperature; 0 for baseline networks
  /// Regions dropped before the distances were computed, with reasons.
  std::map<std::string, std::string> excluded;

 private:
  std::vector<std::string> regions_;
  std::vector<double> values_;
};

/// Header `region_id,<id>...`, one row per region.
void write_distance_csv(std::ostream& out, const DistanceMatrix& d);
DistanceMatrix read_distance_csv(std::istream& in);

enum class HistoryPolicy { truncate_to_longest_block, fail };

std::string to_string(HistoryPolicy policy);
HistoryPolicy parse_history_policy(std::string_view text);

struct NetworkOptions {
  double gamma = 1.0;
  HistoryPolicy history_policy = HistoryPolicy::truncate_to_longest_block;
  std::size_t min_history = 60;  ///< β values required after gap handling
  bool standardize = true;       ///< z-score each region's β sequence
  int jobs = 1;
};

/// The β̂ sequence of a fit series used as network features: converged fits
/// only, interior gaps of at most 7 days linearly interpolated, longer gaps
/// handled per policy. Throws DataError when the history cannot be used.
std::vector<double> beta_history(const FitSeries& fits, const NetworkOptions& options);

/// Pairwise soft-DTW between regions' β histories (one stream). Regions
/// whose history is unusable are listed in `excluded`.
DistanceMatrix distance_matrix(std::span<const FitSeries> fits, const NetworkOptions& options = {});

enum class NeighborScope { all, in_state };

std::string to_string(NeighborScope scope);
NeighborScope parse_neighbor_scope(std::string_view text);

struct Neighbor {
  std::string region_id;
  double distance = 0.0;
};

struct NeighborGraph {
  int k = 0;
  NeighborScope scope = NeighborScope::all;
  std::map<std::string, std::vector<Neighbor>> neighbors;  ///< nearest first
  std::set<std::string> short_of_k;  ///< regions whose candidate pool had fewer than k

  const std::vector<Neighbor>& of(std::string_view region) const;
};

/// k nearest other regions per region; ties go to the smaller region id.
NeighborGraph knn_graph(const DistanceMatrix& d, int k, NeighborScope scope = NeighborScope::all,
                        const RegionMetaSet& meta = {});

/// `region_id,neighbor_id,rank,distance`
void write_graph_csv(std::ostream& out, const NeighborGraph& graph);
NeighborGraph read_graph_csv(std::istream& in);

struct AggregateOptions {
  std::map<std::string, double> weights;  ///< per neighbor region; default 1
  bool include_self = false;
};

/// Per graph region, the weighted mean of its neighbours' β̂ at each date with
/// variance Σ w² se² / (Σ w)²; z and one-sided p are recomputed. Neighbours
/// without a converged fit on a date are skipped; dates with none are absent.
std::vector<FitSeries> aggregate_growth(std::span<const FitSeries> fits, const NeighborGraph& graph,
                                        const AggregateOptions& options = {});

inline constexpr double kEdgeEpsilon = 1e-9;
inline constexpr double kEarthRadiusKm = 6371.0088;

/// Great-circle distance in km.
double haversine_km(double lat1, double lon1, double lat2, double lon2);

struct Edge {
  std::string a;
  std::string b;
  double weight = 0.0;
};

/// Three columns `region_id,region_id,weight` (header required, names free).
std::vector<Edge> read_edge_list_csv(std::istream& in);

/// Edge weights become distances 1 / (w + 1e−9). Edges are undirected and
/// weights given for both orientations of a pair add up; absent pairs have
/// weight 0. With a non-empty `regions`, unknown ids are an error.
DistanceMatrix baseline_network(std::span<const Edge> edges, std::vector<std::string> regions = {});
/// Great-circle distances between region centroids.
DistanceMatrix baseline_network(const RegionMetaSet& meta);

struct InStateSummary {
  struct RegionShare {
    double fraction = 0.0;
    int count = 0;
  };
  struct StateShare {
    double mean_fraction = 0.0;
    double mean_count = 0.0;
    int regions = 0;
  };
  std::map<std::string, RegionShare> per_region;
  std::map<std::string, StateShare> per_state;
  double mean_fraction = 0.0;  ///< average over states
  double ci_low = 0.0;         ///< normal 95% interval across states
  double ci_high = 0.0;
  double mean_count = 0.0;
};

InStateSummary in_state_fraction(const NeighborGraph& graph, const RegionMetaSet& meta);

/// Spearman correlation of the upper-triangle entries over shared regions.
double network_correlation(const DistanceMatrix& a, const DistanceMatrix& b);

}  // namespace trendwatch
