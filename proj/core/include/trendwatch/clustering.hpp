#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "trendwatch/network.hpp"

namespace trendwatch {

enum class ClusterMethod { kmeans_mds, kmedoids };

std::string to_string(ClusterMethod method);
ClusterMethod parse_cluster_method(std::string_view text);

struct ClusterOptions {
  int k = 10;
  int embed_dim = 10;
  std::uint64_t seed = 20240101;
  int restarts = 50;
  int max_iter = 300;
  ClusterMethod method = ClusterMethod::kmeans_mds;
};

struct Clustering {
  /// Labels in 0..k−1, numbered by first appearance in region order.
  std::map<std::string, int> labels;
  double inertia = 0.0;  ///< within-cluster sum of squares (k-means) or of distances (k-medoids)
  int embed_dim = 0;     ///< embedding dimension actually used
  std::vector<std::string> warnings;
};

/// Classical MDS coordinates (rows follow d.regions()). Off-diagonal entries
/// are shifted by a constant when needed so that none is negative; fewer
/// dimensions than requested are returned when the spectrum runs out.
std::vector<std::vector<double>> classical_mds(const DistanceMatrix& d, int dim,
                                               std::vector<std::string>* warnings = nullptr);

/// k-means++ on an MDS embedding (or k-medoids on D), best of `restarts`.
Clustering cluster_regions(const DistanceMatrix& d, const ClusterOptions& options = {});

/// `region_id,cluster`
void write_clusters_csv(std::ostream& out, const Clustering& c);

}  // namespace trendwatch
