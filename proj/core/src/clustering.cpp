#include "trendwatch/clustering.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>

#include "trendwatch/csv.hpp"
#include "trendwatch/error.hpp"

namespace trendwatch {

std::string to_string(ClusterMethod method) {
  return method == ClusterMethod::kmeans_mds ? "kmeans" : "kmedoids";
}

ClusterMethod parse_cluster_method(std::string_view text) {
  if (text == "kmeans" || text == "kmeans_mds") return ClusterMethod::kmeans_mds;
  if (text == "kmedoids") return ClusterMethod::kmedoids;
  throw UsageError("unknown cluster method '" + std::string(text) + "'");
}

namespace {

// Smallest constant making every off-diagonal entry non-negative.
double nonnegative_shift(const DistanceMatrix& d) {
  double lowest = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (std::size_t j = 0; j < d.size(); ++j) {
      if (i != j) lowest = std::min(lowest, d(i, j));
    }
  }
  return -lowest;
}

double shifted(const DistanceMatrix& d, double shift, std::size_t i, std::size_t j) {
  return i == j ? 0.0 : d(i, j) + shift;
}

using Points = std::vector<std::vector<double>>;

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) s += (a[c] - b[c]) * (a[c] - b[c]);
  return s;
}

// Draws an index with probability proportional to weight; falls back to the
// first index not yet taken when all weights vanish.
std::size_t weighted_draw(const std::vector<double>& weight, const std::vector<bool>& taken, std::mt19937_64& rng) {
  double total = 0.0;
  for (double w : weight) total += w;
  if (total > 0.0) {
    const double u = std::uniform_real_distribution<double>(0.0, total)(rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < weight.size(); ++i) {
      acc += weight[i];
      if (u < acc && weight[i] > 0.0) return i;
    }
    for (std::size_t i = weight.size(); i-- > 0;) {
      if (weight[i] > 0.0) return i;
    }
  }
  for (std::size_t i = 0; i < taken.size(); ++i) {
    if (!taken[i]) return i;
  }
  return 0;
}

// Seeds chosen by D²-weighting on a generic pairwise cost.
template <typename Cost>
std::vector<std::size_t> plus_plus_seeds(std::size_t n, int k, Cost cost, std::mt19937_64& rng) {
  std::vector<std::size_t> seeds;
  std::vector<bool> taken(n, false);
  seeds.push_back(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
  taken[seeds.back()] = true;
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  while (seeds.size() < static_cast<std::size_t>(k)) {
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = taken[i] ? 0.0 : std::min(nearest[i], cost(i, seeds.back()));
    }
    const std::size_t next = weighted_draw(nearest, taken, rng);
    seeds.push_back(next);
    taken[next] = true;
  }
  return seeds;
}

struct Partition {
  std::vector<int> labels;
  double inertia = std::numeric_limits<double>::infinity();
};

Partition kmeans_once(const Points& x, int k, int max_iter, std::mt19937_64& rng) {
  const std::size_t n = x.size();
  const std::size_t dim = x.front().size();
  const auto seeds = plus_plus_seeds(n, k, [&](std::size_t i, std::size_t j) { return squared_distance(x[i], x[j]); }, rng);
  Points centers;
  for (std::size_t s : seeds) centers.push_back(x[s]);

  Partition p;
  p.labels.assign(n, -1);
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = squared_distance(x[i], centers[0]);
      for (int c = 1; c < k; ++c) {
        const double dd = squared_distance(x[i], centers[c]);
        if (dd < best_d) {
          best_d = dd;
          best = c;
        }
      }
      changed = changed || p.labels[i] != best;
      p.labels[i] = best;
    }
    if (!changed) break;
    std::vector<std::vector<double>> sum(k, std::vector<double>(dim, 0.0));
    std::vector<int> count(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++count[p.labels[i]];
      for (std::size_t c = 0; c < dim; ++c) sum[p.labels[i]][c] += x[i][c];
    }
    for (int c = 0; c < k; ++c) {
      if (count[c] == 0) {
        // Re-seed an empty cluster at the point worst served by its centre.
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double dd = squared_distance(x[i], centers[p.labels[i]]);
          if (dd > far_d) {
            far_d = dd;
            far = i;
          }
        }
        centers[c] = x[far];
        p.labels[far] = c;
        continue;
      }
      for (std::size_t j = 0; j < dim; ++j) centers[c][j] = sum[c][j] / count[c];
    }
  }
  p.inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) p.inertia += squared_distance(x[i], centers[p.labels[i]]);
  return p;
}

Partition kmedoids_once(const DistanceMatrix& d, double shift, int k, int max_iter, std::mt19937_64& rng) {
  const std::size_t n = d.size();
  const auto cost = [&](std::size_t i, std::size_t j) { return shifted(d, shift, i, j); };
  std::vector<std::size_t> medoids = plus_plus_seeds(
      n, k, [&](std::size_t i, std::size_t j) { return cost(i, j) * cost(i, j); }, rng);
  Partition p;
  p.labels.assign(n, -1);
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      for (int c = 1; c < k; ++c) {
        if (cost(i, medoids[c]) < cost(i, medoids[best])) best = c;
      }
      changed = changed || p.labels[i] != best;
      p.labels[i] = best;
    }
    if (!changed && iter > 0) break;
    bool moved = false;
    for (int c = 0; c < k; ++c) {
      std::size_t best = medoids[c];
      double best_sum = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < n; ++i) {
        if (p.labels[i] != c) continue;
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          if (p.labels[j] == c) s += cost(i, j);
        }
        if (s < best_sum) {
          best_sum = s;
          best = i;
        }
      }
      moved = moved || best != medoids[c];
      medoids[c] = best;
    }
    if (!moved) break;
  }
  p.inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) p.inertia += cost(i, medoids[p.labels[i]]);
  return p;
}

std::vector<int> canonical_labels(const std::vector<int>& labels) {
  std::map<int, int> remap;
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto it = remap.try_emplace(labels[i], static_cast<int>(remap.size())).first;
    out[i] = it->second;
  }
  return out;
}

}  // namespace

std::vector<std::vector<double>> classical_mds(const DistanceMatrix& d, int dim, std::vector<std::string>* warnings) {
  const auto n = static_cast<Eigen::Index>(d.size());
  if (dim < 1) throw UsageError("embedding dimension must be at least 1");
  const double shift = nonnegative_shift(d);
  if (shift > 0.0 && warnings != nullptr) {
    warnings->push_back("distances shifted by " + format_double(shift) + " to remove negative entries");
  }
  Eigen::MatrixXd b(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double v = shifted(d, shift, static_cast<std::size_t>(i), static_cast<std::size_t>(j));
      b(i, j) = -0.5 * v * v;
    }
  }
  const Eigen::VectorXd row_mean = b.rowwise().mean();
  const double grand = row_mean.mean();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) b(i, j) += grand - row_mean(i) - row_mean(j);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(b);
  if (eig.info() != Eigen::Success) throw NumericError("eigen", "MDS eigendecomposition failed");
  const Eigen::VectorXd& values = eig.eigenvalues();  // ascending
  const double top = values.size() > 0 ? values(values.size() - 1) : 0.0;
  const double floor = std::max(top, 0.0) * 1e-10;
  int usable = 0;
  for (Eigen::Index i = values.size(); i-- > 0 && usable < dim;) {
    if (values(i) > floor && values(i) > 0.0) ++usable;
  }
  if (usable < dim && warnings != nullptr) {
    warnings->push_back("embedding reduced from " + std::to_string(dim) + " to " + std::to_string(usable) +
                        " dimensions");
  }
  std::vector<std::vector<double>> coords(static_cast<std::size_t>(n), std::vector<double>(usable));
  for (int c = 0; c < usable; ++c) {
    const Eigen::Index col = values.size() - 1 - c;
    Eigen::VectorXd v = eig.eigenvectors().col(col);
    Eigen::Index pivot = 0;
    v.cwiseAbs().maxCoeff(&pivot);
    if (v(pivot) < 0.0) v = -v;
    const double scale = std::sqrt(values(col));
    for (Eigen::Index i = 0; i < n; ++i) coords[static_cast<std::size_t>(i)][c] = v(i) * scale;
  }
  return coords;
}

Clustering cluster_regions(const DistanceMatrix& d, const ClusterOptions& options) {
  const std::size_t n = d.size();
  if (options.k < 1) throw UsageError("k must be at least 1");
  if (static_cast<std::size_t>(options.k) > n) {
    throw UsageError("k = " + std::to_string(options.k) + " exceeds the " + std::to_string(n) + " regions");
  }
  if (options.restarts < 1) throw UsageError("restarts must be at least 1");
  Clustering result;
  std::mt19937_64 rng(options.seed);
  Partition best;
  if (options.method == ClusterMethod::kmeans_mds) {
    auto coords = classical_mds(d, options.embed_dim, &result.warnings);
    result.embed_dim = coords.empty() ? 0 : static_cast<int>(coords.front().size());
    if (result.embed_dim == 0) {
      // Every distance is zero: one point repeated.
      for (auto& c : coords) c.assign(1, 0.0);
    }
    for (int r = 0; r < options.restarts; ++r) {
      Partition p = kmeans_once(coords, options.k, options.max_iter, rng);
      if (p.inertia < best.inertia) best = std::move(p);
    }
  } else {
    const double shift = nonnegative_shift(d);
    if (shift > 0.0) result.warnings.push_back("distances shifted by " + format_double(shift));
    for (int r = 0; r < options.restarts; ++r) {
      Partition p = kmedoids_once(d, shift, options.k, options.max_iter, rng);
      if (p.inertia < best.inertia) best = std::move(p);
    }
  }
  result.inertia = best.inertia;
  const auto labels = canonical_labels(best.labels);
  for (std::size_t i = 0; i < n; ++i) result.labels[d.regions()[i]] = labels[i];
  return result;
}

void write_clusters_csv(std::ostream& out, const Clustering& c) {
  write_csv_record(out, {"region_id", "cluster"});
  for (const auto& [region, label] : c.labels) write_csv_record(out, {region, std::to_string(label)});
}

}  // namespace trendwatch
