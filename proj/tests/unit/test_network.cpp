#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "trendwatch/clustering.hpp"
#include "trendwatch/error.hpp"
#include "trendwatch/network.hpp"
#include "trendwatch/normal.hpp"
#include "trendwatch/soft_dtw.hpp"

using namespace trendwatch;

namespace {

const Date kFirst = Date::parse("2021-03-01");

FitSeries betas(const std::string& region, const std::vector<double>& b, double se = 0.01) {
  FitSeries s;
  s.region_id = region;
  s.stream_id = "x";
  s.window_n = 21;
  for (std::size_t i = 0; i < b.size(); ++i) {
    RegressionFit f;
    f.converged = !std::isnan(b[i]);
    f.beta_hat = f.converged ? b[i] : 0.0;
    f.se_beta = se;
    f.z_score = f.beta_hat / se;
    f.p_one_sided = normal_sf(f.z_score);
    s.fits.push_back({kFirst + static_cast<int>(i), f});
  }
  return s;
}

std::vector<double> random_walk(std::mt19937_64& rng, int n, double scale) {
  std::normal_distribution<double> e(0, scale);
  std::vector<double> v(n);
  double x = 0;
  for (auto& y : v) y = (x += e(rng));
  return v;
}

DistanceMatrix from_points(const std::vector<std::vector<double>>& pts) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    char b[8];
    std::snprintf(b, sizeof b, "p%03zu", i);
    ids.push_back(b);
  }
  DistanceMatrix d(ids);
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = 0; j < pts.size(); ++j) {
      double s = 0;
      for (std::size_t k = 0; k < pts[i].size(); ++k) s += (pts[i][k] - pts[j][k]) * (pts[i][k] - pts[j][k]);
      d(i, j) = std::sqrt(s);
    }
  return d;
}

}  // namespace

TEST(SoftDtw, SingleElementIsSquaredDifference) {
  for (double g : {1e-3, 1.0, 10.0}) EXPECT_DOUBLE_EQ(soft_dtw(std::vector{3.0}, std::vector{5.0}, g), 4.0);
}

TEST(SoftDtw, IdenticalSequencesNearZero) {
  std::vector<double> a(10);
  for (int i = 0; i < 10; ++i) a[i] = std::sin(i);
  const double v = soft_dtw(a, a, 1e-3);
  EXPECT_LT(std::abs(v), 0.05);
}

TEST(SoftDtw, HardLimitMatchesClassicDtw) {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> len(1, 50);
  std::normal_distribution<double> x(0, 1);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> a(len(rng)), b(len(rng));
    for (auto& v : a) v = x(rng);
    for (auto& v : b) v = x(rng);
    EXPECT_NEAR(soft_dtw(a, b, 1e-4), oracle::hard_dtw(a, b), 1e-2);
  }
}

TEST(SoftDtw, ApproachesHardValueFromBelow) {
  std::mt19937_64 rng(9);
  const auto a = random_walk(rng, 30, 1), b = random_walk(rng, 25, 1);
  const double hard = oracle::hard_dtw(a, b);
  double previous = -std::numeric_limits<double>::infinity();
  for (double g : {1.0, 0.1, 1e-3}) {
    const double v = soft_dtw(a, b, g);
    EXPECT_LE(v, hard + 1e-12);
    EXPECT_GE(v, previous);
    previous = v;
  }
}

TEST(SoftDtw, SoftminBelowMin) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(-50, 50);
  for (int rep = 0; rep < 500; ++rep) {
    std::vector<double> v(1 + rep % 6);
    for (auto& x : v) x = u(rng);
    for (double g : {1e-4, 0.5, 1.0, 20.0})
      EXPECT_LE(softmin(v, g), *std::min_element(v.begin(), v.end()) + 1e-12);
  }
  EXPECT_THROW(soft_dtw(std::vector<double>{}, std::vector<double>{1.0}, 1.0), UsageError);
  EXPECT_THROW(soft_dtw(std::vector<double>{1.0}, std::vector<double>{1.0}, 0.0), UsageError);
}

TEST(BetaHistory, InterpolatesShortGapsAndTruncatesLongOnes) {
  std::vector<double> b(100);
  for (int i = 0; i < 100; ++i) b[i] = 0.01 * i;
  for (int i = 40; i < 45; ++i) b[i] = std::nan("");
  NetworkOptions opt;
  opt.standardize = false;
  const auto h = beta_history(betas("r", b), opt);
  ASSERT_EQ(h.size(), 100u);
  EXPECT_NEAR(h[42], 0.42, 1e-12);
  for (int i = 60; i < 70; ++i) b[i] = std::nan("");
  EXPECT_EQ(beta_history(betas("r", b), opt).size(), 60u);
  opt.history_policy = HistoryPolicy::fail;
  EXPECT_THROW(beta_history(betas("r", b), opt), GapError);
}

TEST(DistanceMatrix, IdenticalSeriesGiveEqualDistances) {
  std::mt19937_64 rng(1);
  const auto w = random_walk(rng, 80, 0.01);
  const std::vector<FitSeries> f{betas("a", w), betas("b", w), betas("c", w)};
  const auto d = distance_matrix(f);
  EXPECT_DOUBLE_EQ(d(0, 1), d(0, 2));
  EXPECT_DOUBLE_EQ(d(0, 1), d(1, 2));
  EXPECT_EQ(d(1, 0), d(0, 1));
}

TEST(DistanceMatrix, PlantedClustersSeparate) {
  std::mt19937_64 rng(2);
  const auto c1 = random_walk(rng, 120, 0.01), c2 = random_walk(rng, 120, 0.01);
  std::normal_distribution<double> e(0, 0.002);
  std::vector<FitSeries> f;
  for (int i = 0; i < 10; ++i) {
    auto v = i < 5 ? c1 : c2;
    for (auto& x : v) x += e(rng);
    f.push_back(betas("r" + std::to_string(i), v));
  }
  const auto d = distance_matrix(f);
  double within = 0, between = 0;
  int nw = 0, nb = 0;
  for (int i = 0; i < 10; ++i)
    for (int j = i + 1; j < 10; ++j) {
      if ((i < 5) == (j < 5)) {
        within += d(i, j);
        ++nw;
      } else {
        between += d(i, j);
        ++nb;
      }
    }
  EXPECT_LT(within / nw, between / nb);
}

TEST(DistanceMatrix, SingleRegionAndExclusions) {
  std::mt19937_64 rng(3);
  const std::vector<FitSeries> one{betas("a", random_walk(rng, 80, 0.01))};
  const auto d = distance_matrix(one);
  EXPECT_EQ(d.size(), 1u);
  EXPECT_EQ(knn_graph(d, 3).of("a").size(), 0u);
  const std::vector<FitSeries> two{betas("a", random_walk(rng, 80, 0.01)), betas("short", random_walk(rng, 30, 0.01))};
  const auto e = distance_matrix(two);
  EXPECT_EQ(e.size(), 1u);
  EXPECT_TRUE(e.excluded.count("short"));
}

TEST(DistanceMatrix, CsvRoundTripAndParallelDeterminism) {
  std::mt19937_64 rng(4);
  std::vector<FitSeries> f;
  for (int i = 0; i < 6; ++i) f.push_back(betas("r" + std::to_string(i), random_walk(rng, 70, 0.01)));
  NetworkOptions serial, threaded;
  threaded.jobs = 4;
  const auto a = distance_matrix(f, serial), b = distance_matrix(f, threaded);
  std::stringstream sa, sb;
  write_distance_csv(sa, a);
  write_distance_csv(sb, b);
  EXPECT_EQ(sa.str(), sb.str());
  const auto back = read_distance_csv(sa);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) EXPECT_EQ(back(i, j), a(i, j));
}

TEST(Knn, ExactlyKNeighboursNeverSelf) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 10);
  std::vector<std::vector<double>> pts(40, std::vector<double>(2));
  for (auto& p : pts) p = {u(rng), u(rng)};
  const auto g = knn_graph(from_points(pts), 3);
  for (const auto& [r, list] : g.neighbors) {
    ASSERT_EQ(list.size(), 3u);
    for (const auto& n : list) EXPECT_NE(n.region_id, r);
    EXPECT_LE(list[0].distance, list[1].distance);
  }
  EXPECT_TRUE(g.short_of_k.empty());
}

TEST(Knn, TiesGoToSmallerId) {
  DistanceMatrix d({"a", "c", "b"}, 0.0);
  d(0, 1) = d(1, 0) = 1.0;
  d(0, 2) = d(2, 0) = 1.0;
  d(1, 2) = d(2, 1) = 5.0;
  EXPECT_EQ(knn_graph(d, 1).of("a")[0].region_id, "b");
}

TEST(Knn, InStateScopeFlagsSmallPools) {
  DistanceMatrix d({"a", "b", "c", "d"}, 1.0);
  RegionMetaSet meta;
  meta["a"] = {"a", "PA", {}, {}, {}};
  meta["b"] = {"b", "PA", {}, {}, {}};
  meta["c"] = {"c", "OH", {}, {}, {}};
  meta["d"] = {"d", "OH", {}, {}, {}};
  const auto g = knn_graph(d, 3, NeighborScope::in_state, meta);
  ASSERT_EQ(g.of("a").size(), 1u);
  EXPECT_EQ(g.of("a")[0].region_id, "b");
  EXPECT_TRUE(g.short_of_k.count("a"));
}

TEST(Knn, GraphCsvRoundTrip) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0, 10);
  std::vector<std::vector<double>> pts(8, std::vector<double>(2));
  for (auto& p : pts) p = {u(rng), u(rng)};
  const auto g = knn_graph(from_points(pts), 2);
  std::stringstream buf;
  write_graph_csv(buf, g);
  EXPECT_EQ(buf.str().substr(0, buf.str().find('\n')), "region_id,neighbor_id,rank,distance");
  const auto back = read_graph_csv(buf);
  for (const auto& [r, list] : g.neighbors) {
    ASSERT_EQ(back.of(r).size(), list.size());
    for (std::size_t i = 0; i < list.size(); ++i) EXPECT_EQ(back.of(r)[i].region_id, list[i].region_id);
  }
}

TEST(Aggregate, ArithmeticAndVariance) {
  const std::vector<FitSeries> f{betas("s", {0.5, 0.5}), betas("a", {0.1, 0.0}, 0.02), betas("b", {0.1, 0.3}, 0.02),
                                 betas("c", {0.1, 0.3}, 0.02)};
  NeighborGraph g;
  g.k = 3;
  g.neighbors["s"] = {{"a", 1}, {"b", 1}, {"c", 1}};
  const auto agg = aggregate_growth(f, g);
  ASSERT_EQ(agg.size(), 1u);
  EXPECT_NEAR(agg[0].fits[0].fit.beta_hat, 0.1, 1e-15);
  EXPECT_NEAR(agg[0].fits[1].fit.beta_hat, 0.2, 1e-15);
  EXPECT_NEAR(agg[0].fits[1].fit.se_beta, std::sqrt(3 * 0.02 * 0.02) / 3, 1e-15);
  EXPECT_NEAR(agg[0].fits[1].fit.p_one_sided, normal_sf(0.2 / agg[0].fits[1].fit.se_beta), 1e-15);
}

TEST(Aggregate, MissingNeighbourRenormalises) {
  const double nan = std::nan("");
  const std::vector<FitSeries> f{betas("s", {0.5, 0.5}), betas("a", {0.1, nan}), betas("b", {0.3, nan})};
  NeighborGraph g;
  g.k = 2;
  g.neighbors["s"] = {{"a", 1}, {"b", 1}};
  auto f2 = f;
  f2[2].fits[0].fit.converged = false;
  const auto agg = aggregate_growth(f2, g);
  ASSERT_EQ(agg[0].fits.size(), 1u);
  EXPECT_DOUBLE_EQ(agg[0].fits[0].fit.beta_hat, 0.1);
}

TEST(Aggregate, SelfNeighbourReproducesInput) {
  std::mt19937_64 rng(7);
  const auto w = random_walk(rng, 50, 0.01);
  const std::vector<FitSeries> f{betas("a", w, 0.013)};
  NeighborGraph g;
  g.k = 1;
  g.neighbors["a"] = {{"a", 0}};
  const auto agg = aggregate_growth(f, g);
  ASSERT_EQ(agg[0].fits.size(), f[0].fits.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    EXPECT_EQ(agg[0].fits[i].fit.beta_hat, f[0].fits[i].fit.beta_hat);
    EXPECT_EQ(agg[0].fits[i].fit.se_beta, f[0].fits[i].fit.se_beta);
    EXPECT_EQ(agg[0].fits[i].fit.p_one_sided, f[0].fits[i].fit.p_one_sided);
  }
}

TEST(BaselineNetwork, GreatCircleDistances) {
  EXPECT_NEAR(haversine_km(40.44, -80.00, 40.44, -79.00), 84.5, 1.0);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> lat(-80, 80), lon(-180, 180);
  for (int i = 0; i < 200; ++i) {
    const double a = lat(rng), b = lon(rng), c = lat(rng), d = lon(rng);
    EXPECT_NEAR(haversine_km(a, b, c, d), oracle::great_circle_km(a, b, c, d, kEarthRadiusKm), 1e-6);
  }
  RegionMetaSet meta;
  meta["x"] = {"x", "PA", 40.0, -80.0, {}};
  meta["y"] = {"y", "PA", 40.0, -80.0, {}};
  meta["z"] = {"z", "PA", 41.0, -80.0, {}};
  const auto d = baseline_network(meta);
  EXPECT_EQ(d.at("x", "y"), 0.0);
  const auto g = knn_graph(d, 1);
  EXPECT_EQ(g.of("x")[0].region_id, "y");
  EXPECT_EQ(g.of("y")[0].region_id, "x");
}

TEST(BaselineNetwork, EdgeWeights) {
  std::istringstream in("from,to,weight\na,b,3\nb,a,1\nb,c,0\n");
  const auto edges = read_edge_list_csv(in);
  const auto d = baseline_network(edges, {"a", "b", "c"});
  EXPECT_DOUBLE_EQ(d.at("a", "b"), 1.0 / (4.0 + kEdgeEpsilon));
  EXPECT_DOUBLE_EQ(d.at("b", "c"), 1.0 / kEdgeEpsilon);
  EXPECT_DOUBLE_EQ(d.at("a", "c"), 1.0 / kEdgeEpsilon);
  EXPECT_THROW(baseline_network(edges, {"a", "b"}), DataError);
}

TEST(InState, FractionsAndInterval) {
  RegionMetaSet meta;
  NeighborGraph g;
  g.k = 2;
  for (int i = 0; i < 6; ++i) {
    const std::string id = "r" + std::to_string(i);
    meta[id] = {id, i < 3 ? "AA" : "BB", {}, {}, {}};
  }
  for (int i = 0; i < 6; ++i) {
    const int base = i < 3 ? 0 : 3;
    g.neighbors["r" + std::to_string(i)] = {{"r" + std::to_string(base + (i + 1) % 3), 1},
                                            {"r" + std::to_string(base + (i + 2) % 3), 1}};
  }
  auto s = in_state_fraction(g, meta);
  EXPECT_DOUBLE_EQ(s.mean_fraction, 1.0);
  EXPECT_DOUBLE_EQ(s.mean_count, 2.0);
  g.neighbors["r0"][1] = {"r4", 1};
  s = in_state_fraction(g, meta);
  EXPECT_DOUBLE_EQ(s.per_region["r0"].fraction, 0.5);
  EXPECT_EQ(s.per_region["r0"].count, 1);
  EXPECT_LT(s.ci_low, s.mean_fraction);
}

TEST(InState, RandomGraphMatchesPermutationNull) {
  std::mt19937_64 rng(12);
  const int n = 300;
  const char* states[] = {"AA", "BB", "CC", "DD", "EE", "FF"};
  RegionMetaSet meta;
  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) {
    const std::string id = "r" + std::to_string(i);
    ids.push_back(id);
    meta[id] = {id, states[rng() % 6], {}, {}, {}};
  }
  const auto random_graph = [&] {
    NeighborGraph g;
    g.k = 3;
    for (int i = 0; i < n; ++i) {
      std::vector<std::string> pool = ids;
      pool.erase(pool.begin() + i);
      std::shuffle(pool.begin(), pool.end(), rng);
      for (int k = 0; k < 3; ++k) g.neighbors[ids[i]].push_back({pool[k], 1});
    }
    return g;
  };
  const double observed = in_state_fraction(random_graph(), meta).mean_fraction;
  // The null is the same statistic over independent random graphs.
  std::vector<double> null;
  for (int rep = 0; rep < 1000; ++rep) null.push_back(in_state_fraction(random_graph(), meta).mean_fraction);
  std::sort(null.begin(), null.end());
  EXPECT_GE(observed, null[5]);
  EXPECT_LE(observed, null[994]);
  EXPECT_NEAR(null[500], 1.0 / 6, 0.03);
}

TEST(NetworkCorrelation, RankProperties) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0, 1);
  const int n = 305;
  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) ids.push_back("r" + std::to_string(i));
  DistanceMatrix a(ids), b(ids), c(ids);
  std::vector<double> va, vb;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      a(i, j) = a(j, i) = u(rng);
      b(i, j) = b(j, i) = std::exp(3 * a(i, j));
      c(i, j) = c(j, i) = u(rng);
      va.push_back(a(i, j));
      vb.push_back(c(i, j));
    }
  EXPECT_DOUBLE_EQ(network_correlation(a, a), 1.0);
  EXPECT_NEAR(network_correlation(a, b), 1.0, 1e-12);
  const double rho = network_correlation(a, c);
  EXPECT_LT(std::abs(rho), 0.05);
  EXPECT_NEAR(rho, oracle::spearman(va, vb), 1e-10);
  DistanceMatrix small({"a", "b", "c"}, 1.0);
  EXPECT_THROW(network_correlation(small, small), DataError);
}

TEST(Clustering, TwoPlantedClustersRecovered) {
  std::mt19937_64 rng(14);
  std::normal_distribution<double> e(0, 0.3);
  std::vector<std::vector<double>> pts;
  std::vector<int> truth;
  for (int i = 0; i < 30; ++i) {
    const double cx = i % 2 ? 5.0 : -5.0;
    pts.push_back({cx + e(rng), e(rng), e(rng)});
    truth.push_back(i % 2);
  }
  const auto d = from_points(pts);
  for (auto method : {ClusterMethod::kmeans_mds, ClusterMethod::kmedoids}) {
    ClusterOptions opt;
    opt.k = 2;
    opt.method = method;
    const auto c = cluster_regions(d, opt);
    std::vector<int> labels;
    for (const auto& r : d.regions()) labels.push_back(c.labels.at(r));
    EXPECT_DOUBLE_EQ(oracle::adjusted_rand_index(labels, truth), 1.0);
  }
}

TEST(Clustering, EveryRegionOwnClusterWhenKEqualsN) {
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<std::vector<double>> pts(12, std::vector<double>(2));
  for (auto& p : pts) p = {u(rng), u(rng)};
  ClusterOptions opt;
  opt.k = 12;
  const auto c = cluster_regions(from_points(pts), opt);
  std::set<int> distinct;
  for (const auto& [r, l] : c.labels) distinct.insert(l);
  EXPECT_EQ(distinct.size(), 12u);
  EXPECT_NEAR(c.inertia, 0.0, 1e-12);
}

TEST(Clustering, SeedDeterminism) {
  std::mt19937_64 rng(16);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<std::vector<double>> pts(50, std::vector<double>(4));
  for (auto& p : pts)
    for (auto& x : p) x = u(rng);
  ClusterOptions opt;
  opt.k = 5;
  const auto d = from_points(pts);
  EXPECT_EQ(cluster_regions(d, opt).labels, cluster_regions(d, opt).labels);
  std::ostringstream out;
  write_clusters_csv(out, cluster_regions(d, opt));
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "region_id,cluster");
}

TEST(Clustering, MdsReconstructsEuclideanConfiguration) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> e(0, 2);
  std::vector<std::vector<double>> pts(25, std::vector<double>(3));
  for (auto& p : pts)
    for (auto& x : p) x = e(rng);
  const auto d = from_points(pts);
  std::vector<std::string> warnings;
  const auto y = classical_mds(d, 5, &warnings);
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      double s = 0;
      for (std::size_t k = 0; k < y[i].size(); ++k) s += (y[i][k] - y[j][k]) * (y[i][k] - y[j][k]);
      EXPECT_NEAR(std::sqrt(s), d(i, j), 1e-6 * d(i, j));
    }
  EXPECT_FALSE(warnings.empty());
  EXPECT_LE(y[0].size(), 5u);
}
