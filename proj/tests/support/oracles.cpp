#include "oracles.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace oracle {

LineFit normal_equations(std::span<const double> y) {
  long double sx = 0, sxx = 0, sy = 0, sxy = 0;
  const long double n = static_cast<long double>(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const long double x = static_cast<long double>(i + 1);
    const long double v = std::log(static_cast<long double>(y[i]));
    sx += x;
    sxx += x * x;
    sy += v;
    sxy += x * v;
  }
  const long double det = n * sxx - sx * sx;
  return {static_cast<double>((sxx * sy - sx * sxy) / det), static_cast<double>((n * sxy - sx * sy) / det)};
}

double count_nll(std::span<const double> y, double a, double b, double c) {
  double nll = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double eta = a + b * static_cast<double>(i + 1);
    const double mu = std::exp(eta);
    if (c == 0.0) {
      nll -= y[i] * eta - mu - std::lgamma(y[i] + 1.0);
    } else {
      const double r = 1.0 / c;
      nll -= std::lgamma(y[i] + r) - std::lgamma(r) - std::lgamma(y[i] + 1.0) + r * std::log(r / (r + mu)) +
             y[i] * std::log(mu / (r + mu));
    }
  }
  return nll;
}

namespace {

Eigen::Vector2d numeric_gradient(std::span<const double> y, double c, const Eigen::Vector2d& p) {
  Eigen::Vector2d g;
  for (int k = 0; k < 2; ++k) {
    const double h = 1e-6 * std::max(1.0, std::abs(p[k]));
    Eigen::Vector2d hi = p, lo = p;
    hi[k] += h;
    lo[k] -= h;
    g[k] = (count_nll(y, hi[0], hi[1], c) - count_nll(y, lo[0], lo[1], c)) / (2 * h);
  }
  return g;
}

}  // namespace

MleFit quasi_newton_mle(std::span<const double> y, double c) {
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  Eigen::Vector2d p(std::log(std::max(mean, 1e-3)), 0.0);
  Eigen::Matrix2d h_inv = Eigen::Matrix2d::Identity() * 1e-3;
  Eigen::Vector2d g = numeric_gradient(y, c, p);
  double f = count_nll(y, p[0], p[1], c);
  int it = 0;
  for (; it < 2000 && g.norm() > 1e-9; ++it) {
    Eigen::Vector2d d = -h_inv * g;
    if (d.dot(g) >= 0) {
      h_inv = Eigen::Matrix2d::Identity() * 1e-3;
      d = -h_inv * g;
    }
    double step = 1.0;
    double f_new = count_nll(y, p[0] + d[0], p[1] + d[1], c);
    while (!(f_new <= f + 1e-4 * step * d.dot(g)) && step > 1e-16) {
      step *= 0.5;
      f_new = count_nll(y, p[0] + step * d[0], p[1] + step * d[1], c);
    }
    const Eigen::Vector2d s = step * d;
    if (s.norm() < 1e-15) break;
    p += s;
    f = f_new;
    const Eigen::Vector2d g_new = numeric_gradient(y, c, p);
    const Eigen::Vector2d q = g_new - g;
    g = g_new;
    const double sq = s.dot(q);
    if (sq > 1e-18) {
      const Eigen::Matrix2d I = Eigen::Matrix2d::Identity();
      const double rho = 1.0 / sq;
      h_inv = (I - rho * s * q.transpose()) * h_inv * (I - rho * q * s.transpose()) + rho * s * s.transpose();
    }
  }
  return {p[0], p[1], it, g.norm()};
}

double hard_dtw(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size(), m = b.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> r(n + 1, std::vector<double>(m + 1, inf));
  r[0][0] = 0.0;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j) {
      const double cost = (a[i - 1] - b[j - 1]) * (a[i - 1] - b[j - 1]);
      r[i][j] = cost + std::min({r[i - 1][j], r[i][j - 1], r[i - 1][j - 1]});
    }
  return r[n][m];
}

namespace {

Eigen::MatrixXd difference_matrix(int t, int order) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Identity(t, t);
  for (int k = 0; k < order; ++k) {
    const int rows = static_cast<int>(d.rows()) - 1;
    Eigen::MatrixXd next(rows, t);
    for (int i = 0; i < rows; ++i) next.row(i) = d.row(i + 1) - d.row(i);
    d = next;
  }
  return d;
}

}  // namespace

std::vector<double> dense_l2_trend(std::span<const double> w, std::span<const double> u, double lambda, int order) {
  const int t = static_cast<int>(u.size());
  const Eigen::MatrixXd d = difference_matrix(t, order);
  Eigen::MatrixXd a = 2.0 * lambda * d.transpose() * d;
  Eigen::VectorXd rhs(t);
  for (int i = 0; i < t; ++i) {
    a(i, i) += w[i];
    rhs[i] = w[i] * u[i];
  }
  const Eigen::VectorXd v = a.fullPivLu().solve(rhs);
  return {v.data(), v.data() + t};
}

std::vector<double> dense_poisson_l2(std::span<const double> y, double lambda) {
  const int t = static_cast<int>(y.size());
  const Eigen::MatrixXd d = difference_matrix(t, 3);
  const Eigen::MatrixXd p = 2.0 * lambda * d.transpose() * d;
  Eigen::VectorXd z(t), yv(t);
  for (int i = 0; i < t; ++i) {
    yv[i] = y[i];
    z[i] = std::log(y[i] + 0.5);
  }
  const auto objective = [&](const Eigen::VectorXd& v) {
    return (v.array().exp() - yv.array() * v.array()).sum() + 0.5 * v.dot(p * v);
  };
  for (int it = 0; it < 200; ++it) {
    const Eigen::VectorXd g = z.array().exp().matrix() - yv + p * z;
    if (g.lpNorm<Eigen::Infinity>() < 1e-11) break;
    Eigen::MatrixXd h = p;
    for (int i = 0; i < t; ++i) h(i, i) += std::exp(z[i]);
    const Eigen::VectorXd step = h.ldlt().solve(-g);
    double s = 1.0;
    const double f0 = objective(z);
    while (objective(z + s * step) > f0 + 1e-4 * s * g.dot(step) && s > 1e-12) s *= 0.5;
    z += s * step;
  }
  return {z.data(), z.data() + t};
}

KsResult ks_uniform(std::vector<double> sample) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double x = std::clamp(sample[i], 0.0, 1.0);
    d = std::max({d, static_cast<double>(i + 1) / n - x, x - static_cast<double>(i) / n});
  }
  const double sqrt_n = std::sqrt(n);
  const double lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
  double q = 0.0;
  if (lambda < 0.2) {
    q = 1.0;
  } else {
    double sign = 1.0;
    for (int k = 1; k <= 200; ++k) {
      const double term = sign * std::exp(-2.0 * k * k * lambda * lambda);
      q += term;
      if (std::abs(term) < 1e-16) break;
      sign = -sign;
    }
    q = std::clamp(2.0 * q, 0.0, 1.0);
  }
  return {d, q};
}

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw std::invalid_argument("labelings differ in length");
  std::map<std::pair<int, int>, long long> joint;
  std::map<int, long long> ra, rb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++joint[{a[i], b[i]}];
    ++ra[a[i]];
    ++rb[b[i]];
  }
  const auto choose2 = [](long long k) { return static_cast<double>(k) * static_cast<double>(k - 1) / 2.0; };
  double index = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (const auto& [key, count] : joint) index += choose2(count);
  for (const auto& [key, count] : ra) sum_a += choose2(count);
  for (const auto& [key, count] : rb) sum_b += choose2(count);
  const double expected = sum_a * sum_b / choose2(static_cast<long long>(a.size()));
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

double great_circle_km(double lat1, double lon1, double lat2, double lon2, double radius_km) {
  const long double k = 3.14159265358979323846264338327950288L / 180.0L;
  const long double p1 = lat1 * k, p2 = lat2 * k, dl = (lon2 - lon1) * k;
  long double c = std::sin(p1) * std::sin(p2) + std::cos(p1) * std::cos(p2) * std::cos(dl);
  c = std::clamp(c, -1.0L, 1.0L);
  return static_cast<double>(radius_km * std::acos(c));
}

namespace {

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return x[i] < x[j]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = rank;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  const auto rx = average_ranks(x), ry = average_ranks(y);
  const double n = static_cast<double>(rx.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace oracle
