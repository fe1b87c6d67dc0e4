#ifndef DISPLACER_KMEANS_HPP
#define DISPLACER_KMEANS_HPP

#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "displacer/error.hpp"
#include "displacer/vecspace.hpp"

namespace displacer {

struct KMeansResult {
  std::vector<Vector> means;
  std::vector<std::size_t> assignments;
  std::vector<double> sse_history;  // SSE after each Lloyd iteration
  std::size_t iterations = 0;
  bool converged = false;

  double sse() const { return sse_history.empty() ? 0.0 : sse_history.back(); }
};

namespace kmeans_detail {

inline double squared_distance(const Vector& a, const Vector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// k-means++ seeding; falls back to uniform over unused points when every
// remaining point coincides with a chosen center.
inline std::vector<Vector> seed_means(const std::vector<Vector>& points, std::size_t k,
                                      std::mt19937_64& rng) {
  const std::size_t n = points.size();
  std::vector<Vector> means;
  std::vector<bool> used(n, false);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::size_t first = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  means.push_back(points[first]);
  used[first] = true;
  while (means.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(points[i], means.back()));
      if (!used[i]) total += d2[i];
    }
    std::size_t pick = n;
    if (total > 0.0) {
      double r = std::uniform_real_distribution<double>(0.0, total)(rng);
      for (std::size_t i = 0; i < n; ++i) {
        if (used[i]) continue;
        pick = i;
        r -= d2[i];
        if (r < 0.0) break;
      }
    } else {
      std::vector<std::size_t> free;
      for (std::size_t i = 0; i < n; ++i)
        if (!used[i]) free.push_back(i);
      pick = free[std::uniform_int_distribution<std::size_t>(0, free.size() - 1)(rng)];
    }
    used[pick] = true;
    means.push_back(points[pick]);
  }
  return means;
}

}  // namespace kmeans_detail

/// Lloyd's algorithm with k-means++ seeding, deterministic for a seed.
/// An empty cluster takes over the point farthest from its current mean.
inline KMeansResult kmeans(const std::vector<Vector>& points, std::size_t k, std::uint64_t seed,
                           std::size_t max_iterations = 100) {
  using kmeans_detail::squared_distance;
  if (k == 0 || k > points.size())
    throw Error(ErrorCode::BadK, "k = " + std::to_string(k) + " for " +
                                     std::to_string(points.size()) + " points");
  const std::size_t n = points.size();
  const std::size_t dim = points.front().size();
  std::mt19937_64 rng(seed);

  KMeansResult res;
  res.means = kmeans_detail::seed_means(points, k, rng);
  res.assignments.assign(n, k);  // k = unassigned
  std::vector<double> cost(n);

  for (std::size_t iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = squared_distance(points[i], res.means[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      cost[i] = best_d;
      if (res.assignments[i] != best) {
        res.assignments[i] = best;
        changed = true;
      }
    }

    std::vector<std::size_t> counts(k, 0);
    for (std::size_t a : res.assignments) ++counts[a];
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i)
        if (counts[res.assignments[i]] > 1 && (far == n || cost[i] > cost[far])) far = i;
      if (far == n) continue;
      --counts[res.assignments[far]];
      res.assignments[far] = c;
      counts[c] = 1;
      cost[far] = 0.0;
      changed = true;
    }

    std::vector<Vector> sums(k, Vector(dim, 0.0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < dim; ++j) sums[res.assignments[i]][j] += points[i][j];
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t j = 0; j < dim; ++j)
        res.means[c][j] = sums[c][j] / static_cast<double>(counts[c]);
    }

    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      sse += squared_distance(points[i], res.means[res.assignments[i]]);
    res.sse_history.push_back(sse);
    res.iterations = iter + 1;
    if (!changed) {
      res.converged = true;
      break;
    }
  }
  return res;
}

/// Best of `restarts` independent runs (lowest final SSE, earliest on ties).
inline KMeansResult kmeans_restarts(const std::vector<Vector>& points, std::size_t k,
                                    std::uint64_t seed, std::size_t restarts,
                                    std::size_t max_iterations = 100) {
  KMeansResult best = kmeans(points, k, seed, max_iterations);
  for (std::size_t r = 1; r < restarts; ++r) {
    auto next = kmeans(points, k, seed + r * 0x9E3779B97F4A7C15ull, max_iterations);
    if (next.sse() < best.sse()) best = std::move(next);
  }
  return best;
}

}  // namespace displacer

#endif  // DISPLACER_KMEANS_HPP
