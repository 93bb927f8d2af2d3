#pragma once

// Lloyd's algorithm with k-means++ seeding.

#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "evidential/error.hpp"
#include "evidential/linalg.hpp"

namespace evidential {

struct KMeansResult {
  Matrix centroids;                  // k x D
  std::vector<std::size_t> assignment;
  std::size_t iterations = 0;
  bool converged = false;
  bool degenerate = false;  // fewer distinct points than clusters; duplicate centroids
};

namespace detail {

inline std::size_t nearest_centroid(const Matrix& centroids, std::span<const double> x, double* best_d2 = nullptr) {
  std::size_t best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.rows; ++c) {
    const double d = squared_distance(x, centroids.row(c));
    if (d < best_dist) {
      best_dist = d;
      best = c;
    }
  }
  if (best_d2) *best_d2 = best_dist;
  return best;
}

}  // namespace detail

inline KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed, std::size_t max_iter = 100) {
  const std::size_t N = points.rows;
  const std::size_t D = points.cols;
  detail::require(k >= 1, ErrorCode::InvalidArgument, "k must be positive");
  detail::require(k <= N, ErrorCode::EmptyCluster,
                  "cannot form " + std::to_string(k) + " nonempty clusters from " + std::to_string(N) + " points");

  std::mt19937_64 rng(seed);
  KMeansResult r;
  r.centroids = Matrix(k, D);

  // k-means++ seeding.
  std::vector<double> d2(N, std::numeric_limits<double>::infinity());
  std::size_t first = std::uniform_int_distribution<std::size_t>(0, N - 1)(rng);
  for (std::size_t d = 0; d < D; ++d) r.centroids(0, d) = points(first, d);
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      d2[n] = std::min(d2[n], squared_distance(points.row(n), r.centroids.row(c - 1)));
      total += d2[n];
    }
    std::size_t pick = 0;
    if (total <= 0.0) {
      r.degenerate = true;
      pick = std::uniform_int_distribution<std::size_t>(0, N - 1)(rng);
    } else {
      double target = std::uniform_real_distribution<double>(0.0, total)(rng);
      pick = N - 1;
      for (std::size_t n = 0; n < N; ++n) {
        target -= d2[n];
        if (target < 0.0 && d2[n] > 0.0) {
          pick = n;
          break;
        }
      }
      while (d2[pick] <= 0.0 && pick > 0) --pick;
    }
    for (std::size_t d = 0; d < D; ++d) r.centroids(c, d) = points(pick, d);
  }

  r.assignment.assign(N, k);  // k = unassigned
  std::vector<std::size_t> counts(k);
  for (r.iterations = 0; r.iterations < max_iter; ++r.iterations) {
    bool changed = false;
    for (std::size_t n = 0; n < N; ++n) {
      const std::size_t c = detail::nearest_centroid(r.centroids, points.row(n));
      if (c != r.assignment[n]) {
        r.assignment[n] = c;
        changed = true;
      }
    }
    if (!changed) {
      r.converged = true;
      break;
    }

    Matrix sums(k, D);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t n = 0; n < N; ++n) {
      ++counts[r.assignment[n]];
      for (std::size_t d = 0; d < D; ++d) sums(r.assignment[n], d) += points(n, d);
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t d = 0; d < D; ++d) r.centroids(c, d) = sums(c, d) / static_cast<double>(counts[c]);
    }
    // Empty clusters move to the point farthest from its own centroid.
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t far = 0;
      double far_d2 = -1.0;
      for (std::size_t n = 0; n < N; ++n) {
        const double dist = squared_distance(points.row(n), r.centroids.row(r.assignment[n]));
        if (dist > far_d2) {
          far_d2 = dist;
          far = n;
        }
      }
      if (far_d2 <= 0.0) r.degenerate = true;
      for (std::size_t d = 0; d < D; ++d) r.centroids(c, d) = points(far, d);
      --counts[r.assignment[far]];
      r.assignment[far] = c;
      counts[c] = 1;
    }
  }
  return r;
}

}  // namespace evidential
