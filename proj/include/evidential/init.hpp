#pragma once

// Prototype initialization from k-means clusters of (feature) vectors.

#include <cstdint>
#include <span>
#include <vector>

#include "evidential/enn.hpp"
#include "evidential/kmeans.hpp"
#include "evidential/rbf.hpp"

namespace evidential {

namespace detail {

inline Matrix cluster_label_counts(const KMeansResult& km, std::span<const int> labels, std::size_t K) {
  Matrix counts(km.centroids.rows, K);
  for (std::size_t n = 0; n < labels.size(); ++n) {
    require(labels[n] >= 0 && static_cast<std::size_t>(labels[n]) < K, ErrorCode::OutOfRange, "label outside the frame");
    counts(km.assignment[n], static_cast<std::size_t>(labels[n])) += 1.0;
  }
  return counts;
}

}  // namespace detail

/// Prototypes at the k-means centroids; memberships are the label
/// proportions of each cluster (uniform for a cluster without members).
inline EnnParams enn_init_kmeans(const Matrix& features, std::span<const int> labels, std::size_t I, std::size_t K,
                                 std::uint64_t seed = 0) {
  detail::require(features.rows == labels.size(), ErrorCode::ShapeMismatch, "features and labels differ in length");
  const auto km = kmeans(features, I, seed);
  const Matrix counts = detail::cluster_label_counts(km, labels, K);
  EnnParams p(I, features.cols, K);
  p.prototypes = km.centroids;
  const std::vector<double> uniform(K, 1.0);
  for (std::size_t i = 0; i < I; ++i) {
    double members = 0.0;
    for (double c : counts.row(i)) members += c;
    if (members > 0.0) {
      p.set_membership(i, counts.row(i));
    } else {
      p.set_membership(i, uniform);
    }
    p.set_alpha(i, 0.5);
    p.set_gamma(i, 0.01);
  }
  return p;
}

/// Prototypes at the k-means centroids; v_i = +1 when label 0 (w1) is at
/// least half of the cluster, -1 otherwise.
inline RbfParams rbf_init_kmeans(const Matrix& features, std::span<const int> labels, std::size_t I,
                                 std::uint64_t seed = 0) {
  detail::require(features.rows == labels.size(), ErrorCode::ShapeMismatch, "features and labels differ in length");
  const auto km = kmeans(features, I, seed);
  const Matrix counts = detail::cluster_label_counts(km, labels, 2);
  RbfParams p(I, features.cols);
  p.prototypes = km.centroids;
  for (std::size_t i = 0; i < I; ++i) {
    p.weights[i] = counts(i, 0) >= counts(i, 1) ? 1.0 : -1.0;
    p.set_gamma(i, 0.01);
  }
  return p;
}

}  // namespace evidential
