#pragma once

#include <vector>

#include "spred/numerics.hpp"

namespace spred {

enum class DistanceMetric { euclidean, cosine };

/// Symmetric distance matrix with an exact zero diagonal. Cosine distance is
/// 1 - cos on L2-normalized rows (norm floored at 1e-12).
Matrix pairwise_distance(const Matrix& features, DistanceMetric metric);

inline constexpr int kNoise = -1;

struct ClusterAssignment {
  /// Cluster id in [0, cluster_count) or kNoise, per sample.
  std::vector<int> labels;
  int cluster_count = 0;

  std::size_t size() const { return labels.size(); }
  /// Member lists indexed by cluster id, each sorted ascending.
  std::vector<std::vector<std::size_t>> members() const;
};

/// Renumbers cluster ids in order of each cluster's first member index.
ClusterAssignment canonicalize(ClusterAssignment assignment);

/// DBSCAN over a precomputed distance matrix. A point is core when at least
/// `min_pts` points (itself included) lie within `eps`. Points are scanned in
/// ascending index; each new cluster is fully expanded before the next scan
/// step, so a border point joins the first cluster that reaches it. The
/// result is canonicalized.
ClusterAssignment dbscan(const Matrix& distances, double eps, std::size_t min_pts);

struct ClusteringConfig {
  DistanceMetric metric = DistanceMetric::cosine;
  double eps = 0.5;
  std::size_t min_pts = 4;

  void validate() const;
};

ClusterAssignment cluster_features(const Matrix& features, const ClusteringConfig& config);

}  // namespace spred
