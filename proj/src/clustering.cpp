#include "spred/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>
#include <string>

#include "spred/errors.hpp"

namespace spred {

Matrix pairwise_distance(const Matrix& features, DistanceMetric metric) {
  const std::size_t n = features.rows();
  if (n == 0) throw std::invalid_argument("pairwise_distance: no features");
  Matrix out(n, n);
  if (metric == DistanceMetric::euclidean) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double d = std::sqrt(squared_distance(features.row(i), features.row(j)));
        out(i, j) = d;
        out(j, i) = d;
      }
    }
    return out;
  }
  Matrix unit(n, features.cols());
  for (std::size_t i = 0; i < n; ++i) {
    const Vector u = l2_normalized(features.row(i));
    std::copy(u.begin(), u.end(), unit.row(i).begin());
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = std::max(0.0, 1.0 - dot(unit.row(i), unit.row(j)));
      out(i, j) = d;
      out(j, i) = d;
    }
  }
  return out;
}

std::vector<std::vector<std::size_t>> ClusterAssignment::members() const {
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(cluster_count));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != kNoise) out[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  return out;
}

ClusterAssignment canonicalize(ClusterAssignment assignment) {
  std::vector<int> remap(static_cast<std::size_t>(assignment.cluster_count), -1);
  int next = 0;
  for (int& label : assignment.labels) {
    if (label == kNoise) continue;
    auto& target = remap[static_cast<std::size_t>(label)];
    if (target < 0) target = next++;
    label = target;
  }
  assignment.cluster_count = next;
  return assignment;
}

ClusterAssignment dbscan(const Matrix& distances, double eps, std::size_t min_pts) {
  const std::size_t n = distances.rows();
  if (distances.cols() != n) throw std::invalid_argument("dbscan: distance matrix must be square");
  if (!(eps > 0.0)) throw std::invalid_argument("dbscan: eps must be positive");
  if (min_pts < 1) throw std::invalid_argument("dbscan: min_pts must be at least 1");

  std::vector<std::vector<std::size_t>> neighbors(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (distances(i, j) <= eps) neighbors[i].push_back(j);
    }
  }
  std::vector<bool> core(n);
  for (std::size_t i = 0; i < n; ++i) core[i] = neighbors[i].size() >= min_pts;

  ClusterAssignment out;
  out.labels.assign(n, kNoise);
  for (std::size_t seed = 0; seed < n; ++seed) {
    if (!core[seed] || out.labels[seed] != kNoise) continue;
    const int id = out.cluster_count++;
    out.labels[seed] = id;
    std::deque<std::size_t> frontier{seed};
    while (!frontier.empty()) {
      const std::size_t p = frontier.front();
      frontier.pop_front();
      for (std::size_t q : neighbors[p]) {
        if (out.labels[q] != kNoise) continue;
        out.labels[q] = id;
        if (core[q]) frontier.push_back(q);
      }
    }
  }
  return canonicalize(std::move(out));
}

void ClusteringConfig::validate() const {
  std::string bad;
  if (!(eps > 0.0)) bad += " eps";
  if (min_pts < 1) bad += " min_pts";
  if (!bad.empty()) throw ConfigError("invalid clustering setting(s):" + bad);
}

ClusterAssignment cluster_features(const Matrix& features, const ClusteringConfig& config) {
  return dbscan(pairwise_distance(features, config.metric), config.eps, config.min_pts);
}

}  // namespace spred
