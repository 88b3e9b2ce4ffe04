#pragma once

// Independent reference implementations used to cross-check the library:
// naive enumeration, set arithmetic and closure computations written without
// sharing code with the optimized paths.

#include <algorithm>
#include <cmath>
#include <iterator>
#include <optional>
#include <random>
#include <set>
#include <vector>

#include "spred/numerics.hpp"
#include "spred/purification.hpp"

namespace spred::oracle {

inline double euclid(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(std::max(s, 1e-12));
}

/// Mean over qualifying anchors of the worst hinge among all (pos, neg) pairs.
inline std::optional<double> triplet_by_enumeration(const Matrix& f, const std::vector<int>& labels,
                                                    double margin) {
  const std::size_t n = f.rows();
  double total = 0.0;
  std::size_t anchors = 0;
  for (std::size_t a = 0; a < n; ++a) {
    bool any = false;
    double worst = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      if (p == a || labels[p] != labels[a]) continue;
      for (std::size_t q = 0; q < n; ++q) {
        if (labels[q] == labels[a]) continue;
        const double hinge = std::max(0.0, euclid(f.row(a), f.row(p)) - euclid(f.row(a), f.row(q)) + margin);
        worst = any ? std::max(worst, hinge) : hinge;
        any = true;
      }
    }
    if (any) {
      total += worst;
      ++anchors;
    }
  }
  if (anchors == 0) return std::nullopt;
  return total / static_cast<double>(anchors);
}

/// DBSCAN by transitive closure of the core adjacency relation. Returns a
/// canonical labeling (ids in order of first member, -1 for noise).
inline std::vector<int> dbscan_by_closure(const Matrix& d, double eps, std::size_t min_pts) {
  const std::size_t n = d.rows();
  std::vector<bool> core(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t c = 0;
    for (std::size_t j = 0; j < n; ++j) c += d(i, j) <= eps ? 1 : 0;
    core[i] = c >= min_pts;
  }
  // reach[i][j]: core i and core j are density-connected.
  std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) reach[i][j] = core[i] && core[j] && (i == j || d(i, j) <= eps);
  }
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!reach[i][k]) continue;
      for (std::size_t j = 0; j < n; ++j) {
        if (reach[k][j]) reach[i][j] = true;
      }
    }
  }
  // Components of core points, numbered by their lowest core index.
  std::vector<int> component(n, -1);
  int components = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!core[i] || component[i] >= 0) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (reach[i][j]) component[j] = components;
    }
    ++components;
  }
  // A border point belongs to the earliest component holding a core neighbor.
  std::vector<int> raw(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) {
      raw[i] = component[i];
      continue;
    }
    int best = -1;
    for (std::size_t j = 0; j < n; ++j) {
      if (core[j] && d(i, j) <= eps && (best < 0 || component[j] < best)) best = component[j];
    }
    raw[i] = best;
  }
  std::vector<int> remap(static_cast<std::size_t>(components), -1);
  int next = 0;
  for (int& r : raw) {
    if (r < 0) continue;
    if (remap[static_cast<std::size_t>(r)] < 0) remap[static_cast<std::size_t>(r)] = next++;
    r = remap[static_cast<std::size_t>(r)];
  }
  return raw;
}

/// Jaccard of x's label group and cluster computed with std::set algebra.
inline double jaccard_by_sets(std::size_t x, const std::vector<int>& labels, const std::vector<int>& clusters) {
  std::set<std::size_t> group, cluster;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == labels[x]) group.insert(i);
    if (clusters[x] >= 0 && clusters[i] == clusters[x]) cluster.insert(i);
  }
  if (clusters[x] < 0) cluster.insert(x);
  std::vector<std::size_t> both, either;
  std::set_intersection(group.begin(), group.end(), cluster.begin(), cluster.end(), std::back_inserter(both));
  std::set_union(group.begin(), group.end(), cluster.begin(), cluster.end(), std::back_inserter(either));
  return static_cast<double>(both.size()) / static_cast<double>(either.size());
}

/// Random label set: some artificial, some withheld, ids in [0, classes).
inline PseudoLabelSet random_label_set(std::mt19937_64& rng, std::size_t n, int classes, double p_artificial,
                                       double p_missing) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, classes - 1);
  PseudoLabelSet s;
  s.labels.resize(n);
  s.artificial.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    s.artificial[i] = u(rng) < p_artificial;
    s.labels[i] = (!s.artificial[i] && u(rng) < p_missing) ? kUnavailable : pick(rng);
  }
  return s;
}

/// Random clustering with some noise points, canonical ids.
inline std::vector<int> random_clusters(std::mt19937_64& rng, std::size_t n, int k, double p_noise) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, k - 1);
  std::vector<int> raw(n);
  for (int& c : raw) c = u(rng) < p_noise ? -1 : pick(rng);
  std::vector<int> remap(static_cast<std::size_t>(k), -1);
  int next = 0;
  for (int& c : raw) {
    if (c < 0) continue;
    if (remap[static_cast<std::size_t>(c)] < 0) remap[static_cast<std::size_t>(c)] = next++;
    c = remap[static_cast<std::size_t>(c)];
  }
  return raw;
}

}  // namespace spred::oracle
