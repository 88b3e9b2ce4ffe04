#include <doctest.h>

#include <set>

#include "oracles.hpp"
#include "spred/purification.hpp"
#include "support.hpp"

using namespace spred;
using spred::oracle::jaccard_by_sets;
using spred::oracle::random_clusters;
using spred::oracle::random_label_set;

namespace {

PseudoLabelSet unlabeled(std::vector<int> labels) {
  PseudoLabelSet s;
  s.artificial.assign(labels.size(), false);
  s.labels = std::move(labels);
  return s;
}

ClusterAssignment clusters_of(std::vector<int> labels) {
  ClusterAssignment a;
  a.labels = std::move(labels);
  for (int l : a.labels) a.cluster_count = std::max(a.cluster_count, l + 1);
  return a;
}

}  // namespace

TEST_CASE("label groups worked values") {
  CHECK(label_groups(unlabeled({kUnavailable, kUnavailable})).groups.empty());
  const LabelGroups g = label_groups(unlabeled({1, 1, 2, kUnavailable}));
  CHECK(g.groups.size() == 2);
  CHECK(g.groups.at(1) == std::vector<std::size_t>{0, 1});
  CHECK(g.groups.at(2) == std::vector<std::size_t>{2});
}

TEST_CASE("label groups partition the available samples") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const PseudoLabelSet s = random_label_set(rng, spred::testing::uniform_index(rng, 0, 50), 6, 0.2, 0.3);
    std::set<std::size_t> covered;
    std::size_t total = 0;
    for (const auto& [id, members] : label_groups(s).groups) {
      CHECK_FALSE(members.empty());
      for (std::size_t i : members) {
        CHECK(s.labels[i] == id);
        covered.insert(i);
        ++total;
      }
    }
    CHECK(total == covered.size());
    const auto avail = s.available_indices();
    CHECK(std::vector<std::size_t>(covered.begin(), covered.end()) == avail);
  }
}

TEST_CASE("label confidence worked values") {
  {
    const PseudoLabelSet s = unlabeled({0, 0, 0, 0, 0, 1});
    const ClusterAssignment c = clusters_of({0, 0, 0, 0, 0, 1});
    CHECK(label_confidence(2, s, label_groups(s), c) == 1.0);
  }
  {
    // S_x = {0,1,2}, C_x = {0,1,3,4}: overlap 2, union 5.
    const PseudoLabelSet s = unlabeled({0, 0, 0, 1, 1});
    const ClusterAssignment c = clusters_of({0, 0, 1, 0, 0});
    CHECK(label_confidence(0, s, label_groups(s), c) == 0.4);
  }
  {
    // S_x = {0,1,2}, C_x = {0,3,4,5}: overlap only x.
    const PseudoLabelSet s = unlabeled({0, 0, 0, 1, 1, 1});
    const ClusterAssignment c = clusters_of({0, 1, 1, 0, 0, 0});
    CHECK(std::abs(label_confidence(0, s, label_groups(s), c) - 1.0 / 6.0) < 1e-15);
  }
  {
    const PseudoLabelSet s = unlabeled({0, 0, 0, kUnavailable});
    const ClusterAssignment c = clusters_of({kNoise, 0, 0, 0});
    CHECK(std::abs(label_confidence(0, s, label_groups(s), c) - 1.0 / 3.0) < 1e-15);
    CHECK_THROWS_AS(label_confidence(3, s, label_groups(s), c), std::invalid_argument);
  }
}

TEST_CASE("label confidence matches set arithmetic and is symmetric") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = spred::testing::uniform_index(rng, 1, 40);
    const int classes = static_cast<int>(spred::testing::uniform_index(rng, 1, 6));
    const int k = static_cast<int>(spred::testing::uniform_index(rng, 1, 6));
    const PseudoLabelSet s = random_label_set(rng, n, classes, 0.2, 0.0);
    const ClusterAssignment c = clusters_of(random_clusters(rng, n, k, 0.0));
    // Swap roles: clusters become labels and labels become clusters.
    const PseudoLabelSet swapped = unlabeled(c.labels);
    const ClusterAssignment swapped_c = clusters_of(std::vector<int>(s.labels.begin(), s.labels.end()));
    const LabelGroups g = label_groups(s);
    const LabelGroups sg = label_groups(swapped);
    for (std::size_t x = 0; x < n; ++x) {
      const double lc = label_confidence(x, s, g, c);
      CHECK(std::abs(lc - jaccard_by_sets(x, s.labels, c.labels)) < 1e-10);
      CHECK(lc > 0.0);
      CHECK(lc <= 1.0);
      CHECK(std::abs(lc - label_confidence(x, swapped, sg, swapped_c)) < 1e-15);
    }
  }
}

TEST_CASE("purify keeps everything at 0 and only artificial labels at 1") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = spred::testing::uniform_index(rng, 1, 40);
    const PseudoLabelSet s = random_label_set(rng, n, 4, 0.2, 0.3);
    const ClusterAssignment c = clusters_of(random_clusters(rng, n, 4, 0.2));
    const LabelGroups g = label_groups(s);
    CHECK(purify(s, g, c, 0.0, LabelSource::new_filtered).labels == s.labels);
    const PseudoLabelSet strict = purify(s, g, c, 1.0, LabelSource::new_filtered);
    for (std::size_t i = 0; i < n; ++i) {
      if (s.artificial[i]) {
        CHECK(strict.labels[i] == s.labels[i]);
      } else if (!s.available(i)) {
        CHECK_FALSE(strict.available(i));
      } else {
        CHECK_FALSE(strict.available(i));
      }
    }
  }
}

TEST_CASE("purify matches a per-sample Jaccard filter") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = spred::testing::uniform_index(rng, 1, 60);
    const PseudoLabelSet s = random_label_set(rng, n, 5, 0.15, 0.2);
    const ClusterAssignment c = clusters_of(random_clusters(rng, n, 5, 0.25));
    for (double threshold : {0.1, 0.6, spred::testing::uniform_real(rng, 0, 1)}) {
      const PseudoLabelSet out = purify(s, label_groups(s), c, threshold, LabelSource::old_filtered);
      CHECK(out.source == LabelSource::old_filtered);
      CHECK(out.artificial == s.artificial);
      for (std::size_t i = 0; i < n; ++i) {
        int expected = s.labels[i];
        if (!s.artificial[i] && s.available(i)) {
          if (jaccard_by_sets(i, s.labels, c.labels) <= threshold) expected = kUnavailable;
        }
        CHECK(out.labels[i] == expected);
      }
    }
  }
}

TEST_CASE("purify rejects thresholds outside the unit interval") {
  const PseudoLabelSet s = unlabeled({0, 0});
  CHECK_THROWS_AS(purify(s, label_groups(s), clusters_of({0, 0}), 1.5, LabelSource::merged), std::invalid_argument);
}

TEST_CASE("merge worked values") {
  const PseudoLabelSet old_side = unlabeled({1, kUnavailable, 3, kUnavailable});
  const PseudoLabelSet none = unlabeled({kUnavailable, kUnavailable, kUnavailable, kUnavailable});
  const MergeResult a = merge_pseudo(old_side, none);
  CHECK(a.labels.labels == old_side.labels);
  CHECK(a.conflicts == 0);
  CHECK(a.labels.source == LabelSource::merged);

  const PseudoLabelSet new_side = unlabeled({kUnavailable, 2, kUnavailable, 4});
  CHECK(merge_pseudo(old_side, new_side).labels.labels == std::vector<int>{1, 2, 3, 4});

  const MergeResult c = merge_pseudo(unlabeled({3}), unlabeled({5}));
  CHECK(c.labels.labels == std::vector<int>{5});
  CHECK(c.conflicts == 1);
}

TEST_CASE("merge is a union with the new side winning conflicts") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = spred::testing::uniform_index(rng, 1, 60);
    const PseudoLabelSet base = random_label_set(rng, n, 4, 0.2, 0.0);
    PseudoLabelSet old_side = base;
    PseudoLabelSet new_side = base;
    std::bernoulli_distribution drop(0.4), relabel(0.2);
    std::uniform_int_distribution<int> pick(0, 3);
    for (std::size_t i = 0; i < n; ++i) {
      if (base.artificial[i]) continue;
      if (drop(rng)) old_side.labels[i] = kUnavailable;
      if (drop(rng)) new_side.labels[i] = kUnavailable;
      if (relabel(rng) && old_side.available(i)) old_side.labels[i] = pick(rng);
    }
    const MergeResult m = merge_pseudo(old_side, new_side);
    std::size_t conflicts = 0;
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(m.labels.available(i) == (old_side.available(i) || new_side.available(i)));
      if (new_side.available(i)) {
        CHECK(m.labels.labels[i] == new_side.labels[i]);
        conflicts += old_side.available(i) && old_side.labels[i] != new_side.labels[i];
      } else if (old_side.available(i)) {
        CHECK(m.labels.labels[i] == old_side.labels[i]);
      }
      if (base.artificial[i]) CHECK(m.labels.labels[i] == base.labels[i]);
    }
    CHECK(m.conflicts == conflicts);
    CHECK(m.labels.artificial == base.artificial);
  }
}

TEST_CASE("labeled_only withholds every pseudo-label") {
  PseudoLabelSet s = unlabeled({1, 2, 3});
  s.artificial = {true, false, false};
  const PseudoLabelSet l = s.labeled_only(LabelSource::merged);
  CHECK(l.labels == std::vector<int>{1, kUnavailable, kUnavailable});
}
