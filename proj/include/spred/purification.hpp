#pragma once

#include <map>
#include <vector>

#include "spred/clustering.hpp"

namespace spred {

inline constexpr int kUnavailable = -1;

enum class LabelSource { npl, new_filtered, old_filtered, merged };

const char* to_string(LabelSource source);

/// Per-sample label assignment for one training set. Identity ids are
/// non-negative; kUnavailable marks a withheld label.
struct PseudoLabelSet {
  std::vector<int> labels;
  /// True for samples whose label is a ground-truth annotation.
  std::vector<bool> artificial;
  LabelSource source = LabelSource::npl;

  std::size_t size() const { return labels.size(); }
  bool available(std::size_t i) const { return labels[i] != kUnavailable; }
  std::size_t available_count() const;
  /// Indices with an available label, ascending.
  std::vector<std::size_t> available_indices() const;
  /// Only the artificial labels survive; every unlabeled sample is withheld.
  PseudoLabelSet labeled_only(LabelSource tag) const;
};

/// Samples split by label: groups[id] lists the samples carrying id.
struct LabelGroups {
  std::map<int, std::vector<std::size_t>> groups;
};

LabelGroups label_groups(const PseudoLabelSet& labels);

/// Jaccard overlap |S_x ∩ C_x| / |S_x ∪ C_x| between x's label group and its
/// cluster; a NOISE sample is its own singleton cluster. Throws
/// std::invalid_argument if x has no available label.
double label_confidence(std::size_t x, const PseudoLabelSet& labels, const LabelGroups& groups,
                        const ClusterAssignment& clusters);

/// Keeps an unlabeled sample's label iff its confidence is strictly above
/// `threshold`; artificial labels always survive.
PseudoLabelSet purify(const PseudoLabelSet& labels, const LabelGroups& groups, const ClusterAssignment& clusters,
                      double threshold, LabelSource tag);

struct MergeResult {
  PseudoLabelSet labels;
  std::size_t conflicts = 0;
};

/// Union of the two filtered sets. When both sides label a sample
/// differently, the new-knowledge label wins and the conflict is counted.
MergeResult merge_pseudo(const PseudoLabelSet& old_filtered, const PseudoLabelSet& new_filtered);

}  // namespace spred
