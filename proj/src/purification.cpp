#include "spred/purification.hpp"

#include <stdexcept>
#include <string>

namespace spred {

const char* to_string(LabelSource source) {
  switch (source) {
    case LabelSource::npl: return "npl";
    case LabelSource::new_filtered: return "new_filtered";
    case LabelSource::old_filtered: return "old_filtered";
    case LabelSource::merged: return "merged";
  }
  return "unknown";
}

std::size_t PseudoLabelSet::available_count() const {
  std::size_t n = 0;
  for (int l : labels) n += l != kUnavailable;
  return n;
}

std::vector<std::size_t> PseudoLabelSet::available_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (available(i)) out.push_back(i);
  }
  return out;
}

PseudoLabelSet PseudoLabelSet::labeled_only(LabelSource tag) const {
  PseudoLabelSet out = *this;
  out.source = tag;
  for (std::size_t i = 0; i < out.labels.size(); ++i) {
    if (!artificial[i]) out.labels[i] = kUnavailable;
  }
  return out;
}

LabelGroups label_groups(const PseudoLabelSet& labels) {
  LabelGroups out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels.available(i)) out.groups[labels.labels[i]].push_back(i);
  }
  return out;
}

double label_confidence(std::size_t x, const PseudoLabelSet& labels, const LabelGroups& groups,
                        const ClusterAssignment& clusters) {
  if (x >= labels.size() || !labels.available(x)) {
    throw std::invalid_argument("label_confidence: sample " + std::to_string(x) + " has no available label");
  }
  if (clusters.size() != labels.size()) throw std::invalid_argument("label_confidence: cluster/label size mismatch");
  const int label = labels.labels[x];
  const auto it = groups.groups.find(label);
  if (it == groups.groups.end()) throw std::invalid_argument("label_confidence: label group missing");
  const std::size_t group_size = it->second.size();

  const int cluster = clusters.labels[x];
  if (cluster == kNoise) return 1.0 / static_cast<double>(group_size);

  std::size_t cluster_size = 0;
  std::size_t overlap = 0;
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    if (clusters.labels[i] != cluster) continue;
    ++cluster_size;
    overlap += labels.labels[i] == label;
  }
  return static_cast<double>(overlap) / static_cast<double>(group_size + cluster_size - overlap);
}

PseudoLabelSet purify(const PseudoLabelSet& labels, const LabelGroups& groups, const ClusterAssignment& clusters,
                      double threshold, LabelSource tag) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw std::invalid_argument("purify: threshold must lie in [0, 1]");
  PseudoLabelSet out = labels;
  out.source = tag;

  // Overlap counts per (cluster, label) so every sample is scored in O(1).
  std::vector<std::size_t> cluster_sizes(static_cast<std::size_t>(clusters.cluster_count), 0);
  std::vector<std::map<int, std::size_t>> overlap(static_cast<std::size_t>(clusters.cluster_count));
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    const int c = clusters.labels[i];
    if (c == kNoise) continue;
    ++cluster_sizes[static_cast<std::size_t>(c)];
    if (labels.available(i)) ++overlap[static_cast<std::size_t>(c)][labels.labels[i]];
  }

  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels.artificial[i] || !labels.available(i)) continue;
    const int label = labels.labels[i];
    const std::size_t group_size = groups.groups.at(label).size();
    const int c = clusters.labels[i];
    double confidence;
    if (c == kNoise) {
      confidence = 1.0 / static_cast<double>(group_size);
    } else {
      const std::size_t both = overlap[static_cast<std::size_t>(c)].at(label);
      confidence = static_cast<double>(both) /
                   static_cast<double>(group_size + cluster_sizes[static_cast<std::size_t>(c)] - both);
    }
    if (!(confidence > threshold)) out.labels[i] = kUnavailable;
  }
  return out;
}

MergeResult merge_pseudo(const PseudoLabelSet& old_filtered, const PseudoLabelSet& new_filtered) {
  if (old_filtered.size() != new_filtered.size()) {
    throw std::invalid_argument("merge_pseudo: label sets cover different sample universes");
  }
  MergeResult out;
  out.labels = new_filtered;
  out.labels.source = LabelSource::merged;
  for (std::size_t i = 0; i < new_filtered.size(); ++i) {
    out.labels.artificial[i] = new_filtered.artificial[i] || old_filtered.artificial[i];
    const int old_label = old_filtered.labels[i];
    const int new_label = new_filtered.labels[i];
    if (new_label == kUnavailable) {
      out.labels.labels[i] = old_label;
    } else if (old_label != kUnavailable && old_label != new_label) {
      ++out.conflicts;
    }
  }
  return out;
}

}  // namespace spred
