#pragma once

#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "spred/numerics.hpp"

namespace spred {

/// One learnable prototype per identity. Rows are ordered by ascending
/// identity id.
class PrototypeBank {
 public:
  PrototypeBank() = default;
  /// Throws std::invalid_argument on duplicate ids or a row/id count mismatch.
  PrototypeBank(std::vector<int> identities, Matrix prototypes);

  std::size_t size() const { return identities_.size(); }
  std::size_t dim() const { return prototypes_.cols(); }
  bool empty() const { return identities_.empty(); }

  const Matrix& prototypes() const { return prototypes_; }
  Matrix& prototypes() { return prototypes_; }
  std::span<const double> row(std::size_t r) const { return prototypes_.row(r); }

  int identity_at(std::size_t row) const { return identities_[row]; }
  const std::vector<int>& identities() const { return identities_; }
  bool contains(int identity) const { return row_of_.contains(identity); }
  /// Throws std::invalid_argument for an unknown identity.
  std::size_t row_index(int identity) const;

  /// Inner products <f, p_j> / temperature for every row.
  Vector logits(std::span<const double> feature, double temperature = 1.0) const;

  bool operator==(const PrototypeBank& other) const {
    return identities_ == other.identities_ && prototypes_ == other.prototypes_;
  }

 private:
  std::vector<int> identities_;
  Matrix prototypes_;
  std::unordered_map<int, std::size_t> row_of_;
};

/// Each prototype is the mean of its identity's features.
PrototypeBank init_prototypes(const Matrix& features, std::span<const int> labels);

struct PrototypeLoss {
  double loss = 0.0;
  Vector grad_feature;
  Matrix grad_bank;
};

/// Cross-entropy of softmax(<f, p_j>) at the row of `label`.
PrototypeLoss prototype_loss(std::span<const double> feature, int label, const PrototypeBank& bank,
                             double temperature = 1.0);

struct TripletLoss {
  double loss = 0.0;
  Matrix grad_features;
  std::size_t valid_anchors = 0;
};

/// Euclidean distance with the sqrt argument floored so coincident points
/// keep a finite gradient.
inline constexpr double kDistanceGuard = 1e-12;

/// Batch-hard triplet loss: for every anchor with at least one positive and
/// one negative in the batch, hinge(d(hardest pos) - d(hardest neg) + margin),
/// averaged over those anchors. Ties pick the lower batch index.
/// A non-empty `anchor_mask` restricts which samples may act as anchors.
/// Throws std::invalid_argument when no anchor qualifies.
TripletLoss batch_hard_triplet(const Matrix& features, std::span<const int> labels, double margin,
                               const std::vector<bool>& anchor_mask = {});

/// softmax over <f, p_j> for every row of `bank`.
Vector structure_vector(std::span<const double> feature, const PrototypeBank& bank, double temperature = 1.0);

struct StructureLoss {
  double loss = 0.0;
  Vector grad_feature_new;
};

/// KL(S(f_old) || S(f_new)) against a frozen bank; only f_new gets a gradient.
StructureLoss structure_loss(std::span<const double> feature_old, std::span<const double> feature_new,
                             const PrototypeBank& old_bank, double temperature = 1.0);

struct NeighborDecision {
  enum class Outcome { artificial, pseudo, unavailable };

  Outcome outcome = Outcome::unavailable;
  int label = -1;
  /// Top-2 score s_A; meaningful only for pseudo and unavailable unlabeled samples.
  double score = 0.0;

  bool available() const { return outcome != Outcome::unavailable; }
};

/// Top-2 neighbor prototype labeling. Labeled samples (artificial_label set)
/// return their label unconditionally; unlabeled samples get the nearest
/// prototype's label iff e^a / (e^a + e^b) > threshold, where a >= b are the
/// two largest inner products. Ties favor the lower row. Throws
/// std::invalid_argument for an unlabeled sample against a one-row bank.
NeighborDecision neighbor_label(std::span<const double> feature, const PrototypeBank& bank, double threshold,
                                std::optional<int> artificial_label, double temperature = 1.0);

/// Plain classifier-style labeling over the full softmax; used when the
/// top-2 rule is ablated.
NeighborDecision global_softmax_label(std::span<const double> feature, const PrototypeBank& bank,
                                      double threshold, std::optional<int> artificial_label,
                                      double temperature = 1.0);

/// Loss weights, thresholds and optimizer settings shared by the trainer.
struct Hyperparams {
  double alpha = 4.0;
  double T_p = 0.7;
  double T_c = 0.1;
  double T_o = 0.6;
  double margin = 0.3;
  double delta = 0.5;
  double lr = 8e-3;
  double temperature = 1.0;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

}  // namespace spred
