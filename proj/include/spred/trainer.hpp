#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "spred/clustering.hpp"
#include "spred/danet.hpp"
#include "spred/datagen.hpp"
#include "spred/encoder.hpp"
#include "spred/eval.hpp"
#include "spred/objectives.hpp"
#include "spred/purification.hpp"

namespace spred {

/// Component switches mirroring the ablation rows.
struct Ablations {
  /// Train on unfiltered NPL labels.
  bool no_dkcp = false;
  /// Replace top-2 labeling with a threshold on the full softmax.
  bool no_npl = false;
  /// Drop the structure-maintenance term (alpha = 0).
  bool no_ls = false;
  /// Cluster old-model features of unaligned data.
  bool no_danet = false;
  /// Discard unlabeled samples entirely.
  bool labeled_only = false;

  bool any() const { return no_dkcp || no_npl || no_ls || no_danet || labeled_only; }
};

struct TrainerConfig {
  int epochs_first = 30;
  int epochs_later = 20;
  /// PK sampling: identities per batch and instances per identity.
  std::size_t batch_identities = 8;
  std::size_t batch_instances = 4;
  /// Apply the structure loss to pseudo-labeled batch members too.
  bool structure_on_pseudo = true;
  /// Let pseudo-labeled samples act as triplet anchors.
  bool triplet_on_pseudo = true;
  EncoderConfig encoder;

  void validate() const;
};

struct PipelineConfig {
  Hyperparams hp;
  TrainerConfig trainer;
  ClusteringConfig clustering;
  DanetConfig danet;
  Ablations ablations;
  std::uint64_t seed = 0;
  /// When non-empty, per-epoch purification records are appended here as JSON lines.
  std::filesystem::path purification_dump;

  /// Alpha after ablations.
  double effective_alpha() const { return ablations.no_ls ? 0.0 : hp.alpha; }
  void validate() const;
};

/// Knowledge carried from stage t-1 into stage t; never modified during a stage.
struct FrozenKnowledge {
  Mlp model;
  PrototypeBank bank;
  std::optional<DanetParams> danet;
};

/// State between stages: the fused model M_t, its prototype bank P_t and
/// the DANet trained on D_t.
struct TrainState {
  int stage = 0;
  Mlp model;
  std::optional<PrototypeBank> bank;
  std::optional<DanetParams> danet;
  std::mt19937_64 rng;
};

TrainState initial_state(std::size_t input_dim, const PipelineConfig& config);

struct BatchLosses {
  double prototype = 0.0;
  double triplet = 0.0;
  double structure = 0.0;
  double total = 0.0;
  bool structure_computed = false;
};

struct BatchGradients {
  GradientBuffer model;
  Matrix bank;
  BatchLosses losses;
  /// Split of `model` into the L_base and L_s parts, filled on request.
  std::optional<GradientBuffer> base_model;
  std::optional<GradientBuffer> structure_model;
};

struct Batch {
  Matrix inputs;
  std::vector<int> labels;
  /// True for ground-truth labels, false for pseudo-labels.
  std::vector<bool> artificial;
};

/// Gradients of L = L_p + L_tri (+ alpha * L_s when `old` is given). Throws
/// std::invalid_argument when the batch cannot form a triplet.
BatchGradients batch_gradients(const Mlp& model, const PrototypeBank& bank, const FrozenKnowledge* old,
                               const Batch& batch, double alpha, const PipelineConfig& config,
                               bool split_components = false);

/// One SGD step on both the encoder and the bank.
BatchLosses train_step(Mlp& model, PrototypeBank& bank, const FrozenKnowledge* old, const Batch& batch,
                       double alpha, const PipelineConfig& config);

struct LabelStats {
  std::size_t count = 0;
  double precision = 1.0;
  double recall = 0.0;
};

struct EpochMetrics {
  int stage = 0;
  int epoch = 0;
  double loss_prototype = 0.0;
  double loss_triplet = 0.0;
  double loss_structure = 0.0;
  std::size_t steps = 0;
  std::size_t skipped_batches = 0;
  LabelStats npl;
  LabelStats new_filtered;
  LabelStats old_filtered;
  LabelStats merged;
  std::size_t conflicts = 0;
  int new_clusters = 0;
  int old_clusters = 0;
  std::size_t training_samples = 0;
};

struct StageEval {
  int stage = 0;
  std::vector<DomainResult> domains;
  Summary summary;
};

struct RunMetrics {
  std::vector<EpochMetrics> epochs;
  std::vector<StageEval> evaluations;
  std::vector<std::string> warnings;
};

/// Runs one stage: OKAC once, then per epoch NPL, NKC, purification and
/// PK-sampled SGD, then fusion with the previous model and DANet training.
RunMetrics run_stage(TrainState& state, const SemiDataset& dataset, const PipelineConfig& config);

/// Evaluates on the first `seen_stages` seen test splits and every unseen domain.
StageEval evaluate_stream(const Mlp& model, const Stream& stream, int seen_stages);

struct LifelongResult {
  TrainState state;
  RunMetrics metrics;
};

using StageCallback = std::function<void(const TrainState&, const StageEval&)>;

LifelongResult run_lifelong(const PipelineConfig& config, const Stream& stream, const StageCallback& on_stage = {});

/// One row per epoch and one per (stage, domain) evaluation.
void write_metrics_csv(const std::filesystem::path& path, const RunMetrics& metrics);

}  // namespace spred
