#pragma once

// Distribution alignment network: a small affine auto-encoder trained to undo
// random per-channel style changes, then used to pull a new domain's inputs
// toward the distribution it was trained on.

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "spred/datagen.hpp"
#include "spred/encoder.hpp"

namespace spred {

struct ChannelStats {
  Vector means;
  Vector stds;  // population std over the channel's positions
};

ChannelStats channel_stats(std::span<const double> grid, GridShape shape);

/// Channels whose std falls below this are passed through unchanged.
inline constexpr double kDegenerateChannelStd = 1e-8;
/// Sampled stds are clamped to at least this fraction of the source std.
inline constexpr double kMinStdRatio = 0.05;

struct StyleDraw {
  Vector means;
  Vector stds;
};

using StyleSampler = std::function<StyleDraw(const ChannelStats&)>;

/// Per channel: mean ~ N(mu, sigma^2), std ~ N(sigma, sigma^2) clamped to
/// >= kMinStdRatio * sigma. Draws from `rng`, which must outlive the sampler.
StyleSampler gaussian_style_sampler(std::mt19937_64& rng);

/// Applies x' = (x - mu + mu') * sigma' / sigma channel by channel.
Vector restyle(std::span<const double> grid, GridShape shape, const ChannelStats& stats, const StyleDraw& draw);

Vector style_augment(std::span<const double> grid, GridShape shape, const StyleSampler& sampler);
Vector style_augment(std::span<const double> grid, GridShape shape, std::mt19937_64& rng);

struct DanetConfig {
  bool enabled = true;
  /// 0 selects C * S / 2.
  std::size_t bottleneck = 0;
  /// Number of hidden layers of width `bottleneck`.
  std::size_t depth = 1;
  bool nonlinear = false;
  int epochs = 20;
  double lr = 0.05;
  std::size_t batch_size = 16;
  /// Linear decay of the learning rate to zero over training.
  bool lr_decay = true;

  void validate() const;
};

struct DanetParams {
  GridShape shape;
  Mlp network;

  bool operator==(const DanetParams&) const = default;
};

DanetParams make_danet(GridShape shape, const DanetConfig& config, std::uint64_t seed);

struct DanetTraining {
  DanetParams params;
  /// Mean L_r seen during each epoch.
  Vector epoch_losses;
  /// Mean L_r of the trained network over one augmented pass.
  double final_loss = 0.0;
};

/// Mean absolute reconstruction error between `targets` and the network's
/// output on `inputs`; fills `grad` when non-null.
double reconstruction_loss(const Mlp& network, const Matrix& inputs, const Matrix& targets, GradientBuffer* grad);

/// SGD on L_r = mean |x - net(style_augment(x))|. Throws std::domain_error
/// with epoch diagnostics if the loss stops being finite.
DanetTraining train_danet(const std::vector<Observation>& data, GridShape shape, const DanetConfig& config,
                          std::uint64_t seed);

/// One forward pass; returns a new observation with the aligned grid.
Observation align(const DanetParams& params, const Observation& obs);
std::vector<Observation> align_all(const DanetParams& params, const std::vector<Observation>& observations);

}  // namespace spred
