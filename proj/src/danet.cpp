#include "spred/danet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "spred/errors.hpp"

namespace spred {

ChannelStats channel_stats(std::span<const double> grid, GridShape shape) {
  if (grid.size() != shape.size()) throw std::invalid_argument("channel_stats: grid size mismatch");
  ChannelStats stats;
  const auto n = static_cast<double>(shape.positions);
  for (std::size_t c = 0; c < shape.channels; ++c) {
    const auto channel = grid.subspan(c * shape.positions, shape.positions);
    double mean = 0.0;
    for (double v : channel) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : channel) var += (v - mean) * (v - mean);
    stats.means.push_back(mean);
    stats.stds.push_back(std::sqrt(var / n));
  }
  return stats;
}

StyleSampler gaussian_style_sampler(std::mt19937_64& rng) {
  return [&rng](const ChannelStats& stats) {
    StyleDraw draw;
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t c = 0; c < stats.means.size(); ++c) {
      const double mu = stats.means[c];
      const double sigma = stats.stds[c];
      const double mean = mu + sigma * normal(rng);
      const double spread = sigma + sigma * normal(rng);
      draw.means.push_back(mean);
      draw.stds.push_back(std::max(spread, kMinStdRatio * sigma));
    }
    return draw;
  };
}

Vector restyle(std::span<const double> grid, GridShape shape, const ChannelStats& stats, const StyleDraw& draw) {
  if (draw.means.size() != shape.channels || draw.stds.size() != shape.channels) {
    throw std::invalid_argument("restyle: style draw does not match channel count");
  }
  Vector out(grid.begin(), grid.end());
  for (std::size_t c = 0; c < shape.channels; ++c) {
    const double sigma = stats.stds[c];
    if (sigma < kDegenerateChannelStd) continue;
    const double shift = draw.means[c] - stats.means[c];
    const double gain = draw.stds[c] / sigma;
    for (std::size_t s = 0; s < shape.positions; ++s) {
      double& v = out[c * shape.positions + s];
      v = (v + shift) * gain;
    }
  }
  return out;
}

Vector style_augment(std::span<const double> grid, GridShape shape, const StyleSampler& sampler) {
  const ChannelStats stats = channel_stats(grid, shape);
  return restyle(grid, shape, stats, sampler(stats));
}

Vector style_augment(std::span<const double> grid, GridShape shape, std::mt19937_64& rng) {
  return style_augment(grid, shape, gaussian_style_sampler(rng));
}

void DanetConfig::validate() const {
  std::string bad;
  if (depth < 1) bad += " depth";
  if (epochs < 0) bad += " epochs";
  if (!(lr > 0.0)) bad += " lr";
  if (batch_size < 1) bad += " batch_size";
  if (!bad.empty()) throw ConfigError("invalid danet setting(s):" + bad);
}

DanetParams make_danet(GridShape shape, const DanetConfig& config, std::uint64_t seed) {
  const std::size_t dim = shape.size();
  const std::size_t width = config.bottleneck == 0 ? std::max<std::size_t>(1, dim / 2) : config.bottleneck;
  const Activation act = config.nonlinear ? Activation::tanh : Activation::identity;
  std::vector<LayerSpec> layers;
  layers.push_back({dim, width, act});
  for (std::size_t d = 1; d < config.depth; ++d) layers.push_back({width, width, act});
  layers.push_back({width, dim, Activation::identity});
  return DanetParams{shape, Mlp::xavier(std::move(layers), seed)};
}

double reconstruction_loss(const Mlp& network, const Matrix& inputs, const Matrix& targets, GradientBuffer* grad) {
  const Matrix out = network.forward_batch(inputs);
  if (out.rows() != targets.rows() || out.cols() != targets.cols()) {
    throw std::invalid_argument("reconstruction_loss: target shape mismatch");
  }
  const double count = static_cast<double>(out.rows() * out.cols());
  double total = 0.0;
  Matrix upstream(out.rows(), out.cols());
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t k = 0; k < out.cols(); ++k) {
      const double diff = out(r, k) - targets(r, k);
      total += std::abs(diff);
      upstream(r, k) = (diff > 0.0 ? 1.0 : diff < 0.0 ? -1.0 : 0.0) / count;
    }
  }
  if (grad) *grad = network.backward(inputs, upstream);
  return total / count;
}

DanetTraining train_danet(const std::vector<Observation>& data, GridShape shape, const DanetConfig& config,
                          std::uint64_t seed) {
  config.validate();
  if (data.empty()) throw std::invalid_argument("train_danet: empty dataset");
  DanetTraining result;
  result.params = make_danet(shape, config, seed);
  Mlp& net = result.params.network;

  std::mt19937_64 rng(seed ^ 0xDA7E7ULL);
  const StyleSampler sampler = gaussian_style_sampler(rng);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  const std::size_t batches_per_epoch = (data.size() + config.batch_size - 1) / config.batch_size;
  const double total_steps = static_cast<double>(batches_per_epoch) * std::max(config.epochs, 1);
  std::size_t step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      Matrix inputs;
      Matrix targets;
      for (std::size_t k = start; k < end; ++k) {
        const auto& grid = data[order[k]].grid;
        inputs.append_row(style_augment(grid, shape, sampler));
        targets.append_row(grid);
      }
      GradientBuffer grad;
      const double loss = reconstruction_loss(net, inputs, targets, &grad);
      if (!std::isfinite(loss)) {
        throw std::domain_error("train_danet: non-finite reconstruction loss at epoch " + std::to_string(epoch + 1) +
                                ", step " + std::to_string(step));
      }
      epoch_loss += loss * static_cast<double>(end - start);
      const double lr = config.lr_decay ? config.lr * (1.0 - static_cast<double>(step) / total_steps) : config.lr;
      sgd_step(net.params(), grad, lr);
      ++step;
    }
    result.epoch_losses.push_back(epoch_loss / static_cast<double>(data.size()));
  }
  require_finite(net.params(), "train_danet: parameters");

  Matrix inputs;
  Matrix targets;
  for (const auto& obs : data) {
    inputs.append_row(style_augment(obs.grid, shape, sampler));
    targets.append_row(obs.grid);
  }
  result.final_loss = reconstruction_loss(net, inputs, targets, nullptr);
  return result;
}

Observation align(const DanetParams& params, const Observation& obs) {
  if (obs.grid.size() != params.network.input_dim()) {
    throw std::invalid_argument("align: grid has " + std::to_string(obs.grid.size()) + " values, DANet expects " +
                                std::to_string(params.network.input_dim()));
  }
  Observation out = obs;
  out.grid = params.network.forward(obs.grid);
  return out;
}

std::vector<Observation> align_all(const DanetParams& params, const std::vector<Observation>& observations) {
  std::vector<Observation> out;
  out.reserve(observations.size());
  for (const auto& o : observations) out.push_back(align(params, o));
  return out;
}

}  // namespace spred
