#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "spred/datagen.hpp"
#include "spred/numerics.hpp"

namespace spred {

enum class Activation : std::uint32_t { identity = 0, tanh = 1 };

struct LayerSpec {
  std::size_t inputs = 0;
  std::size_t outputs = 0;
  Activation activation = Activation::identity;

  bool operator==(const LayerSpec&) const = default;
};

/// Fully connected stack with hand-derived backprop. Every parameter lives in
/// one flat vector (layer by layer: weights row-major [out x in], then biases)
/// so optimizers, fusion and finite-difference checks work on a single span.
class Mlp {
 public:
  Mlp() = default;
  /// Zero-initialized parameters. Throws std::invalid_argument when
  /// consecutive layer widths do not chain.
  explicit Mlp(std::vector<LayerSpec> layers);

  /// Uniform(-a, a) weights with a = sqrt(6 / (fan_in + fan_out)), zero biases.
  static Mlp xavier(std::vector<LayerSpec> layers, std::uint64_t seed);
  /// Square identity-activation layers with identity weights.
  static Mlp identity(std::size_t width, std::size_t depth);

  std::size_t input_dim() const { return layers_.empty() ? 0 : layers_.front().inputs; }
  std::size_t output_dim() const { return layers_.empty() ? 0 : layers_.back().outputs; }
  const std::vector<LayerSpec>& layers() const { return layers_; }
  bool same_shape(const Mlp& other) const { return layers_ == other.layers_; }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::size_t param_count() const { return params_.size(); }

  std::span<double> weights(std::size_t layer);
  std::span<const double> weights(std::size_t layer) const;
  std::span<double> biases(std::size_t layer);
  std::span<const double> biases(std::size_t layer) const;

  Vector forward(std::span<const double> input) const;
  /// Row i of the result depends only on row i of `inputs`.
  Matrix forward_batch(const Matrix& inputs) const;

  /// Gradient of sum_i <upstream_i, forward(inputs_i)> with respect to every
  /// parameter. Throws std::invalid_argument on shape mismatch.
  GradientBuffer backward(const Matrix& inputs, const Matrix& upstream) const;

  bool operator==(const Mlp&) const = default;

  void save(std::ostream& out) const;
  static Mlp load(std::istream& in, const std::string& source);

 private:
  std::vector<LayerSpec> layers_;
  std::vector<std::size_t> offsets_;  // start of each layer's weights
  std::vector<double> params_;
};

struct EncoderConfig {
  std::size_t hidden = 64;
  std::size_t output = 32;
  /// Drops the tanh so the stack is purely affine.
  bool linear = false;
};

std::vector<LayerSpec> encoder_layers(std::size_t input_dim, const EncoderConfig& config);
Mlp make_encoder(std::size_t input_dim, const EncoderConfig& config, std::uint64_t seed);

/// Feature of one observation; throws on grid/input size mismatch.
Vector encode(const Mlp& model, const Observation& obs);
Matrix encode_all(const Mlp& model, const std::vector<Observation>& observations);
Matrix stack_grids(const std::vector<Observation>& observations, std::span<const std::size_t> indices);
Matrix stack_grids(const std::vector<Observation>& observations);

/// Elementwise delta * old + (1 - delta) * fresh.
Mlp fuse(const Mlp& old_model, const Mlp& fresh, double delta);

}  // namespace spred
