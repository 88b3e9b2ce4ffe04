#include "spred/encoder.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>

#include "spred/binary_io.hpp"

namespace spred {

Mlp::Mlp(std::vector<LayerSpec> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw std::invalid_argument("Mlp: at least one layer required");
  std::size_t total = 0;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& spec = layers_[l];
    if (spec.inputs == 0 || spec.outputs == 0) throw std::invalid_argument("Mlp: zero-width layer");
    if (l > 0 && layers_[l - 1].outputs != spec.inputs) {
      throw std::invalid_argument("Mlp: layer " + std::to_string(l) + " expects " +
                                  std::to_string(spec.inputs) + " inputs but previous layer emits " +
                                  std::to_string(layers_[l - 1].outputs));
    }
    offsets_.push_back(total);
    total += spec.inputs * spec.outputs + spec.outputs;
  }
  params_.assign(total, 0.0);
}

Mlp Mlp::xavier(std::vector<LayerSpec> layers, std::uint64_t seed) {
  Mlp net(std::move(layers));
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < net.layers_.size(); ++l) {
    const auto& s = net.layers_[l];
    const double a = std::sqrt(6.0 / static_cast<double>(s.inputs + s.outputs));
    std::uniform_real_distribution<double> dist(-a, a);
    for (double& w : net.weights(l)) w = dist(rng);
  }
  return net;
}

Mlp Mlp::identity(std::size_t width, std::size_t depth) {
  std::vector<LayerSpec> layers(depth, LayerSpec{width, width, Activation::identity});
  Mlp net(std::move(layers));
  for (std::size_t l = 0; l < depth; ++l) {
    auto w = net.weights(l);
    for (std::size_t i = 0; i < width; ++i) w[i * width + i] = 1.0;
  }
  return net;
}

std::span<double> Mlp::weights(std::size_t l) {
  return {params_.data() + offsets_[l], layers_[l].inputs * layers_[l].outputs};
}
std::span<const double> Mlp::weights(std::size_t l) const {
  return {params_.data() + offsets_[l], layers_[l].inputs * layers_[l].outputs};
}
std::span<double> Mlp::biases(std::size_t l) {
  return {params_.data() + offsets_[l] + layers_[l].inputs * layers_[l].outputs, layers_[l].outputs};
}
std::span<const double> Mlp::biases(std::size_t l) const {
  return {params_.data() + offsets_[l] + layers_[l].inputs * layers_[l].outputs, layers_[l].outputs};
}

namespace {

double activate(Activation a, double x) { return a == Activation::tanh ? std::tanh(x) : x; }

// Derivative expressed through the activation output y.
double activation_slope(Activation a, double y) { return a == Activation::tanh ? 1.0 - y * y : 1.0; }

void affine(std::span<const double> w, std::span<const double> b, std::span<const double> x,
            Activation act, std::span<double> y) {
  const std::size_t in = x.size();
  for (std::size_t o = 0; o < y.size(); ++o) {
    double s = b[o];
    const double* row = w.data() + o * in;
    for (std::size_t i = 0; i < in; ++i) s += row[i] * x[i];
    y[o] = activate(act, s);
  }
}

}  // namespace

Vector Mlp::forward(std::span<const double> input) const {
  if (input.size() != input_dim()) {
    throw std::invalid_argument("Mlp::forward: input has " + std::to_string(input.size()) +
                                " values, network expects " + std::to_string(input_dim()));
  }
  Vector x(input.begin(), input.end());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Vector y(layers_[l].outputs);
    affine(weights(l), biases(l), x, layers_[l].activation, y);
    x = std::move(y);
  }
  return x;
}

Matrix Mlp::forward_batch(const Matrix& inputs) const {
  Matrix out(inputs.rows(), output_dim());
  for (std::size_t r = 0; r < inputs.rows(); ++r) {
    const Vector y = forward(inputs.row(r));
    std::copy(y.begin(), y.end(), out.row(r).begin());
  }
  return out;
}

GradientBuffer Mlp::backward(const Matrix& inputs, const Matrix& upstream) const {
  if (inputs.rows() != upstream.rows()) throw std::invalid_argument("Mlp::backward: batch size mismatch");
  if (inputs.rows() > 0 && inputs.cols() != input_dim()) {
    throw std::invalid_argument("Mlp::backward: input width mismatch");
  }
  if (upstream.rows() > 0 && upstream.cols() != output_dim()) {
    throw std::invalid_argument("Mlp::backward: upstream width " + std::to_string(upstream.cols()) +
                                " does not match output " + std::to_string(output_dim()));
  }
  GradientBuffer grad(params_.size());
  const std::size_t depth = layers_.size();
  std::vector<Vector> acts(depth + 1);
  for (std::size_t r = 0; r < inputs.rows(); ++r) {
    acts[0].assign(inputs.row(r).begin(), inputs.row(r).end());
    for (std::size_t l = 0; l < depth; ++l) {
      acts[l + 1].assign(layers_[l].outputs, 0.0);
      affine(weights(l), biases(l), acts[l], layers_[l].activation, acts[l + 1]);
    }
    Vector delta(upstream.row(r).begin(), upstream.row(r).end());
    for (std::size_t l = depth; l-- > 0;) {
      const auto& spec = layers_[l];
      const Vector& x = acts[l];
      const Vector& y = acts[l + 1];
      for (std::size_t o = 0; o < spec.outputs; ++o) delta[o] *= activation_slope(spec.activation, y[o]);
      double* gw = grad.values().data() + offsets_[l];
      double* gb = gw + spec.inputs * spec.outputs;
      for (std::size_t o = 0; o < spec.outputs; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        double* row = gw + o * spec.inputs;
        for (std::size_t i = 0; i < spec.inputs; ++i) row[i] += d * x[i];
        gb[o] += d;
      }
      if (l == 0) break;
      Vector below(spec.inputs, 0.0);
      const auto w = weights(l);
      for (std::size_t o = 0; o < spec.outputs; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        const double* row = w.data() + o * spec.inputs;
        for (std::size_t i = 0; i < spec.inputs; ++i) below[i] += d * row[i];
      }
      delta = std::move(below);
    }
  }
  return grad;
}

void Mlp::save(std::ostream& out) const {
  io::BinaryWriter w(out);
  w.u32(static_cast<std::uint32_t>(layers_.size()));
  for (const auto& s : layers_) {
    w.u32(static_cast<std::uint32_t>(s.inputs));
    w.u32(static_cast<std::uint32_t>(s.outputs));
    w.u32(static_cast<std::uint32_t>(s.activation));
  }
  w.f64s(params_);
}

Mlp Mlp::load(std::istream& in, const std::string& source) {
  io::BinaryReader r(in, source);
  const auto depth = r.u32();
  if (depth == 0 || depth > 64) throw io::FormatError(source + ": implausible layer count " + std::to_string(depth));
  std::vector<LayerSpec> layers;
  for (std::uint32_t l = 0; l < depth; ++l) {
    LayerSpec s;
    s.inputs = r.u32();
    s.outputs = r.u32();
    const auto act = r.u32();
    if (act > 1) throw io::FormatError(source + ": unknown activation code " + std::to_string(act));
    s.activation = static_cast<Activation>(act);
    layers.push_back(s);
  }
  Mlp net(std::move(layers));
  const auto values = r.f64s(net.param_count());
  std::copy(values.begin(), values.end(), net.params_.begin());
  require_finite(net.params_, source + ": network parameters");
  return net;
}

std::vector<LayerSpec> encoder_layers(std::size_t input_dim, const EncoderConfig& config) {
  const Activation hidden_act = config.linear ? Activation::identity : Activation::tanh;
  if (config.hidden == 0) return {LayerSpec{input_dim, config.output, Activation::identity}};
  return {LayerSpec{input_dim, config.hidden, hidden_act},
          LayerSpec{config.hidden, config.output, Activation::identity}};
}

Mlp make_encoder(std::size_t input_dim, const EncoderConfig& config, std::uint64_t seed) {
  return Mlp::xavier(encoder_layers(input_dim, config), seed);
}

Vector encode(const Mlp& model, const Observation& obs) { return model.forward(obs.grid); }

Matrix stack_grids(const std::vector<Observation>& observations, std::span<const std::size_t> indices) {
  Matrix out;
  for (std::size_t i : indices) out.append_row(observations.at(i).grid);
  return out;
}

Matrix stack_grids(const std::vector<Observation>& observations) {
  Matrix out;
  for (const auto& o : observations) out.append_row(o.grid);
  return out;
}

Matrix encode_all(const Mlp& model, const std::vector<Observation>& observations) {
  Matrix out(observations.size(), model.output_dim());
  for (std::size_t i = 0; i < observations.size(); ++i) {
    const Vector f = encode(model, observations[i]);
    std::copy(f.begin(), f.end(), out.row(i).begin());
  }
  return out;
}

Mlp fuse(const Mlp& old_model, const Mlp& fresh, double delta) {
  if (!old_model.same_shape(fresh)) throw std::invalid_argument("fuse: networks have different shapes");
  if (!(delta >= 0.0 && delta <= 1.0)) throw std::invalid_argument("fuse: delta must lie in [0, 1]");
  if (delta == 0.0) return fresh;
  if (delta == 1.0) return old_model;
  Mlp out = fresh;
  auto dst = out.params();
  const auto a = old_model.params();
  // Written as fresh + delta * (old - fresh) so identical inputs fuse exactly.
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += delta * (a[i] - dst[i]);
  return out;
}

}  // namespace spred
