#include "spred/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace spred {

void Matrix::append_row(std::span<const double> values) {
  if (rows_ == 0 && cols_ == 0) cols_ = values.size();
  if (values.size() != cols_) {
    throw std::invalid_argument("Matrix::append_row: expected " + std::to_string(cols_) +
                                " columns, got " + std::to_string(values.size()));
  }
  data_.insert(data_.end(), values.begin(), values.end());
  ++rows_;
}

void GradientBuffer::zero() { std::fill(values_.begin(), values_.end(), 0.0); }

void GradientBuffer::add_scaled(const GradientBuffer& other, double scale) {
  if (other.size() != size()) {
    throw std::invalid_argument("GradientBuffer::add_scaled: shape mismatch");
  }
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += scale * other.values_[i];
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("squared_distance: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double l2_norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

Vector l2_normalized(std::span<const double> a, double guard) {
  const double n = std::max(l2_norm(a), guard);
  Vector out(a.begin(), a.end());
  for (double& v : out) v /= n;
  return out;
}

Vector softmax(std::span<const double> scores) {
  if (scores.empty()) throw std::invalid_argument("softmax: empty input");
  const double peak = *std::max_element(scores.begin(), scores.end());
  Vector out(scores.size());
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(scores[i] - peak);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) {
    throw std::invalid_argument("kl_divergence: length mismatch (" + std::to_string(p.size()) +
                                " vs " + std::to_string(q.size()) + ")");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    s += p[i] * std::log(p[i] / std::max(q[i], kKlEpsilon));
  }
  // Rounding can push an exact-zero divergence a hair below zero.
  return std::max(s, 0.0);
}

void sgd_step(std::span<double> params, std::span<const double> grads, double lr) {
  if (params.size() != grads.size()) {
    throw std::invalid_argument("sgd_step: " + std::to_string(params.size()) + " params vs " +
                                std::to_string(grads.size()) + " gradients");
  }
  if (lr == 0.0) return;
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
}

void sgd_step(std::span<double> params, const GradientBuffer& grads, double lr) {
  sgd_step(params, grads.values(), lr);
}

Vector numeric_gradient(const ScalarLoss& loss, std::span<const double> params, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("numeric_gradient: h must be positive");
  Vector theta(params.begin(), params.end());
  Vector out(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double saved = theta[i];
    theta[i] = saved + h;
    const double up = loss(theta);
    theta[i] = saved - h;
    const double down = loss(theta);
    theta[i] = saved;
    out[i] = (up - down) / (2.0 * h);
  }
  return out;
}

double finite_difference_check(const ScalarLoss& loss, std::span<const double> params,
                               std::span<const double> analytic, double h) {
  if (analytic.size() != params.size()) {
    throw std::invalid_argument("finite_difference_check: gradient/parameter size mismatch");
  }
  const Vector numeric = numeric_gradient(loss, params, h);
  double worst = 0.0;
  for (std::size_t i = 0; i < numeric.size(); ++i) {
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), 1e-8});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream_id) {
  return splitmix64(seed ^ splitmix64(stream_id + 0x5350524455ULL));
}

void require_finite(std::span<const double> values, std::string_view what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw std::domain_error(std::string(what) + ": non-finite value at index " +
                              std::to_string(i));
    }
  }
}

}  // namespace spred
