#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

namespace spred {

using Vector = std::vector<double>;

/// Floor applied to the second argument of kl_divergence before the log.
inline constexpr double kKlEpsilon = 1e-12;

/// Dense row-major matrix. Rows are exposed as spans so callers can treat a
/// row as a feature or prototype without copying.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }

  void append_row(std::span<const double> values);

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Accumulator mirroring a flat parameter vector.
class GradientBuffer {
 public:
  GradientBuffer() = default;
  explicit GradientBuffer(std::size_t size) : values_(size, 0.0) {}

  std::size_t size() const { return values_.size(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  void zero();
  /// values += scale * other; sizes must agree.
  void add_scaled(const GradientBuffer& other, double scale);

 private:
  std::vector<double> values_;
};

double dot(std::span<const double> a, std::span<const double> b);
double squared_distance(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);
/// Unit-length copy of `a`; the norm is floored at `guard` so zero vectors stay zero.
Vector l2_normalized(std::span<const double> a, double guard = 1e-12);

/// Max-subtracted softmax. Throws std::invalid_argument on empty input.
Vector softmax(std::span<const double> scores);

/// KL(p || q) with q floored at kKlEpsilon and 0 ln 0 := 0.
double kl_divergence(std::span<const double> p, std::span<const double> q);

/// params -= lr * grads, in place.
void sgd_step(std::span<double> params, std::span<const double> grads, double lr);
void sgd_step(std::span<double> params, const GradientBuffer& grads, double lr);

using ScalarLoss = std::function<double(std::span<const double>)>;

/// Central-difference gradient of `loss` at `params`, one coordinate at a time.
Vector numeric_gradient(const ScalarLoss& loss, std::span<const double> params, double h);

/// Worst relative error between `analytic` and the central-difference
/// gradient, with denominator max(|analytic|, |numeric|, 1e-8).
double finite_difference_check(const ScalarLoss& loss, std::span<const double> params,
                               std::span<const double> analytic, double h);

/// Independent seed for sub-stream `stream_id` of a run seeded with `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream_id);

/// Throws std::domain_error naming `what` when any entry is NaN or infinite.
void require_finite(std::span<const double> values, std::string_view what);

}  // namespace spred
