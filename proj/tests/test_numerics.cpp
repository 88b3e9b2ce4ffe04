#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>

#include "spred/numerics.hpp"
#include "support.hpp"

using namespace spred;
using spred::testing::random_vector;

TEST_CASE("softmax of equal scores is uniform") {
  const Vector p = softmax(Vector{0.0, 0.0});
  CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("softmax of ln2 and 0 is two thirds, one third") {
  const Vector p = softmax(Vector{std::log(2.0), 0.0});
  CHECK(std::abs(p[0] - 2.0 / 3.0) < 1e-15);
  CHECK(std::abs(p[1] - 1.0 / 3.0) < 1e-15);
}

TEST_CASE("softmax stays finite for huge scores") {
  const Vector p = softmax(Vector{1000.0, 0.0});
  CHECK(std::abs(p[0] - 1.0) < 1e-12);
  CHECK(std::abs(p[1]) < 1e-12);
  CHECK(std::isfinite(p[1]));
}

TEST_CASE("softmax rejects empty input") { CHECK_THROWS_AS(softmax(Vector{}), std::invalid_argument); }

TEST_CASE("softmax sums to one and ignores a common shift") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = spred::testing::uniform_index(rng, 1, 40);
    const Vector s = random_vector(rng, n, spred::testing::uniform_real(rng, 0.1, 50.0));
    const double shift = spred::testing::uniform_real(rng, -100.0, 100.0);
    Vector shifted = s;
    for (double& v : shifted) v += shift;
    const Vector p = softmax(s);
    const Vector q = softmax(shifted);
    CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) < 1e-9);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(p[i] >= 0.0);
      CHECK(std::abs(p[i] - q[i]) < 1e-9);
    }
  }
}

TEST_CASE("kl divergence worked values") {
  CHECK(kl_divergence(Vector{0.3, 0.7}, Vector{0.3, 0.7}) == 0.0);
  CHECK(std::abs(kl_divergence(Vector{1.0, 0.0}, Vector{0.5, 0.5}) - std::log(2.0)) < 1e-15);
  CHECK(std::abs(kl_divergence(Vector{0.5, 0.5}, Vector{0.9, 0.1}) - 0.5 * std::log(25.0 / 9.0)) < 1e-12);
  CHECK(std::abs(0.5 * std::log(25.0 / 9.0) - 0.51083) < 1e-5);
}

TEST_CASE("kl divergence length mismatch throws") {
  CHECK_THROWS_AS(kl_divergence(Vector{1.0}, Vector{0.5, 0.5}), std::invalid_argument);
}

TEST_CASE("kl divergence floors q instead of diverging") {
  const double d = kl_divergence(Vector{0.5, 0.5}, Vector{1.0, 0.0});
  CHECK(std::isfinite(d));
  CHECK(std::abs(d - (0.5 * std::log(0.5) + 0.5 * std::log(0.5 / kKlEpsilon))) < 1e-9);
}

TEST_CASE("kl divergence is nonnegative and zero only on equal inputs") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = spred::testing::uniform_index(rng, 2, 30);
    const Vector p = softmax(random_vector(rng, n, 3.0));
    const Vector q = softmax(random_vector(rng, n, 3.0));
    CHECK(kl_divergence(p, q) > 1e-12);
    CHECK(kl_divergence(p, p) <= 1e-12);
    CHECK(kl_divergence(q, q) <= 1e-12);
  }
}

TEST_CASE("sgd step arithmetic") {
  Vector a{1.0, 2.0};
  sgd_step(a, Vector{0.0, 0.0}, 0.1);
  CHECK(a == Vector{1.0, 2.0});
  Vector b{1.0};
  sgd_step(b, Vector{2.0}, 0.5);
  CHECK(b == Vector{0.0});
  std::mt19937_64 rng(3);
  Vector c = random_vector(rng, 17);
  const Vector before = c;
  sgd_step(c, random_vector(rng, 17, 9.0), 0.0);
  CHECK(c == before);
}

TEST_CASE("sgd step shape mismatch throws") {
  Vector a{1.0, 2.0};
  CHECK_THROWS_AS(sgd_step(a, Vector{1.0}, 0.1), std::invalid_argument);
  GradientBuffer g(3);
  CHECK_THROWS_AS(sgd_step(a, g, 0.1), std::invalid_argument);
}

TEST_CASE("finite difference check on a quadratic") {
  const ScalarLoss half_norm = [](std::span<const double> t) { return 0.5 * dot(t, t); };
  const Vector theta{3.0, 4.0};
  CHECK(finite_difference_check(half_norm, theta, theta, 1e-5) < 1e-6);
  CHECK(finite_difference_check(half_norm, theta, Vector{3.0, 5.0}, 1e-5) > 0.1);
}

TEST_CASE("finite difference check rejects bad inputs") {
  const ScalarLoss f = [](std::span<const double> t) { return t[0]; };
  CHECK_THROWS_AS(numeric_gradient(f, Vector{1.0}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(finite_difference_check(f, Vector{1.0}, Vector{1.0, 2.0}, 1e-5), std::invalid_argument);
}

TEST_CASE("gradient buffer accumulates and zeroes") {
  GradientBuffer a(3), b(3);
  b[0] = 1.0;
  b[2] = -2.0;
  a.add_scaled(b, 2.0);
  CHECK(a[0] == 2.0);
  CHECK(a[2] == -4.0);
  a.zero();
  CHECK(a[0] == 0.0);
  GradientBuffer c(2);
  CHECK_THROWS_AS(a.add_scaled(c, 1.0), std::invalid_argument);
}

TEST_CASE("matrix rows and append") {
  Matrix m;
  m.append_row(Vector{1.0, 2.0});
  m.append_row(Vector{3.0, 4.0});
  CHECK(m.rows() == 2);
  CHECK(m(1, 0) == 3.0);
  CHECK_THROWS_AS(m.append_row(Vector{1.0}), std::invalid_argument);
}

TEST_CASE("l2 normalization keeps zero vectors at zero") {
  const Vector z = l2_normalized(Vector{0.0, 0.0});
  CHECK(z == Vector{0.0, 0.0});
  const Vector u = l2_normalized(Vector{3.0, 4.0});
  CHECK(std::abs(u[0] - 0.6) < 1e-15);
  CHECK(std::abs(u[1] - 0.8) < 1e-15);
}

TEST_CASE("require_finite names the offender") {
  CHECK_NOTHROW(require_finite(Vector{1.0, 2.0}, "x"));
  try {
    require_finite(Vector{1.0, std::numeric_limits<double>::quiet_NaN()}, "bank");
    FAIL("expected throw");
  } catch (const std::domain_error& e) {
    CHECK(std::string(e.what()).find("bank") != std::string::npos);
  }
}

TEST_CASE("derive_seed separates streams deterministically") {
  CHECK(derive_seed(7, 1) == derive_seed(7, 1));
  CHECK(derive_seed(7, 1) != derive_seed(7, 2));
  CHECK(derive_seed(7, 1) != derive_seed(8, 1));
}
