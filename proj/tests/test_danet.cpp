#include <doctest.h>

#include <cmath>

#include "spred/danet.hpp"
#include "spred/errors.hpp"
#include "support.hpp"

using namespace spred;

namespace {

StyleSampler fixed(StyleDraw draw) {
  return [draw](const ChannelStats&) { return draw; };
}

std::vector<Observation> random_observations(std::mt19937_64& rng, std::size_t n, GridShape shape) {
  std::vector<Observation> out(n);
  for (auto& o : out) {
    o.grid = spred::testing::random_vector(rng, shape.size());
    for (std::size_t s = 0; s < shape.positions; ++s) o.grid[s] += 2.0;
  }
  return out;
}

}  // namespace

TEST_CASE("channel stats worked values") {
  const GridShape shape{2, 2};
  const ChannelStats s = channel_stats(Vector{3.0, 3.0, 0.0, 2.0}, shape);
  CHECK(s.means == Vector{3.0, 1.0});
  CHECK(s.stds == Vector{0.0, 1.0});
  CHECK_THROWS_AS(channel_stats(Vector{1.0}, shape), std::invalid_argument);
}

TEST_CASE("channel stats match a two-pass recomputation") {
  std::mt19937_64 rng(1);
  const GridShape shape{3, 7};
  for (int trial = 0; trial < 50; ++trial) {
    const Vector g = spred::testing::random_vector(rng, shape.size(), 4.0);
    const ChannelStats s = channel_stats(g, shape);
    for (std::size_t c = 0; c < 3; ++c) {
      long double sum = 0, sq = 0;
      for (std::size_t k = 0; k < 7; ++k) sum += g[c * 7 + k];
      const long double mean = sum / 7;
      for (std::size_t k = 0; k < 7; ++k) sq += (g[c * 7 + k] - mean) * (g[c * 7 + k] - mean);
      CHECK(std::abs(s.means[c] - static_cast<double>(mean)) < 1e-12);
      CHECK(std::abs(s.stds[c] - static_cast<double>(std::sqrt(sq / 7))) < 1e-12);
    }
  }
}

TEST_CASE("restyling with the source statistics is the identity") {
  std::mt19937_64 rng(2);
  const GridShape shape{3, 5};
  const Vector g = spred::testing::random_vector(rng, shape.size());
  const ChannelStats s = channel_stats(g, shape);
  const Vector out = style_augment(g, shape, fixed({s.means, s.stds}));
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::abs(out[i] - g[i]) < 1e-12);
}

TEST_CASE("raising the sampled mean by one shifts every entry by one") {
  std::mt19937_64 rng(3);
  const GridShape shape{3, 5};
  const Vector g = spred::testing::random_vector(rng, shape.size());
  const ChannelStats s = channel_stats(g, shape);
  Vector m = s.means;
  for (double& v : m) v += 1.0;
  const Vector out = style_augment(g, shape, fixed({m, s.stds}));
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::abs(out[i] - g[i] - 1.0) < 1e-12);
}

TEST_CASE("augmented statistics follow the restyle formula") {
  std::mt19937_64 rng(4);
  const GridShape shape{3, 16};
  for (int trial = 0; trial < 200; ++trial) {
    const Vector g = spred::testing::random_vector(rng, shape.size(), 2.0);
    const ChannelStats src = channel_stats(g, shape);
    StyleDraw draw;
    for (std::size_t c = 0; c < 3; ++c) {
      draw.means.push_back(spred::testing::uniform_real(rng, -3.0, 3.0));
      draw.stds.push_back(spred::testing::uniform_real(rng, 0.1, 3.0));
    }
    const ChannelStats out = channel_stats(restyle(g, shape, src, draw), shape);
    for (std::size_t c = 0; c < 3; ++c) {
      CHECK(std::abs(out.stds[c] - draw.stds[c]) < 1e-9);
      CHECK(std::abs(out.means[c] - draw.means[c] * draw.stds[c] / src.stds[c]) < 1e-9);
    }
    // With the spread left unchanged the sampled mean is reproduced exactly.
    StyleDraw keep = draw;
    keep.stds = src.stds;
    const ChannelStats shifted = channel_stats(restyle(g, shape, src, keep), shape);
    for (std::size_t c = 0; c < 3; ++c) CHECK(std::abs(shifted.means[c] - keep.means[c]) < 1e-9);
  }
}

TEST_CASE("constant channels pass through") {
  const GridShape shape{2, 3};
  const Vector g{4.0, 4.0, 4.0, 1.0, 2.0, 3.0};
  const Vector out = style_augment(g, shape, fixed({{10.0, 0.0}, {5.0, 1.0}}));
  CHECK(out[0] == 4.0);
  CHECK(out[1] == 4.0);
  CHECK(out[3] != 1.0);
}

TEST_CASE("sampled spreads are clamped above zero") {
  std::mt19937_64 rng(5);
  const StyleSampler sampler = gaussian_style_sampler(rng);
  ChannelStats s;
  s.means = {0.0, 1.0};
  s.stds = {1.0, 0.5};
  bool clamped = false;
  for (int trial = 0; trial < 2000; ++trial) {
    const StyleDraw d = sampler(s);
    for (std::size_t c = 0; c < 2; ++c) {
      CHECK(d.stds[c] >= kMinStdRatio * s.stds[c]);
      clamped |= d.stds[c] == kMinStdRatio * s.stds[c];
    }
  }
  CHECK(clamped);
}

TEST_CASE("identity network aligns to the input") {
  const DanetParams p{GridShape{2, 3}, Mlp::identity(6, 2)};
  Observation o;
  o.grid = {1, 2, 3, 4, 5, 6};
  CHECK(align(p, o).grid == o.grid);
  Observation bad;
  bad.grid = {1.0};
  CHECK_THROWS_AS(align(p, bad), std::invalid_argument);
}

TEST_CASE("reconstruction gradient matches finite differences") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed + 300);
    const GridShape shape{2, 4};
    DanetConfig cfg;
    cfg.bottleneck = 3;
    cfg.depth = 1 + seed % 2;
    cfg.nonlinear = seed % 3 == 0;
    const DanetParams p = make_danet(shape, cfg, seed);
    const Matrix x = spred::testing::random_matrix(rng, 5, shape.size());
    const Matrix y = spred::testing::random_matrix(rng, 5, shape.size());
    GradientBuffer g;
    reconstruction_loss(p.network, x, y, &g);
    const ScalarLoss loss = [&](std::span<const double> theta) {
      Mlp m = p.network;
      std::copy(theta.begin(), theta.end(), m.params().begin());
      return reconstruction_loss(m, x, y, nullptr);
    };
    CHECK(finite_difference_check(loss, p.network.params(), g.values(), 1e-5) < 1e-4);
  }
}

TEST_CASE("training overfits a single constant observation") {
  const GridShape shape{3, 4};
  Observation o;
  o.grid.assign(shape.size(), 0.7);
  DanetConfig cfg;
  cfg.epochs = 400;
  cfg.batch_size = 1;
  cfg.lr = 0.05;
  const DanetTraining t = train_danet({o}, shape, cfg, 1);
  CHECK(t.final_loss < 1e-3);
}

TEST_CASE("zero epochs return the initialization") {
  const GridShape shape{3, 4};
  std::mt19937_64 rng(6);
  DanetConfig cfg;
  cfg.epochs = 0;
  const DanetTraining t = train_danet(random_observations(rng, 8, shape), shape, cfg, 9);
  CHECK(t.params == make_danet(shape, cfg, 9));
  CHECK(t.epoch_losses.empty());
}

TEST_CASE("training losses are finite and decrease") {
  const GridShape shape{3, 8};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    DanetConfig cfg;
    cfg.epochs = 15;
    const DanetTraining t = train_danet(random_observations(rng, 64, shape), shape, cfg, seed);
    REQUIRE(t.epoch_losses.size() == 15);
    for (double l : t.epoch_losses) CHECK(std::isfinite(l));
    CHECK(t.epoch_losses.back() < t.epoch_losses.front());
    CHECK(std::isfinite(t.final_loss));
  }
}

TEST_CASE("training is seeded and align is pure") {
  const GridShape shape{3, 8};
  std::mt19937_64 rng(7);
  const auto data = random_observations(rng, 32, shape);
  DanetConfig cfg;
  cfg.epochs = 3;
  const DanetTraining a = train_danet(data, shape, cfg, 4);
  const DanetTraining b = train_danet(data, shape, cfg, 4);
  CHECK(a.params == b.params);
  const Observation before = data[0];
  const Observation x = align(a.params, data[0]);
  CHECK(data[0] == before);
  CHECK(align(a.params, data[0]) == x);
  CHECK(align_all(a.params, data)[0] == x);
}

TEST_CASE("invalid danet settings are rejected") {
  DanetConfig c;
  c.lr = 0.0;
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(train_danet({}, GridShape{}, DanetConfig{}, 0), std::invalid_argument);
}
