#pragma once

// Synthetic lifelong identity streams: every domain is a set of identities
// rendered into a C x S grid through a linear map (a shared part plus an
// optional per-domain part), then restyled by a per-domain channel affine
// transform.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "spred/errors.hpp"
#include "spred/numerics.hpp"

namespace spred {

struct GridShape {
  std::size_t channels = 3;
  std::size_t positions = 16;

  std::size_t size() const { return channels * positions; }
  bool operator==(const GridShape&) const = default;
};

/// Grid layout is channel-major: entry (c, s) lives at c * positions + s.
struct Observation {
  Vector grid;
  int identity = 0;
  int domain = 0;
  int camera = 0;

  bool operator==(const Observation&) const = default;
};

struct DomainSpec {
  Vector channel_means;
  Vector channel_stds;
  int identity_count = 40;
  int samples_min = 20;
  int samples_max = 28;
  /// Per-coordinate std of the identity cluster in signature space.
  double noise_std = 0.42;
};

struct StreamConfig {
  std::vector<DomainSpec> seen_domains;
  std::vector<DomainSpec> unseen_domains;
  double label_rate = 0.1;
  std::uint64_t seed = 0;
  GridShape grid;
  /// Isotropic grid-space noise added after styling.
  double pixel_noise = 0.05;
  /// Variance share of each domain's render map that is private to it, in [0, 1).
  double render_shift = 0.0;
  /// Per-sample nuisance factors shared by all identities of a domain,
  /// rendered through a map private to the domain.
  std::size_t nuisance_dims = 0;
  double nuisance_std = 0.0;
  int queries_per_identity = 2;
  int gallery_per_identity = 2;
  /// Training samples draw cameras uniformly from [0, cameras).
  int cameras = 4;

  /// Throws ConfigError listing every offending field.
  void validate() const;
};

struct RetrievalSplit {
  std::vector<Observation> query;
  std::vector<Observation> gallery;
};

/// One training stage: observations, the labeled/unlabeled partition, and a
/// held-out query/gallery split for per-stage testing.
struct SemiDataset {
  GridShape grid;
  int stage = 0;
  int domain = 0;
  std::vector<Observation> train;
  std::vector<std::size_t> labeled_indices;
  std::vector<std::size_t> unlabeled_indices;
  RetrievalSplit test;
  std::vector<std::string> warnings;

  std::vector<bool> labeled_mask() const;
  std::vector<int> identities() const;
};

struct TestDataset {
  int domain = 0;
  RetrievalSplit test;
};

struct Stream {
  GridShape grid;
  double label_rate = 0.1;
  std::uint64_t seed = 0;
  std::vector<SemiDataset> seen;
  std::vector<TestDataset> unseen;
};

Stream generate_stream(const StreamConfig& config);

struct LabelSplit {
  std::vector<std::size_t> labeled;
  std::vector<std::size_t> unlabeled;
  std::vector<std::string> warnings;
};

/// Two labeled samples per identity first, then uniform random labeling of
/// the rest until round(rate * n) samples are labeled.
LabelSplit split_labels(const std::vector<Observation>& observations, double rate,
                        std::uint64_t seed);

/// Channel c becomes x * channel_stds[c] + channel_means[c].
Observation apply_domain_style(const Observation& obs, const DomainSpec& spec, GridShape shape);

/// Builds a stream config with `seen + unseen` domains whose styles are drawn
/// from `seed`. Style means are U(-mean_range, mean_range); stds are
/// exp(U(-log_std_range, log_std_range)).
struct ProceduralStreamSettings {
  int seen_domains = 5;
  int unseen_domains = 2;
  int identities = 40;
  int samples_min = 20;
  int samples_max = 28;
  std::size_t channels = 3;
  std::size_t positions = 16;
  double label_rate = 0.1;
  /// Identity-cluster noise relative to the per-coordinate signature spacing sqrt(2).
  double noise_ratio = 0.3;
  double pixel_noise = 0.05;
  double render_shift = 0.0;
  std::size_t nuisance_dims = 0;
  double nuisance_std = 0.0;
  double style_mean_range = 1.5;
  double style_log_std_range = 0.5;
};

StreamConfig make_stream_config(const ProceduralStreamSettings& settings, std::uint64_t seed);

/// Dataset files: one `stage_<t>.bin` per seen stage, `unseen_<u>.bin` per
/// test-only domain, and `manifest.json`.
void write_stream(const Stream& stream, const std::filesystem::path& dir);
Stream read_stream(const std::filesystem::path& dir);

}  // namespace spred
