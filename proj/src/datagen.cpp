#include "spred/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "spred/binary_io.hpp"

namespace spred {
namespace {

constexpr std::uint32_t kDatasetVersion = 1;

void check_domain(const DomainSpec& d, const std::string& name, GridShape grid, bool trains,
                  std::vector<std::string>& bad) {
  if (d.channel_means.size() != grid.channels) bad.push_back(name + ".channel_means");
  if (d.channel_stds.size() != grid.channels) bad.push_back(name + ".channel_stds");
  for (double s : d.channel_stds) {
    if (!(s > 0.0) || !std::isfinite(s)) {
      bad.push_back(name + ".channel_stds");
      break;
    }
  }
  if (d.identity_count < 2) bad.push_back(name + ".identity_count");
  if (trains && (d.samples_min < 2 || d.samples_max < d.samples_min)) {
    bad.push_back(name + ".samples_per_identity");
  }
  if (!(d.noise_std > 0.0)) bad.push_back(name + ".noise_std");
}

}  // namespace

void StreamConfig::validate() const {
  std::vector<std::string> bad;
  if (grid.channels == 0 || grid.positions == 0 || grid.size() < 2) bad.push_back("feature_grid");
  if (!(label_rate > 0.0 && label_rate <= 1.0)) bad.push_back("label_rate");
  if (seen_domains.empty()) bad.push_back("seen_domains");
  if (pixel_noise < 0.0) bad.push_back("pixel_noise");
  if (!(render_shift >= 0.0 && render_shift < 1.0)) bad.push_back("render_shift");
  if (nuisance_std < 0.0) bad.push_back("nuisance_std");
  if (queries_per_identity < 1) bad.push_back("queries_per_identity");
  if (gallery_per_identity < 1) bad.push_back("gallery_per_identity");
  if (cameras < 1) bad.push_back("cameras");
  for (std::size_t i = 0; i < seen_domains.size(); ++i) {
    check_domain(seen_domains[i], "seen_domains[" + std::to_string(i) + "]", grid, true, bad);
  }
  for (std::size_t i = 0; i < unseen_domains.size(); ++i) {
    check_domain(unseen_domains[i], "unseen_domains[" + std::to_string(i) + "]", grid, false, bad);
  }
  if (!bad.empty()) {
    std::string msg = "invalid stream config field(s):";
    for (const auto& b : bad) msg += " " + b;
    throw ConfigError(msg);
  }
}

std::vector<bool> SemiDataset::labeled_mask() const {
  std::vector<bool> mask(train.size(), false);
  for (std::size_t i : labeled_indices) mask[i] = true;
  return mask;
}

std::vector<int> SemiDataset::identities() const {
  std::vector<int> ids;
  for (const auto& o : train) ids.push_back(o.identity);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

Observation apply_domain_style(const Observation& obs, const DomainSpec& spec, GridShape shape) {
  Observation out = obs;
  for (std::size_t c = 0; c < shape.channels; ++c) {
    for (std::size_t s = 0; s < shape.positions; ++s) {
      double& v = out.grid[c * shape.positions + s];
      v = v * spec.channel_stds[c] + spec.channel_means[c];
    }
  }
  return out;
}

LabelSplit split_labels(const std::vector<Observation>& observations, double rate,
                        std::uint64_t seed) {
  if (!(rate > 0.0 && rate <= 1.0)) throw std::invalid_argument("split_labels: rate must be in (0, 1]");
  std::map<int, std::vector<std::size_t>> by_identity;
  for (std::size_t i = 0; i < observations.size(); ++i) {
    by_identity[observations[i].identity].push_back(i);
  }
  for (const auto& [id, members] : by_identity) {
    if (members.size() < 2) {
      throw std::invalid_argument("split_labels: identity " + std::to_string(id) + " has " +
                                  std::to_string(members.size()) + " sample(s), need at least 2");
    }
  }

  std::mt19937_64 rng(seed);
  std::vector<bool> labeled(observations.size(), false);
  std::vector<std::size_t> pool;
  std::size_t forced = 0;
  for (auto& [id, members] : by_identity) {
    std::shuffle(members.begin(), members.end(), rng);
    labeled[members[0]] = true;
    labeled[members[1]] = true;
    forced += 2;
    pool.insert(pool.end(), members.begin() + 2, members.end());
  }

  LabelSplit split;
  const auto target = static_cast<std::size_t>(std::llround(rate * static_cast<double>(observations.size())));
  if (forced > target) {
    std::ostringstream msg;
    msg << "label rate " << rate << " is below the forced minimum of two labels per identity; "
        << forced << " of " << observations.size() << " samples labeled";
    split.warnings.push_back(msg.str());
  } else {
    std::sort(pool.begin(), pool.end());
    std::shuffle(pool.begin(), pool.end(), rng);
    for (std::size_t k = 0; k < target - forced && k < pool.size(); ++k) labeled[pool[k]] = true;
  }
  for (std::size_t i = 0; i < observations.size(); ++i) {
    (labeled[i] ? split.labeled : split.unlabeled).push_back(i);
  }
  return split;
}

Stream generate_stream(const StreamConfig& config) {
  config.validate();
  const GridShape shape = config.grid;
  const std::size_t dim = shape.size();
  const std::size_t latent = std::max<std::size_t>(1, dim / 2);

  std::mt19937_64 map_rng(derive_seed(config.seed, 0));
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix render(dim, latent);
  const double render_scale = 1.0 / std::sqrt(static_cast<double>(latent));
  for (double& v : render.flat()) v = normal(map_rng) * render_scale;

  Stream stream;
  stream.grid = shape;
  stream.label_rate = config.label_rate;
  stream.seed = config.seed;

  int next_identity = 0;
  const std::size_t total_domains = config.seen_domains.size() + config.unseen_domains.size();
  for (std::size_t d = 0; d < total_domains; ++d) {
    const bool seen = d < config.seen_domains.size();
    const DomainSpec& spec = seen ? config.seen_domains[d] : config.unseen_domains[d - config.seen_domains.size()];
    std::mt19937_64 rng(derive_seed(config.seed, 1 + d));
    Matrix domain_render = render;
    if (config.render_shift > 0.0) {
      const double keep = std::sqrt(1.0 - config.render_shift);
      const double own = std::sqrt(config.render_shift) * render_scale;
      for (double& v : domain_render.flat()) v = keep * v + own * normal(rng);
    }
    const std::size_t nuisance_dims = config.nuisance_std > 0.0 ? config.nuisance_dims : 0;
    Matrix nuisance_render(dim, nuisance_dims);
    if (nuisance_dims > 0) {
      const double scale = 1.0 / std::sqrt(static_cast<double>(nuisance_dims));
      for (double& v : nuisance_render.flat()) v = normal(rng) * scale;
    }

    auto render_sample = [&](const Vector& signature, int identity, int camera) {
      Vector z(latent);
      for (std::size_t k = 0; k < latent; ++k) z[k] = signature[k] + spec.noise_std * normal(rng);
      Observation obs;
      obs.grid.assign(dim, 0.0);
      for (std::size_t r = 0; r < dim; ++r) obs.grid[r] = dot(domain_render.row(r), z);
      if (nuisance_dims > 0) {
        Vector nu(nuisance_dims);
        for (double& v : nu) v = config.nuisance_std * normal(rng);
        for (std::size_t r = 0; r < dim; ++r) obs.grid[r] += dot(nuisance_render.row(r), nu);
      }
      obs.identity = identity;
      obs.domain = static_cast<int>(d);
      obs.camera = camera;
      obs = apply_domain_style(obs, spec, shape);
      for (double& v : obs.grid) v += config.pixel_noise * normal(rng);
      return obs;
    };

    std::vector<Observation> train;
    RetrievalSplit test;
    std::uniform_int_distribution<int> count_dist(spec.samples_min, std::max(spec.samples_min, spec.samples_max));
    std::uniform_int_distribution<int> camera_dist(0, config.cameras - 1);
    for (int k = 0; k < spec.identity_count; ++k) {
      const int identity = next_identity++;
      Vector signature(latent);
      for (double& v : signature) v = normal(rng);
      if (seen) {
        const int n = count_dist(rng);
        for (int i = 0; i < n; ++i) train.push_back(render_sample(signature, identity, camera_dist(rng)));
      }
      for (int i = 0; i < config.queries_per_identity; ++i) test.query.push_back(render_sample(signature, identity, 0));
      for (int i = 0; i < config.gallery_per_identity; ++i) test.gallery.push_back(render_sample(signature, identity, 1));
    }

    if (seen) {
      std::shuffle(train.begin(), train.end(), rng);
      SemiDataset ds;
      ds.grid = shape;
      ds.stage = static_cast<int>(d) + 1;
      ds.domain = static_cast<int>(d);
      LabelSplit split = split_labels(train, config.label_rate, derive_seed(config.seed, 1000 + d));
      ds.train = std::move(train);
      ds.labeled_indices = std::move(split.labeled);
      ds.unlabeled_indices = std::move(split.unlabeled);
      ds.warnings = std::move(split.warnings);
      ds.test = std::move(test);
      stream.seen.push_back(std::move(ds));
    } else {
      stream.unseen.push_back(TestDataset{static_cast<int>(d), std::move(test)});
    }
  }
  return stream;
}

StreamConfig make_stream_config(const ProceduralStreamSettings& s, std::uint64_t seed) {
  StreamConfig cfg;
  cfg.seed = seed;
  cfg.label_rate = s.label_rate;
  cfg.grid = GridShape{s.channels, s.positions};
  cfg.pixel_noise = s.pixel_noise;
  cfg.render_shift = s.render_shift;
  cfg.nuisance_dims = s.nuisance_dims;
  cfg.nuisance_std = s.nuisance_std;

  std::mt19937_64 rng(derive_seed(seed, 0xD0D0));
  std::uniform_real_distribution<double> mean_dist(-s.style_mean_range, s.style_mean_range);
  std::uniform_real_distribution<double> log_std_dist(-s.style_log_std_range, s.style_log_std_range);
  const double spacing = std::sqrt(2.0);
  auto make_domain = [&]() {
    DomainSpec d;
    for (std::size_t c = 0; c < s.channels; ++c) {
      d.channel_means.push_back(s.style_mean_range > 0.0 ? mean_dist(rng) : 0.0);
      d.channel_stds.push_back(s.style_log_std_range > 0.0 ? std::exp(log_std_dist(rng)) : 1.0);
    }
    d.identity_count = s.identities;
    d.samples_min = s.samples_min;
    d.samples_max = s.samples_max;
    d.noise_std = s.noise_ratio * spacing;
    return d;
  };
  for (int i = 0; i < s.seen_domains; ++i) cfg.seen_domains.push_back(make_domain());
  for (int i = 0; i < s.unseen_domains; ++i) cfg.unseen_domains.push_back(make_domain());
  return cfg;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

void write_observations(io::BinaryWriter& w, const std::vector<Observation>& obs) {
  for (const auto& o : obs) {
    w.i32(o.identity);
    w.i32(o.camera);
    w.f64s(o.grid);
  }
}

std::vector<Observation> read_observations(io::BinaryReader& r, std::size_t n, std::size_t dim, int domain) {
  std::vector<Observation> out(n);
  for (auto& o : out) {
    o.identity = r.i32();
    o.camera = r.i32();
    o.domain = domain;
    o.grid = r.f64s(dim);
  }
  return out;
}

struct DatasetBlock {
  std::uint32_t kind = 0;  // 0 = seen stage, 1 = test-only domain
  std::int32_t stage = 0;
  std::int32_t domain = 0;
  std::vector<Observation> train;
  std::vector<std::size_t> labeled;
  RetrievalSplit test;
};

void write_block(const std::filesystem::path& path, GridShape shape, const DatasetBlock& b) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("datagen: cannot open " + path.string() + " for writing");
  io::BinaryWriter w(out);
  w.tag("SPRD");
  w.u32(kDatasetVersion);
  w.u32(static_cast<std::uint32_t>(shape.channels));
  w.u32(static_cast<std::uint32_t>(shape.positions));
  w.u32(b.kind);
  w.i32(b.stage);
  w.i32(b.domain);
  w.u32(static_cast<std::uint32_t>(b.train.size()));
  w.u32(static_cast<std::uint32_t>(b.labeled.size()));
  w.u32(static_cast<std::uint32_t>(b.test.query.size()));
  w.u32(static_cast<std::uint32_t>(b.test.gallery.size()));
  for (std::size_t i : b.labeled) w.u32(static_cast<std::uint32_t>(i));
  write_observations(w, b.train);
  write_observations(w, b.test.query);
  write_observations(w, b.test.gallery);
  if (!out) throw std::runtime_error("datagen: write failed for " + path.string());
}

DatasetBlock read_block(const std::filesystem::path& path, GridShape& shape) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("datagen: cannot open " + path.string());
  io::BinaryReader r(in, path.string());
  r.expect_tag("SPRD");
  const auto version = r.u32();
  if (version != kDatasetVersion) {
    throw io::FormatError(path.string() + ": unsupported dataset version " + std::to_string(version));
  }
  shape.channels = r.u32();
  shape.positions = r.u32();
  DatasetBlock b;
  b.kind = r.u32();
  b.stage = r.i32();
  b.domain = r.i32();
  const auto n_train = r.u32();
  const auto n_labeled = r.u32();
  const auto n_query = r.u32();
  const auto n_gallery = r.u32();
  for (std::uint32_t i = 0; i < n_labeled; ++i) {
    const auto idx = r.u32();
    if (idx >= n_train) throw io::FormatError(path.string() + ": labeled index out of range");
    b.labeled.push_back(idx);
  }
  b.train = read_observations(r, n_train, shape.size(), b.domain);
  b.test.query = read_observations(r, n_query, shape.size(), b.domain);
  b.test.gallery = read_observations(r, n_gallery, shape.size(), b.domain);
  return b;
}

nlohmann::json identity_stats(const std::vector<Observation>& obs) {
  std::map<int, int> counts;
  for (const auto& o : obs) ++counts[o.identity];
  int lo = counts.empty() ? 0 : counts.begin()->first;
  int hi = counts.empty() ? 0 : counts.rbegin()->first;
  return {{"count", counts.size()}, {"min_id", lo}, {"max_id", hi}};
}

}  // namespace

void write_stream(const Stream& stream, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["format"] = "SPRD";
  manifest["version"] = kDatasetVersion;
  manifest["grid"] = {{"channels", stream.grid.channels}, {"positions", stream.grid.positions}};
  manifest["seed"] = stream.seed;
  manifest["label_rate"] = stream.label_rate;

  nlohmann::json stages = nlohmann::json::array();
  for (const auto& ds : stream.seen) {
    const std::string file = "stage_" + std::to_string(ds.stage) + ".bin";
    write_block(dir / file, stream.grid, DatasetBlock{0, ds.stage, ds.domain, ds.train, ds.labeled_indices, ds.test});
    std::map<int, int> labeled_per_id;
    for (std::size_t i : ds.labeled_indices) ++labeled_per_id[ds.train[i].identity];
    int min_labeled = labeled_per_id.empty() ? 0 : labeled_per_id.begin()->second;
    for (const auto& [id, n] : labeled_per_id) min_labeled = std::min(min_labeled, n);
    stages.push_back({
        {"file", file},
        {"stage", ds.stage},
        {"domain", ds.domain},
        {"identities", identity_stats(ds.train)},
        {"n_train", ds.train.size()},
        {"n_labeled", ds.labeled_indices.size()},
        {"n_unlabeled", ds.unlabeled_indices.size()},
        {"labeled_fraction", ds.train.empty() ? 0.0 : static_cast<double>(ds.labeled_indices.size()) / static_cast<double>(ds.train.size())},
        {"min_labeled_per_identity", min_labeled},
        {"n_query", ds.test.query.size()},
        {"n_gallery", ds.test.gallery.size()},
        {"warnings", ds.warnings},
    });
  }
  manifest["stages"] = stages;

  nlohmann::json unseen = nlohmann::json::array();
  for (std::size_t u = 0; u < stream.unseen.size(); ++u) {
    const auto& td = stream.unseen[u];
    const std::string file = "unseen_" + std::to_string(u + 1) + ".bin";
    write_block(dir / file, stream.grid, DatasetBlock{1, 0, td.domain, {}, {}, td.test});
    unseen.push_back({
        {"file", file},
        {"domain", td.domain},
        {"identities", identity_stats(td.test.query)},
        {"n_query", td.test.query.size()},
        {"n_gallery", td.test.gallery.size()},
    });
  }
  manifest["unseen"] = unseen;

  std::ofstream out(dir / "manifest.json");
  if (!out) throw std::runtime_error("datagen: cannot write manifest in " + dir.string());
  out << manifest.dump(2) << '\n';
}

Stream read_stream(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("datagen: missing manifest " + manifest_path.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw io::FormatError(manifest_path.string() + ": " + e.what());
  }

  Stream stream;
  stream.grid = GridShape{manifest.at("grid").at("channels").get<std::size_t>(),
                          manifest.at("grid").at("positions").get<std::size_t>()};
  stream.seed = manifest.at("seed").get<std::uint64_t>();
  stream.label_rate = manifest.at("label_rate").get<double>();

  auto check_shape = [&](GridShape got, const std::string& file) {
    if (!(got == stream.grid)) throw io::FormatError(file + ": grid shape disagrees with manifest");
  };
  for (const auto& entry : manifest.at("stages")) {
    const std::string file = entry.at("file").get<std::string>();
    GridShape shape;
    DatasetBlock b = read_block(dir / file, shape);
    check_shape(shape, file);
    SemiDataset ds;
    ds.grid = stream.grid;
    ds.stage = b.stage;
    ds.domain = b.domain;
    ds.train = std::move(b.train);
    ds.labeled_indices = std::move(b.labeled);
    std::vector<bool> mask = ds.labeled_mask();
    for (std::size_t i = 0; i < ds.train.size(); ++i) {
      if (!mask[i]) ds.unlabeled_indices.push_back(i);
    }
    ds.test = std::move(b.test);
    if (entry.contains("warnings")) ds.warnings = entry.at("warnings").get<std::vector<std::string>>();
    stream.seen.push_back(std::move(ds));
  }
  for (const auto& entry : manifest.at("unseen")) {
    const std::string file = entry.at("file").get<std::string>();
    GridShape shape;
    DatasetBlock b = read_block(dir / file, shape);
    check_shape(shape, file);
    stream.unseen.push_back(TestDataset{b.domain, std::move(b.test)});
  }
  return stream;
}

}  // namespace spred
