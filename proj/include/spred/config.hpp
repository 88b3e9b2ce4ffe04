#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <string>
#include <vector>

#include "spred/datagen.hpp"
#include "spred/trainer.hpp"

namespace spred {

/// Union of every module's settings, as read from an INI-style file with
/// sections [run], [stream], [hyperparams], [clustering], [danet],
/// [trainer], [ablations] and [eval].
struct RunConfig {
  ProceduralStreamSettings stream;
  PipelineConfig pipeline;
  std::filesystem::path out = "out";
  bool dump_features = false;

  std::uint64_t seed() const { return pipeline.seed; }
  StreamConfig stream_config() const { return make_stream_config(stream, pipeline.seed); }

  /// Throws ConfigError naming every bad field.
  void validate() const;
};

/// Every documented key as "section.key", in file order.
std::vector<std::string> config_keys();

/// Sets one key from its textual value. Throws ConfigError for an unknown
/// key or a value that does not parse.
void set_config_value(RunConfig& config, const std::string& dotted_key, const std::string& value);

/// Starts from the defaults and applies every key in `in`. Syntax errors
/// carry the source name and line; unknown keys are rejected by name.
RunConfig parse_config(std::istream& in, const std::string& source);
RunConfig load_config(const std::filesystem::path& path);

/// The full config in the same format parse_config accepts.
std::string render_config(const RunConfig& config);

/// FNV-1a of the rendered config.
std::uint64_t config_hash(const RunConfig& config);

}  // namespace spred
