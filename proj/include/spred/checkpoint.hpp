#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "spred/danet.hpp"
#include "spred/encoder.hpp"
#include "spred/objectives.hpp"

namespace spred {

/// Everything needed to resume after stage `stage` or to evaluate it.
struct Checkpoint {
  int stage = 0;
  std::uint64_t config_hash = 0;
  Mlp model;
  PrototypeBank bank;
  std::optional<DanetParams> danet;
};

/// "SPCK", version u32, then tagged sections (four-cc + u64 byte length):
/// META, ENCD, BANK and optionally DANT. Readers skip unknown tags.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

/// Throws io::FormatError on a truncated or foreign file.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace spred
