#include "spred/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "spred/binary_io.hpp"

namespace spred {
namespace {

constexpr std::uint32_t kCheckpointVersion = 1;

void section(io::BinaryWriter& w, std::string_view tag, const std::string& payload) {
  w.tag(tag);
  w.u64(payload.size());
  w.bytes(payload);
}

std::string bank_payload(const PrototypeBank& bank) {
  std::ostringstream s;
  io::BinaryWriter w(s);
  w.u32(static_cast<std::uint32_t>(bank.size()));
  w.u32(static_cast<std::uint32_t>(bank.dim()));
  for (int id : bank.identities()) w.i32(id);
  w.f64s(bank.prototypes().flat());
  return s.str();
}

PrototypeBank read_bank(std::istream& in, const std::string& source) {
  io::BinaryReader r(in, source);
  const std::size_t rows = r.u32();
  const std::size_t dim = r.u32();
  std::vector<int> ids(rows);
  for (int& id : ids) id = r.i32();
  Matrix protos(rows, dim);
  const Vector values = r.f64s(rows * dim);
  std::copy(values.begin(), values.end(), protos.flat().begin());
  return PrototypeBank(std::move(ids), std::move(protos));
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  io::BinaryWriter w(out);
  w.tag("SPCK");
  w.u32(kCheckpointVersion);

  std::ostringstream meta;
  io::BinaryWriter mw(meta);
  mw.i32(ckpt.stage);
  mw.u64(ckpt.config_hash);
  section(w, "META", meta.str());

  std::ostringstream enc;
  ckpt.model.save(enc);
  section(w, "ENCD", enc.str());
  section(w, "BANK", bank_payload(ckpt.bank));

  if (ckpt.danet) {
    std::ostringstream dn;
    io::BinaryWriter dw(dn);
    dw.u32(static_cast<std::uint32_t>(ckpt.danet->shape.channels));
    dw.u32(static_cast<std::uint32_t>(ckpt.danet->shape.positions));
    ckpt.danet->network.save(dn);
    section(w, "DANT", dn.str());
  }
  if (!out) throw std::runtime_error("write failed for checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  const std::string source = path.string();
  io::BinaryReader r(in, source);
  r.expect_tag("SPCK");
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    throw io::FormatError(source + ": unsupported checkpoint version " + std::to_string(version));
  }

  Checkpoint ckpt;
  bool have_meta = false, have_model = false, have_bank = false;
  while (!r.at_end()) {
    const std::string tag = r.tag();
    const std::uint64_t length = r.u64();
    if (length > (std::uint64_t{1} << 32)) {
      throw io::FormatError(source + ": section " + tag + " claims " + std::to_string(length) + " bytes");
    }
    const std::vector<char> raw = r.bytes(length);
    std::istringstream body(std::string(raw.begin(), raw.end()));
    const std::string where = source + " [" + tag + "]";
    if (tag == "META") {
      io::BinaryReader mr(body, where);
      ckpt.stage = mr.i32();
      ckpt.config_hash = mr.u64();
      have_meta = true;
    } else if (tag == "ENCD") {
      ckpt.model = Mlp::load(body, where);
      have_model = true;
    } else if (tag == "BANK") {
      ckpt.bank = read_bank(body, where);
      have_bank = true;
    } else if (tag == "DANT") {
      io::BinaryReader dr(body, where);
      DanetParams d;
      d.shape.channels = dr.u32();
      d.shape.positions = dr.u32();
      d.network = Mlp::load(body, where);
      ckpt.danet = std::move(d);
    }
  }
  if (!have_meta || !have_model || !have_bank) {
    throw io::FormatError(source + ": checkpoint is missing a required section");
  }
  return ckpt;
}

}  // namespace spred
