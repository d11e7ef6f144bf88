#include <limits>

#include "binary_io.hpp"
#include "mcvqa/errors.hpp"
#include "mcvqa/model.hpp"

namespace mcvqa {

namespace {

constexpr std::string_view kMagic = "MCVQACKP";
constexpr std::uint32_t kVersion = 1;

std::string descriptor(const Checkpoint& c) {
  return variant_to_config(c.variant) + "embed_dim=" + std::to_string(c.dims.embed_dim) +
         "\nchannels=" + std::to_string(c.dims.channels) + "\ngrid=" + std::to_string(c.dims.grid) + "\n";
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  io::ByteWriter w;
  w.bytes(kMagic);
  w.u32(kVersion);
  w.str32(descriptor(ckpt));
  w.u64(ckpt.embedding_fingerprint);
  w.f64(ckpt.best_validation_accuracy);
  w.u64(ckpt.iteration);
  w.u32(static_cast<std::uint32_t>(ckpt.parameters.size()));
  for (const auto& [name, t] : ckpt.parameters) {
    w.str32(name);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape()) w.u64(e);
    for (double v : t.values()) w.f64(v);
  }
  return w.buffer();
}

Checkpoint decode_checkpoint(std::string_view bytes, const std::string& source) {
  io::ByteReader r(bytes, source);
  if (bytes.size() < kMagic.size()) throw TruncatedFileError(source + ": too short for a checkpoint header");
  if (r.bytes(kMagic.size()) != kMagic) throw CorruptFileError(source + ": not a checkpoint (bad magic)");
  const auto version = r.u32();
  if (version != kVersion) {
    throw VersionMismatchError(source + ": checkpoint version " + std::to_string(version) + ", expected " +
                               std::to_string(kVersion));
  }
  Checkpoint c;
  KeyValueConfig cfg;
  try {
    cfg = KeyValueConfig::parse(r.str32(), source);
    c.variant = variant_from_config(cfg);
    cfg.read("embed_dim", c.dims.embed_dim);
    cfg.read("channels", c.dims.channels);
    cfg.read("grid", c.dims.grid);
    cfg.reject_unknown();
  } catch (const ConfigError& e) {
    throw CorruptFileError(source + ": bad descriptor: " + e.what());
  }
  c.embedding_fingerprint = r.u64();
  c.best_validation_accuracy = r.f64();
  c.iteration = r.u64();
  const auto count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str32();
    const auto rank = r.u32();
    if (rank == 0 || rank > 4) throw CorruptFileError(source + ": parameter '" + name + "' has rank " + std::to_string(rank));
    Shape shape(rank);
    std::size_t volume = 1;
    for (auto& e : shape) {
      const auto ext = r.u64();
      if (ext == 0 || ext > r.remaining() / 8) {
        throw ext == 0 ? CorruptFileError(source + ": parameter '" + name + "' has a zero extent")
                       : TruncatedFileError(source + ": parameter '" + name + "' extends past end of file");
      }
      e = static_cast<std::size_t>(ext);
      volume *= e;
      if (volume > r.remaining() / 8) {
        throw TruncatedFileError(source + ": parameter '" + name + "' extends past end of file");
      }
    }
    std::vector<double> data(volume);
    for (auto& v : data) v = r.f64();
    c.parameters.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  if (!r.at_end()) {
    throw CorruptFileError(source + ": " + std::to_string(r.remaining()) + " trailing bytes after checkpoint");
  }
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  io::write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(io::read_file(path), path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path, ModelKind expected) {
  Checkpoint c = load_checkpoint(path);
  if (c.variant.kind != expected) {
    throw VariantMismatchError(path.string() + ": checkpoint holds " + kind_name(c.variant.kind) + ", expected " +
                               kind_name(expected));
  }
  return c;
}

}  // namespace mcvqa
