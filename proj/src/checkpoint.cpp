#include "sprune/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

#include "sprune/errors.hpp"

namespace sprune {

namespace {

constexpr char kMagic[4] = {'I', 'P', 'R', 'C'};

struct Writer {
  std::vector<std::uint8_t> bytes;

  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    bytes.insert(bytes.end(), b, b + n);
  }
  void u8(std::uint8_t v) { bytes.push_back(v); }
  void u32(std::uint32_t v) { raw(&v, 4); }   // little-endian host assumed
  void u64(std::uint64_t v) { raw(&v, 8); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  void tensor(const NamedTensor& t) {
    str(t.name);
    u8(0);  // dtype tag: f32
    u32(static_cast<std::uint32_t>(t.value.rank()));
    for (Index d : t.value.shape()) u64(static_cast<std::uint64_t>(d));
    raw(t.value.data(), static_cast<std::size_t>(t.value.size()) * sizeof(float));
  }
};

struct Reader {
  const std::vector<std::uint8_t>& bytes;
  std::size_t pos = 0;

  void raw(void* p, std::size_t n) {
    if (pos + n > bytes.size()) throw IntegrityError("checkpoint: truncated");
    std::memcpy(p, bytes.data() + pos, n);
    pos += n;
  }
  std::uint8_t u8() {
    std::uint8_t v;
    raw(&v, 1);
    return v;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    raw(&v, 4);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    raw(&v, 8);
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    if (pos + n > bytes.size()) throw IntegrityError("checkpoint: truncated string");
    std::string s(reinterpret_cast<const char*>(bytes.data() + pos), n);
    pos += n;
    return s;
  }
  NamedTensor tensor() {
    NamedTensor t;
    t.name = str();
    if (u8() != 0) throw IntegrityError("checkpoint: unknown dtype tag");
    const std::uint32_t rank = u32();
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<Index>(u64());
    Tensor<float> value(shape);
    raw(value.data(), static_cast<std::size_t>(value.size()) * sizeof(float));
    t.value = std::move(value);
    return t;
  }
};

std::uint32_t crc_of(const std::uint8_t* data, std::size_t n) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(data), static_cast<uInt>(n)));
}

}  // namespace

std::vector<std::uint8_t> checkpoint_bytes(const Checkpoint& c) {
  Writer w;
  w.raw(kMagic, 4);
  w.u32(c.version);
  w.u32(static_cast<std::uint32_t>(c.params.size()));
  for (const auto& t : c.params) w.tensor(t);
  w.u8(c.optimizer_kind);
  w.u64(c.optimizer_step);
  w.u32(static_cast<std::uint32_t>(c.optimizer_tensors.size()));
  for (const auto& t : c.optimizer_tensors) w.tensor(t);
  w.u32(static_cast<std::uint32_t>(c.rng_states.size()));
  for (const auto& [name, state] : c.rng_states) {
    w.str(name);
    w.str(state);
  }
  w.u32(c.schedule_pos);
  w.u32(c.epoch);
  w.u32(crc_of(w.bytes.data(), w.bytes.size()));
  return w.bytes;
}

Checkpoint checkpoint_from_bytes(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 12) throw IntegrityError("checkpoint: too small");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw IntegrityError("checkpoint: bad magic");
  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, bytes.data() + bytes.size() - 4, 4);
  if (stored_crc != crc_of(bytes.data(), bytes.size() - 4))
    throw IntegrityError("checkpoint: checksum mismatch");

  Reader r{bytes, 4};
  Checkpoint c;
  c.version = r.u32();
  if (c.version != kCheckpointVersion)
    throw IntegrityError("checkpoint: version " + std::to_string(c.version) + ", expected " +
                         std::to_string(kCheckpointVersion));
  const std::uint32_t n_params = r.u32();
  for (std::uint32_t i = 0; i < n_params; ++i) c.params.push_back(r.tensor());
  c.optimizer_kind = r.u8();
  c.optimizer_step = r.u64();
  const std::uint32_t n_opt = r.u32();
  for (std::uint32_t i = 0; i < n_opt; ++i) c.optimizer_tensors.push_back(r.tensor());
  const std::uint32_t n_rng = r.u32();
  for (std::uint32_t i = 0; i < n_rng; ++i) {
    std::string name = r.str();
    std::string state = r.str();
    c.rng_states.emplace_back(std::move(name), std::move(state));
  }
  c.schedule_pos = r.u32();
  c.epoch = r.u32();
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& c) {
  auto bytes = checkpoint_bytes(c);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot write " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IntegrityError("cannot read " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return checkpoint_from_bytes(bytes);
}

}  // namespace sprune
